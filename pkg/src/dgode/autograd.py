"""Minimal reverse-mode differentiation over numpy arrays.

Every function here accepts ndarrays, floats or :class:`Tensor` objects.  When
none of the inputs is a Tensor the plain ndarray result is returned, so model
code written against these functions runs unchanged outside training.
"""
import numpy as np


class Tensor:
    # numpy must hand ``ndarray @ Tensor`` etc. back to our reflected operators
    __array_ufunc__ = None
    __slots__ = ("value", "grad", "name", "_parents", "_vjps")

    def __init__(self, value, parents=(), vjps=(), name=None):
        self.value = np.asarray(value, dtype=float)
        self.grad = None
        self.name = name
        self._parents = tuple(parents)
        self._vjps = tuple(vjps)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape})"

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def T(self):
        return transpose(self)

    def __add__(self, o):
        return add(self, o)

    def __radd__(self, o):
        return add(o, self)

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    def __rmul__(self, o):
        return mul(o, self)

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, o):
        return matmul(self, o)

    def __rmatmul__(self, o):
        return matmul(o, self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)

    def sum(self, axis=None):
        return sum_(self, axis)

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every leaf."""
        if grad is None:
            if self.value.size != 1:
                raise ValueError("backward() without a seed needs a scalar output")
            grad = np.ones_like(self.value)
        order = _topo_order(self)
        grads = {id(self): np.asarray(grad, dtype=float)}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, vjp in zip(node._parents, node._vjps):
                pg = vjp(g)
                if pg is None:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg


def _topo_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    order.reverse()
    return order


def value(x):
    return x.value if isinstance(x, Tensor) else np.asarray(x, dtype=float)


def is_tensor(x):
    return isinstance(x, Tensor)


def custom(out, pairs):
    """Wrap ``out`` with hand-written vector-Jacobian products.

    ``pairs`` is a sequence of ``(input, vjp)``; inputs that are not Tensors
    are skipped.  Returns a plain ndarray when nothing needs a gradient.
    """
    parents, vjps = [], []
    for x, fn in pairs:
        if isinstance(x, Tensor):
            parents.append(x)
            vjps.append(fn)
    if not parents:
        return out
    return Tensor(out, parents, vjps)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def add(a, b):
    av, bv = value(a), value(b)
    return custom(av + bv, [(a, lambda g: _unbroadcast(g, av.shape)),
                            (b, lambda g: _unbroadcast(g, bv.shape))])


def sub(a, b):
    av, bv = value(a), value(b)
    return custom(av - bv, [(a, lambda g: _unbroadcast(g, av.shape)),
                            (b, lambda g: _unbroadcast(-g, bv.shape))])


def mul(a, b):
    av, bv = value(a), value(b)
    return custom(av * bv, [(a, lambda g: _unbroadcast(g * bv, av.shape)),
                            (b, lambda g: _unbroadcast(g * av, bv.shape))])


def div(a, b):
    av, bv = value(a), value(b)
    return custom(av / bv, [(a, lambda g: _unbroadcast(g / bv, av.shape)),
                            (b, lambda g: _unbroadcast(-g * av / (bv * bv), bv.shape))])


def matmul(a, b):
    av, bv = value(a), value(b)
    if av.ndim != 2 or bv.ndim != 2:
        raise ValueError("matmul expects 2-D operands")
    return custom(av @ bv, [(a, lambda g: g @ bv.T), (b, lambda g: av.T @ g)])


def transpose(a):
    return custom(value(a).T, [(a, lambda g: g.T)])


def reshape(a, shape):
    av = value(a)
    return custom(av.reshape(shape), [(a, lambda g: g.reshape(av.shape))])


def getitem(a, idx):
    av = value(a)

    def vjp(g):
        out = np.zeros_like(av)
        np.add.at(out, idx, g)
        return out

    return custom(av[idx], [(a, vjp)])


def take_rows(a, rows):
    """``a[rows]`` for an integer index array (rows may repeat)."""
    av = value(a)
    rows = np.asarray(rows, dtype=np.intp)

    def vjp(g):
        out = np.zeros_like(av)
        np.add.at(out, rows, g)
        return out

    return custom(av[rows], [(a, vjp)])


def sum_(a, axis=None):
    av = value(a)

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, av.shape).copy()
        return np.broadcast_to(np.expand_dims(g, axis), av.shape).copy()

    return custom(np.sum(av, axis=axis), [(a, vjp)])


def mean(a, axis=None):
    av = value(a)
    n = av.size if axis is None else av.shape[axis]
    return mul(sum_(a, axis), 1.0 / n)


def concat(xs, axis=0):
    vals = [value(x) for x in xs]
    out = np.concatenate(vals, axis=axis)
    bounds = np.cumsum([0] + [v.shape[axis] for v in vals])
    pairs = []
    for k, x in enumerate(xs):
        sl = [slice(None)] * out.ndim
        sl[axis] = slice(bounds[k], bounds[k + 1])
        pairs.append((x, lambda g, sl=tuple(sl): g[sl]))
    return custom(out, pairs)


def stack(xs, axis=0):
    vals = [value(x) for x in xs]
    out = np.stack(vals, axis=axis)
    return custom(out, [(x, lambda g, k=k: np.take(g, k, axis=axis))
                        for k, x in enumerate(xs)])


def relu(a):
    av = value(a)
    mask = av > 0
    return custom(np.where(mask, av, 0.0), [(a, lambda g: g * mask)])


def sigmoid(a):
    av = value(a)
    s = 1.0 / (1.0 + np.exp(-av))
    return custom(s, [(a, lambda g: g * s * (1.0 - s))])


def tanh(a):
    t = np.tanh(value(a))
    return custom(t, [(a, lambda g: g * (1.0 - t * t))])


def exp(a):
    e = np.exp(value(a))
    return custom(e, [(a, lambda g: g * e)])


def log(a):
    av = value(a)
    return custom(np.log(av), [(a, lambda g: g / av)])


def clip_min(a, floor):
    av = value(a)
    keep = av >= floor
    return custom(np.where(keep, av, floor), [(a, lambda g: g * keep)])


def log_softmax(a):
    """Row-wise log-softmax of a 2-D array."""
    av = value(a)
    shifted = av - av.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    out = shifted - lse
    p = np.exp(out)
    return custom(out, [(a, lambda g: g - p * g.sum(axis=1, keepdims=True))])


def softmax(a):
    av = value(a)
    shifted = np.exp(av - av.max(axis=1, keepdims=True))
    p = shifted / shifted.sum(axis=1, keepdims=True)
    return custom(p, [(a, lambda g: p * (g - (g * p).sum(axis=1, keepdims=True)))])
