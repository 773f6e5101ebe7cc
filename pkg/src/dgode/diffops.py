"""Differentiable matrix-function and recurrence ops with hand-written VJPs.

Gradients of spectral functions use the Daleckii-Krein form: for
``F(B) = Q f(diag b) Q^T`` the adjoint of a cotangent ``G`` is
``Q (D o (Q^T G Q)) Q^T`` with ``D_kl`` the divided difference of ``f`` at
``b_k, b_l``.  Inputs are symmetric, so gradients are symmetrized.
"""
import numpy as np

from . import autograd as ag
from . import kernels
from .numerics import sym_eig


def _sym(g):
    return 0.5 * (g + g.T)


def sym_logm(w, eps=1e-12):
    """Matrix logarithm of a symmetric positive-definite matrix."""
    es = sym_eig(ag.value(w))
    q = es.vectors
    vals = np.maximum(es.values, eps)
    out = (q * np.log(vals)) @ q.T

    def vjp(g):
        dd = kernels.log_divided_differences(np.ascontiguousarray(vals))
        return _sym(q @ (dd * (q.T @ g @ q)) @ q.T)

    return ag.custom(out, [(w, vjp)])


def lambda_max(s):
    """Largest eigenvalue of a symmetric matrix, as a 0-d value."""
    es = sym_eig(ag.value(s))
    top = es.vectors[:, -1]
    out = np.asarray(es.values[-1])
    return ag.custom(out, [(s, lambda g: float(g) * np.outer(top, top))])


def eigen_flow(e, b_mat, p, p_inv, a_vals, T, delta, kind):
    """``P (Et o phi(a_i + b_j)) Q^T`` where ``B = Q diag(b) Q^T``, ``Et = P^-1 E Q``.

    With ``kind=INTEGRAL`` and ``phi(x) = (e^{Tx} - 1)/x`` this is
    ``int_0^T e^{s lnA} E e^{s B} ds``; ``kind=EXPONENTIAL`` gives
    ``e^{T lnA} E e^{T B}``.  ``p``/``a_vals`` are fixed (graph side); ``e``
    and ``b_mat`` may be Tensors.
    """
    ev = ag.value(e)
    es = sym_eig(ag.value(b_mat))
    q, b = es.vectors, es.values
    a_vals = np.ascontiguousarray(a_vals, dtype=float)
    w = kernels.flow_weights(a_vals, np.ascontiguousarray(b), float(T), float(delta), kind)
    et = p_inv @ ev @ q
    out = p @ (et * w) @ q.T

    def g_tilde(g):
        return p.T @ g @ q

    def vjp_e(g):
        return p_inv.T @ (w * g_tilde(g)) @ q.T

    def vjp_b(g):
        dd = kernels.flow_divided_differences(a_vals, np.ascontiguousarray(b),
                                              float(T), float(delta), kind)
        gt = g_tilde(g)
        m = np.einsum("ikl,ik,il->kl", dd, et, gt)
        return _sym(q @ m @ q.T)

    return ag.custom(out, [(e, vjp_e), (b_mat, vjp_b)])


_GRU_NAMES = ("Wz", "Wr", "Wc", "Uz", "Ur", "Uc", "bz", "br", "bc")


def gru_sequence(x, mask, cell):
    """Run a GRU cell over a padded batch.

    ``x`` is (L, B, n_in), ``mask`` is (L, B) with 1 for real steps; padded
    steps carry the hidden state through unchanged.  ``cell`` maps the names
    in ``_GRU_NAMES`` to arrays or Tensors, with matrices stored as
    (hidden, input) like the usual ``W x`` convention.  Returns (L, B, hidden).
    """
    x = np.ascontiguousarray(x, dtype=float)
    mask = np.ascontiguousarray(mask, dtype=float)
    raw = {k: ag.value(cell[k]) for k in _GRU_NAMES}
    mats = [np.ascontiguousarray(raw[k].T) for k in _GRU_NAMES[:6]]
    biases = [np.ascontiguousarray(raw[k]) for k in _GRU_NAMES[6:]]
    hs, hp, z, r, c = kernels.gru_forward(x, mask, *mats, *biases)
    memo = {}

    def grads(g):
        key = id(g)
        if key not in memo:
            memo.clear()
            out = kernels.gru_backward(np.ascontiguousarray(g), x, mask, hp, z, r, c,
                                       *mats[3:6])
            memo[key] = [out[k].T if k < 6 else out[k] for k in range(9)]
        return memo[key]

    pairs = [(cell[name], (lambda g, k=k: grads(g)[k])) for k, name in enumerate(_GRU_NAMES)]
    return ag.custom(hs, pairs)
