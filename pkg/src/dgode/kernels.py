"""Hot loops, each in two flavours.

``*_nb`` functions are plain loops compiled with numba; ``*_np`` functions are
vectorised numpy doing the same arithmetic.  The public names at the bottom of
the module point at one or the other depending on ``_accel.USE_NUMBA``.
Callers must pass C-contiguous float64 arrays.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

INTEGRAL = 0  # phi(x) = int_0^T e^{s x} ds
EXPONENTIAL = 1  # phi(x) = e^{T x}

EULER = 0
RK4 = 1

# relative gap below which a divided difference falls back to the midpoint derivative
_DD_GAP = 1e-5


# --------------------------------------------------------------------------
# scalar helpers (shared: numba compiles them, numpy path calls them rarely)
# --------------------------------------------------------------------------

@njit
def _phi(x, T, delta, kind):
    if kind == EXPONENTIAL:
        return math.exp(T * x)
    if abs(x) < delta:
        return T + x * T * T / 2.0
    return math.expm1(T * x) / x


@njit
def _dphi(x, T, kind):
    if kind == EXPONENTIAL:
        return T * math.exp(T * x)
    y = T * x
    if abs(y) < 1e-3:
        return T * T * (0.5 + y / 3.0 + y * y / 8.0)
    return (math.exp(y) * (y - 1.0) + 1.0) / (x * x)


# --------------------------------------------------------------------------
# cyclic Jacobi for symmetric matrices
# --------------------------------------------------------------------------

@njit
def _jacobi_nb(a, max_sweeps):
    n = a.shape[0]
    A = a.copy()
    V = np.eye(n)
    fro = 0.0
    for i in range(n):
        for j in range(n):
            fro += A[i, j] * A[i, j]
    floor = 1e-18 * math.sqrt(fro)
    sweeps = 0
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += A[p, q] * A[p, q]
        if off == 0.0:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                g = 100.0 * abs(apq)
                if abs(apq) <= floor or (
                    sweep > 3
                    and abs(A[p, p]) + g == abs(A[p, p])
                    and abs(A[q, q]) + g == abs(A[q, q])
                ):
                    A[p, q] = 0.0
                    A[q, p] = 0.0
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
    return np.diag(A).copy(), V, sweeps


def _jacobi_np(a, max_sweeps):
    n = a.shape[0]
    A = a.copy()
    V = np.eye(n)
    floor = 1e-18 * np.sqrt(np.sum(A * A))
    iu = np.triu_indices(n, 1)
    sweeps = 0
    for sweep in range(max_sweeps):
        if not np.any(A[iu]):
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                g = 100.0 * abs(apq)
                if abs(apq) <= floor or (
                    sweep > 3
                    and abs(A[p, p]) + g == abs(A[p, p])
                    and abs(A[q, q]) + g == abs(A[q, q])
                ):
                    A[p, q] = A[q, p] = 0.0
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                cp, cq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    return np.diag(A).copy(), V, sweeps


# --------------------------------------------------------------------------
# eigenbasis weights for matrix flows  P (Et o phi(a_i + b_j)) Q^T
# --------------------------------------------------------------------------

@njit
def _flow_weights_nb(a, b, T, delta, kind):
    out = np.empty((a.shape[0], b.shape[0]))
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            out[i, j] = _phi(a[i] + b[j], T, delta, kind)
    return out


def _flow_weights_np(a, b, T, delta, kind):
    x = a[:, None] + b[None, :]
    if kind == EXPONENTIAL:
        return np.exp(T * x)
    small = np.abs(x) < delta
    safe = np.where(small, 1.0, x)
    return np.where(small, T + x * T * T / 2.0, np.expm1(T * safe) / safe)


@njit
def _flow_dd_nb(a, b, T, delta, kind):
    n = a.shape[0]
    d = b.shape[0]
    out = np.empty((n, d, d))
    for i in range(n):
        for k in range(d):
            x = a[i] + b[k]
            fx = _phi(x, T, delta, kind)
            for l in range(k, d):
                y = a[i] + b[l]
                gap = abs(x - y)
                if gap <= _DD_GAP * max(1.0, abs(x), abs(y)):
                    v = _dphi(0.5 * (x + y), T, kind)
                else:
                    v = (fx - _phi(y, T, delta, kind)) / (x - y)
                out[i, k, l] = v
                out[i, l, k] = v
    return out


def _dphi_np(x, T, kind):
    if kind == EXPONENTIAL:
        return T * np.exp(T * x)
    y = T * x
    small = np.abs(y) < 1e-3
    safe = np.where(small, 1.0, x)
    big = (np.exp(T * safe) * (T * safe - 1.0) + 1.0) / (safe * safe)
    return np.where(small, T * T * (0.5 + y / 3.0 + y * y / 8.0), big)


def _flow_dd_np(a, b, T, delta, kind):
    x = a[:, None, None] + b[None, :, None]
    y = a[:, None, None] + b[None, None, :]
    fx = _flow_weights_np(a, b, T, delta, kind)
    near = np.abs(x - y) <= _DD_GAP * np.maximum(1.0, np.maximum(np.abs(x), np.abs(y)))
    diff = np.where(near, 1.0, x - y)
    dd = (fx[:, :, None] - fx[:, None, :]) / diff
    return np.where(near, _dphi_np(0.5 * (x + y), T, kind), dd)


@njit
def _log_dd_nb(w):
    d = w.shape[0]
    out = np.empty((d, d))
    for k in range(d):
        for l in range(k, d):
            x = w[k]
            y = w[l]
            if abs(x - y) <= _DD_GAP * max(x, y):
                v = 2.0 / (x + y)
            else:
                v = math.log(x / y) / (x - y)
            out[k, l] = v
            out[l, k] = v
    return out


def _log_dd_np(w):
    x = w[:, None]
    y = w[None, :]
    near = np.abs(x - y) <= _DD_GAP * np.maximum(x, y)
    diff = np.where(near, 1.0, x - y)
    return np.where(near, 2.0 / (x + y), np.log(x / y) / diff)


# --------------------------------------------------------------------------
# fixed-step integration of dH/dt = La H + H Lw + F
# --------------------------------------------------------------------------

@njit
def _integrate_nb(La, Lw, F, H0, t, steps, method):
    h = t / steps
    H = H0.copy()
    for _ in range(steps):
        if method == EULER:
            H = H + h * (La @ H + H @ Lw + F)
        else:
            k1 = La @ H + H @ Lw + F
            Y = H + 0.5 * h * k1
            k2 = La @ Y + Y @ Lw + F
            Y = H + 0.5 * h * k2
            k3 = La @ Y + Y @ Lw + F
            Y = H + h * k3
            k4 = La @ Y + Y @ Lw + F
            H = H + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return H


def _integrate_np(La, Lw, F, H0, t, steps, method):
    h = t / steps
    H = H0.copy()

    def rhs(Y):
        return La @ Y + Y @ Lw + F

    for _ in range(steps):
        if method == EULER:
            H = H + h * rhs(H)
        else:
            k1 = rhs(H)
            k2 = rhs(H + 0.5 * h * k1)
            k3 = rhs(H + 0.5 * h * k2)
            k4 = rhs(H + h * k3)
            H = H + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return H


# --------------------------------------------------------------------------
# Dirichlet energy  1/2 sum_ij A_ij |h_i - h_j|^2
# --------------------------------------------------------------------------

@njit
def _dirichlet_nb(h, adj):
    n, d = h.shape
    total = 0.0
    for i in range(n):
        for j in range(n):
            w = adj[i, j]
            if w != 0.0:
                acc = 0.0
                for k in range(d):
                    diff = h[i, k] - h[j, k]
                    acc += diff * diff
                total += w * acc
    return 0.5 * total


def _dirichlet_np(h, adj):
    diff = h[:, None, :] - h[None, :, :]
    return 0.5 * float(np.sum(adj * np.sum(diff * diff, axis=-1)))


# --------------------------------------------------------------------------
# masked GRU over a padded batch  X: (L, B, in), mask: (L, B)
# weights are stored transposed (in, hid) / (hid, hid) for row-vector batches
# --------------------------------------------------------------------------

@njit
def _sigmoid_nb(x):
    return 1.0 / (1.0 + np.exp(-x))


@njit
def _gru_forward_nb(X, mask, Wz, Wr, Wc, Uz, Ur, Uc, bz, br, bc):
    L, B, _ = X.shape
    hid = Uz.shape[0]
    Hs = np.zeros((L, B, hid))
    Hp = np.zeros((L, B, hid))
    Z = np.zeros((L, B, hid))
    R = np.zeros((L, B, hid))
    C = np.zeros((L, B, hid))
    h = np.zeros((B, hid))
    for t in range(L):
        x = np.ascontiguousarray(X[t])
        z = _sigmoid_nb(x @ Wz + h @ Uz + bz)
        r = _sigmoid_nb(x @ Wr + h @ Ur + br)
        c = np.tanh(x @ Wc + (r * h) @ Uc + bc)
        hn = (1.0 - z) * h + z * c
        m = mask[t].reshape((B, 1))
        Hp[t] = h
        Z[t] = z
        R[t] = r
        C[t] = c
        h = m * hn + (1.0 - m) * h
        Hs[t] = h
    return Hs, Hp, Z, R, C


def _gru_forward_np(X, mask, Wz, Wr, Wc, Uz, Ur, Uc, bz, br, bc):
    L, B, _ = X.shape
    hid = Uz.shape[0]
    Hs = np.zeros((L, B, hid))
    Hp = np.zeros((L, B, hid))
    Z = np.zeros((L, B, hid))
    R = np.zeros((L, B, hid))
    C = np.zeros((L, B, hid))
    h = np.zeros((B, hid))
    for t in range(L):
        x = X[t]
        z = 1.0 / (1.0 + np.exp(-(x @ Wz + h @ Uz + bz)))
        r = 1.0 / (1.0 + np.exp(-(x @ Wr + h @ Ur + br)))
        c = np.tanh(x @ Wc + (r * h) @ Uc + bc)
        hn = (1.0 - z) * h + z * c
        m = mask[t][:, None]
        Hp[t], Z[t], R[t], C[t] = h, z, r, c
        h = m * hn + (1.0 - m) * h
        Hs[t] = h
    return Hs, Hp, Z, R, C


@njit
def _gru_backward_nb(dHs, X, mask, Hp, Z, R, C, Uz, Ur, Uc):
    L, B, n_in = X.shape
    hid = Uz.shape[0]
    gWz = np.zeros((n_in, hid))
    gWr = np.zeros((n_in, hid))
    gWc = np.zeros((n_in, hid))
    gUz = np.zeros((hid, hid))
    gUr = np.zeros((hid, hid))
    gUc = np.zeros((hid, hid))
    gbz = np.zeros(hid)
    gbr = np.zeros(hid)
    gbc = np.zeros(hid)
    dh = np.zeros((B, hid))
    UzT = np.ascontiguousarray(Uz.T)
    UrT = np.ascontiguousarray(Ur.T)
    UcT = np.ascontiguousarray(Uc.T)
    for t in range(L - 1, -1, -1):
        dh = dh + dHs[t]
        m = mask[t].reshape((B, 1))
        hp = np.ascontiguousarray(Hp[t])
        z = Z[t]
        r = R[t]
        c = C[t]
        x = np.ascontiguousarray(X[t])
        xT = np.ascontiguousarray(x.T)
        dhn = m * dh
        dprev = (1.0 - m) * dh + dhn * (1.0 - z)
        dz = dhn * (c - hp)
        dc_pre = dhn * z * (1.0 - c * c)
        rh = np.ascontiguousarray(r * hp)
        gWc += xT @ dc_pre
        gUc += np.ascontiguousarray(rh.T) @ dc_pre
        gbc += dc_pre.sum(axis=0)
        drh = dc_pre @ UcT
        dprev += drh * r
        dr_pre = drh * hp * r * (1.0 - r)
        gWr += xT @ dr_pre
        hpT = np.ascontiguousarray(hp.T)
        gUr += hpT @ dr_pre
        gbr += dr_pre.sum(axis=0)
        dprev += dr_pre @ UrT
        dz_pre = dz * z * (1.0 - z)
        gWz += xT @ dz_pre
        gUz += hpT @ dz_pre
        gbz += dz_pre.sum(axis=0)
        dprev += dz_pre @ UzT
        dh = dprev
    return gWz, gWr, gWc, gUz, gUr, gUc, gbz, gbr, gbc


def _gru_backward_np(dHs, X, mask, Hp, Z, R, C, Uz, Ur, Uc):
    L, B, n_in = X.shape
    hid = Uz.shape[0]
    gW = [np.zeros((n_in, hid)) for _ in range(3)]
    gU = [np.zeros((hid, hid)) for _ in range(3)]
    gb = [np.zeros(hid) for _ in range(3)]
    dh = np.zeros((B, hid))
    for t in range(L - 1, -1, -1):
        dh = dh + dHs[t]
        m = mask[t][:, None]
        hp, z, r, c, x = Hp[t], Z[t], R[t], C[t], X[t]
        dhn = m * dh
        dprev = (1.0 - m) * dh + dhn * (1.0 - z)
        dz_pre = dhn * (c - hp) * z * (1.0 - z)
        dc_pre = dhn * z * (1.0 - c * c)
        gW[2] += x.T @ dc_pre
        gU[2] += (r * hp).T @ dc_pre
        gb[2] += dc_pre.sum(axis=0)
        drh = dc_pre @ Uc.T
        dprev += drh * r
        dr_pre = drh * hp * r * (1.0 - r)
        gW[1] += x.T @ dr_pre
        gU[1] += hp.T @ dr_pre
        gb[1] += dr_pre.sum(axis=0)
        dprev += dr_pre @ Ur.T
        gW[0] += x.T @ dz_pre
        gU[0] += hp.T @ dz_pre
        gb[0] += dz_pre.sum(axis=0)
        dprev += dz_pre @ Uz.T
        dh = dprev
    return gW[0], gW[1], gW[2], gU[0], gU[1], gU[2], gb[0], gb[1], gb[2]


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

if USE_NUMBA:
    jacobi = _jacobi_nb
    flow_weights = _flow_weights_nb
    flow_divided_differences = _flow_dd_nb
    log_divided_differences = _log_dd_nb
    integrate = _integrate_nb
    dirichlet = _dirichlet_nb
    gru_forward = _gru_forward_nb
    gru_backward = _gru_backward_nb
else:
    jacobi = _jacobi_np
    flow_weights = _flow_weights_np
    flow_divided_differences = _flow_dd_np
    log_divided_differences = _log_dd_np
    integrate = _integrate_np
    dirichlet = _dirichlet_np
    gru_forward = _gru_forward_np
    gru_backward = _gru_backward_np

PAIRS = {
    "jacobi": (_jacobi_nb, _jacobi_np),
    "flow_weights": (_flow_weights_nb, _flow_weights_np),
    "flow_divided_differences": (_flow_dd_nb, _flow_dd_np),
    "log_divided_differences": (_log_dd_nb, _log_dd_np),
    "integrate": (_integrate_nb, _integrate_np),
    "dirichlet": (_dirichlet_nb, _dirichlet_np),
    "gru_forward": (_gru_forward_nb, _gru_forward_np),
    "gru_backward": (_gru_backward_nb, _gru_backward_np),
}
