"""Continuous-depth propagation dH/dt = ln(A) H + H ln(W) + E.

Everything is evaluated in the joint eigenbasis: with ``A = P diag(lam) P^-1``
and ``W = Q diag(phi) Q^-1`` a matrix flow ``P (Et o K) Q^-1`` only needs the
scalar weights ``K_ij = f(a_i + b_j)`` where ``Et = P^-1 E Q``.
"""
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .errors import ConfigError, DimensionError
from .graph import NormalizedAdjacency
from .numerics import DEFAULT_CLAMP, EigenSystem, as_matrix, clamp_spectrum, general_eig

METHODS = ("euler", "rk4", "closed_form_exact", "closed_form_paper")
DEFAULT_SING_TOL = 1e-6


@dataclass(frozen=True)
class OdeConfig:
    t_end: float = 1.0
    steps: int = 8
    method: str = "rk4"
    sing_tol: float = DEFAULT_SING_TOL
    clamp_eps: float = DEFAULT_CLAMP

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown ODE method {self.method!r}; choose from {METHODS}")
        if self.t_end < 0:
            raise ConfigError("t_end must be nonnegative")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigError("steps must be a positive integer")
        if self.sing_tol <= 0 or self.clamp_eps <= 0:
            raise ConfigError("sing_tol and clamp_eps must be positive")


@dataclass(frozen=True)
class ClosedFormCache:
    adj_eig: EigenSystem
    w_eig: EigenSystem
    adj_shifted: np.ndarray  # eigenvalues of A - I
    w_shifted: np.ndarray  # eigenvalues of W - I
    adj_log: np.ndarray  # ln of the clamped spectrum of A
    w_log: np.ndarray
    log_adj: np.ndarray  # ln A as a matrix
    log_w: np.ndarray
    clamp_eps: float = DEFAULT_CLAMP
    e_tilde: np.ndarray = None

    @property
    def shape(self):
        return self.adj_eig.size, self.w_eig.size

    def to_eigenbasis(self, e):
        e = as_matrix(e, "E")
        if e.shape != self.shape:
            raise DimensionError(f"E has shape {e.shape}, cache expects {self.shape}")
        return self.adj_eig.inverse @ e @ self.w_eig.vectors

    def from_eigenbasis(self, k):
        return self.adj_eig.vectors @ k @ self.w_eig.inverse

    def with_e(self, e):
        return replace(self, e_tilde=self.to_eigenbasis(e))


def build_cache(a_hat, w, clamp_eps=DEFAULT_CLAMP, e=None):
    if isinstance(a_hat, NormalizedAdjacency):
        adj_eig = a_hat.eig
    else:
        adj_eig = general_eig(a_hat)
    w_eig = general_eig(w)
    adj_log = np.log(clamp_spectrum(adj_eig.values, clamp_eps))
    w_log = np.log(clamp_spectrum(w_eig.values, clamp_eps))
    cache = ClosedFormCache(
        adj_eig=adj_eig,
        w_eig=w_eig,
        adj_shifted=adj_eig.values - 1.0,
        w_shifted=w_eig.values - 1.0,
        adj_log=adj_log,
        w_log=w_log,
        log_adj=(adj_eig.vectors * adj_log) @ adj_eig.inverse,
        log_w=(w_eig.vectors * w_log) @ w_eig.inverse,
        clamp_eps=clamp_eps,
    )
    return cache.with_e(e) if e is not None else cache


def _weights(a, b, T, delta, kind):
    return kernels.flow_weights(np.ascontiguousarray(a), np.ascontiguousarray(b),
                                float(T), float(delta), kind)


def _flow(e, cache, a, b, T, delta, kind):
    et = cache.to_eigenbasis(e)
    return cache.from_eigenbasis(et * _weights(a, b, T, delta, kind))


def exact_solution(e, cache, t, delta=DEFAULT_SING_TOL):
    """``int_0^{t+1} A^s E W^s ds`` in closed form."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return _flow(e, cache, cache.adj_log, cache.w_log, t + 1.0, delta, kernels.INTEGRAL)


def initial_state(e, cache, delta=DEFAULT_SING_TOL):
    """H(0): eigenbasis entries ``Et_ij (lam_i phi_j - 1) / ln(lam_i phi_j)``.

    Near-singular entries (``|ln lam_i + ln phi_j| < delta``) use the series
    ``Et_ij (1 + s/2)``, which is exactly ``Et_ij`` at ``s = 0``.
    """
    return exact_solution(e, cache, 0.0, delta)


def ode_rhs(h, e, cache):
    h = as_matrix(h, "H")
    e = as_matrix(e, "E")
    if h.shape != e.shape or h.shape != cache.shape:
        raise DimensionError(f"H {h.shape}, E {e.shape}, cache {cache.shape} disagree")
    return cache.log_adj @ h + h @ cache.log_w + e


def f_matrix(cache, t, delta=DEFAULT_SING_TOL):
    """Eigenbasis correction ``Et_ij (e^{t s_ij} - 1) / s_ij`` with shifted spectra."""
    if cache.e_tilde is None:
        raise ValueError("cache has no E attached; use cache.with_e(e)")
    if t < 0:
        raise ValueError("t must be nonnegative")
    return cache.e_tilde * _weights(cache.adj_shifted, cache.w_shifted, t, delta, kernels.INTEGRAL)


def paper_closed_form(e, cache, t, delta=DEFAULT_SING_TOL):
    """``e^{(A-I)t} E e^{(W-I)t} + P F(t) Q^-1`` taken literally.

    This is not the solution of :func:`ode_rhs`; it is kept for comparison.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    cache = cache.with_e(e)
    expo = _flow(e, cache, cache.adj_shifted, cache.w_shifted, t, delta, kernels.EXPONENTIAL)
    return expo + cache.from_eigenbasis(f_matrix(cache, t, delta))


def integrate(log_adj, log_w, forcing, h0, t, steps, method="rk4"):
    """Fixed-step Euler or RK4 for ``dH/dt = log_adj H + H log_w + forcing``."""
    codes = {"euler": kernels.EULER, "rk4": kernels.RK4}
    if method not in codes:
        raise ConfigError(f"integrate() supports euler/rk4, got {method!r}")
    if steps < 1:
        raise ConfigError("steps must be positive")
    arrays = [np.ascontiguousarray(x, dtype=float) for x in (log_adj, log_w, forcing, h0)]
    return kernels.integrate(*arrays, float(t), int(steps), codes[method])


def solve(e, cache, config):
    e = as_matrix(e, "E")
    if not isinstance(config, OdeConfig):
        raise ConfigError("solve() needs an OdeConfig")
    h0 = initial_state(e, cache, config.sing_tol)
    if config.t_end == 0:
        return h0
    if config.method == "closed_form_exact":
        return exact_solution(e, cache, config.t_end, config.sing_tol)
    if config.method == "closed_form_paper":
        return paper_closed_form(e, cache, config.t_end, config.sing_tol)
    return integrate(cache.log_adj, cache.log_w, e, h0, config.t_end, config.steps, config.method)


def second_order_identity_check(e, cache, t, step=1e-3, delta=DEFAULT_SING_TOL):
    """Relative residual of ``H'' = ln(A) H' + H' ln(W)`` by central differences.

    Returns 0 when both sides vanish (e.g. A = W = I, where H is linear in t).
    The default step balances truncation (about step^2 ln(r)^2 / 12) against
    roundoff, which grows like eps |H| / step^2 once H'' is small beside H.
    """
    if t <= 0 or t - step < 0:
        raise ValueError("t must exceed the difference step")
    hm = exact_solution(e, cache, t - step, delta)
    h0 = exact_solution(e, cache, t, delta)
    hp = exact_solution(e, cache, t + step, delta)
    d1 = (hp - hm) / (2.0 * step)
    d2 = (hp - 2.0 * h0 + hm) / (step * step)
    rhs = cache.log_adj @ d1 + d1 @ cache.log_w
    n2 = np.linalg.norm(d2)
    nr = np.linalg.norm(rhs)
    # second differences carry roundoff of order eps*|H|/step^2
    noise = 1e3 * np.finfo(float).eps * max(np.linalg.norm(h0), 1.0) / step**2
    if nr <= noise and n2 <= noise:
        return 0.0
    return float(np.linalg.norm(d2 - rhs) / max(n2, nr))
