"""Dense eigendecomposition and the matrix functions built on it.

Matrices are plain 2-D float64 ndarrays.  Symmetric input goes through the
cyclic Jacobi kernel; the general path only exists for completeness and
rejects anything whose spectrum is not real and diagonalizable.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DiagonalizabilityError, ShapeError, SymmetryError

SYM_TOL = 1e-10
RECON_TOL = 1e-6
DEFAULT_CLAMP = 1e-6


@dataclass(frozen=True)
class EigenSystem:
    """``vectors @ diag(values) @ inverse`` reproduces the source matrix."""

    vectors: np.ndarray
    values: np.ndarray
    inverse: np.ndarray

    @property
    def size(self):
        return self.values.shape[0]

    def apply(self, fn):
        """Matrix function defined by applying ``fn`` to the eigenvalues."""
        return (self.vectors * fn(self.values)) @ self.inverse

    def reconstruct(self):
        return (self.vectors * self.values) @ self.inverse

    def reconstruction_error(self, m):
        m = np.asarray(m, dtype=float)
        denom = max(np.linalg.norm(m), 1e-300)
        return float(np.linalg.norm(self.reconstruct() - m) / denom)


def as_matrix(m, name="matrix"):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ShapeError(f"{name} has non-finite entries")
    return m


def _square(m, name="matrix"):
    m = as_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {m.shape}")
    return m


def is_symmetric(m, tol=SYM_TOL):
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    return bool(np.max(np.abs(m - m.T), initial=0.0) <= tol * scale)


def _canonical_signs(vectors):
    # largest-magnitude component of each eigenvector made positive
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eig(m, max_sweeps=60):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Eigenvalues come back sorted ascending and the eigenvector basis is
    orthonormal, so ``inverse`` is just the transpose.
    """
    m = _square(m)
    if not is_symmetric(m):
        raise SymmetryError("matrix is not symmetric")
    n = m.shape[0]
    if n == 0:
        empty = np.zeros((0, 0))
        return EigenSystem(empty, np.zeros(0), empty)
    a = np.ascontiguousarray(0.5 * (m + m.T))
    values, vectors, _ = kernels.jacobi(a, max_sweeps)
    order = np.argsort(values, kind="stable")
    values = values[order]
    vectors = _canonical_signs(vectors[:, order])
    return EigenSystem(vectors, values, vectors.T.copy())


def general_eig(m):
    """Real diagonalizable eigen-decomposition.

    Symmetric input takes the Jacobi path.  Anything else is handed to LAPACK
    and accepted only if its spectrum is real and it reconstructs to within
    ``RECON_TOL``.
    """
    m = _square(m)
    if is_symmetric(m):
        return sym_eig(m)
    values, vectors = np.linalg.eig(m)
    scale = max(1.0, float(np.max(np.abs(values))))
    if np.any(np.abs(values.imag) > 1e-12 * scale):
        raise DiagonalizabilityError("matrix has a complex spectrum")
    values = values.real
    vectors = vectors.real
    order = np.argsort(values, kind="stable")
    values, vectors = values[order], vectors[:, order]
    try:
        inverse = np.linalg.inv(vectors)
    except np.linalg.LinAlgError as exc:
        raise DiagonalizabilityError("eigenvector matrix is singular") from exc
    es = EigenSystem(vectors, values, inverse)
    if not np.all(np.isfinite(inverse)) or es.reconstruction_error(m) > RECON_TOL:
        raise DiagonalizabilityError("matrix is defective (reconstruction failed)")
    return es


def mat_pow_int(m, k):
    m = _square(m)
    if int(k) != k or k < 0:
        raise ValueError(f"power must be a nonnegative integer, got {k}")
    k = int(k)
    result = np.eye(m.shape[0])
    base = m.copy()
    while k:
        if k & 1:
            result = result @ base
        k >>= 1
        if k:
            base = base @ base
    return result


def mat_exp(m, t=1.0):
    return general_eig(m).apply(lambda v: np.exp(t * v))


def clamp_spectrum(values, eps=DEFAULT_CLAMP):
    if eps <= 0:
        raise ValueError("clamp eps must be positive")
    return np.maximum(values, eps)


def mat_log_clamped(m, eps=DEFAULT_CLAMP):
    """Matrix logarithm with eigenvalues below ``eps`` raised to ``eps``."""
    es = general_eig(m)
    return es.apply(lambda v: np.log(clamp_spectrum(v, eps)))


def mat_power_real(m, s, eps=DEFAULT_CLAMP):
    """``m**s`` for real ``s``, spectrum clamped like ``mat_log_clamped``."""
    es = general_eig(m)
    return es.apply(lambda v: np.exp(s * np.log(clamp_spectrum(v, eps))))
