"""Numba switch.

Set ``DGODE_DISABLE_NUMBA=1`` to force the pure-numpy kernels.  When numba is
not importable the numpy kernels are used regardless of the flag.
"""
import os

_FLAG = os.environ.get("DGODE_DISABLE_NUMBA", "").strip().lower()

try:
    import numba as _numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(fn):
    """Compile ``fn`` in nopython mode when numba is installed.

    Compilation happens regardless of ``USE_NUMBA`` so the benchmark can
    compare both paths in one process; dispatch is decided by the kernels
    module.
    """
    if not HAVE_NUMBA:
        return fn
    return _numba.njit(cache=True, nogil=True)(fn)


def backend():
    return "numba" if USE_NUMBA else "numpy"
