"""Numba switch for the hot kernels.

Set ``IONPROBE_DISABLE_NUMBA=1`` before import to force the pure-numpy
path; numba is also skipped when it is not installed.  Both paths are
importable at any time from :mod:`ionprobe.kernels` for comparison.
"""
import os

_flag = os.environ.get("IONPROBE_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _flag not in ("", "0", "false", "no")

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not DISABLED_BY_ENV


def njit(func):
    """``numba.njit(cache=True)`` when numba is importable, else identity."""
    if numba is None:
        return func
    return numba.njit(cache=True)(func)
