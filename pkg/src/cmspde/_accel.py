"""Numba switch.

Set ``CMSPDE_NUMBA=0`` to run every hot kernel through its pure-numpy
implementation instead.  Numba is also skipped silently when it cannot be
imported.
"""
import os

_FLAG = os.environ.get("CMSPDE_NUMBA", "1").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

HAVE_NUMBA = numba is not None
ENABLE_NUMBA = HAVE_NUMBA and _FLAG not in ("0", "false", "no", "off")
CACHE_NUMBA = True


def njit(func):
    """Compile ``func`` in nopython mode when numba is usable, else return it."""
    if HAVE_NUMBA:
        return numba.njit(cache=CACHE_NUMBA, nogil=True)(func)
    return func


def default_backend():
    return "numba" if ENABLE_NUMBA else "numpy"
