"""Numba switch.

Kernels are decorated with :func:`njit` from this module.  Setting
``MPCCIL_DISABLE_NUMBA=1`` (or running without numba installed) turns the
decorator into a no-op so the same bodies run as plain NumPy code.
"""
import os

DISABLED = os.environ.get("MPCCIL_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

NUMBA_ENABLED = numba is not None and not DISABLED


def njit(*args, **kwargs):
    if NUMBA_ENABLED:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrapper(func):
        return func

    return wrapper
