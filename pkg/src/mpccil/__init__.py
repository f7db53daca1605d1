"""Imitation learning of a time-free contouring controller for quadrotor path following."""
from ._jit import NUMBA_ENABLED

__version__ = "0.1.0"
__all__ = ["NUMBA_ENABLED", "__version__"]
