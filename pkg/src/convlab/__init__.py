"""Convergence studies for classic numerical methods and a 2D immersed-boundary swimmer."""
from ._backend import NAME as BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
