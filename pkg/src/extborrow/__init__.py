"""Effective number of external events borrowed in hybrid controlled trials."""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
