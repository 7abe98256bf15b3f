"""Numerical laboratory for magnetic geodesic flows on surfaces."""

from .kernels import available_backends, default_backend

__version__ = "0.1.0"

__all__ = ["__version__", "available_backends", "default_backend"]
