"""Distributed multi-agent interaction simulation with imagined potential games."""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
