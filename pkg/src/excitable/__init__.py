"""Impulse-driven conductance-based neurons: simulation, spike events, contraction checks."""

from ._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
