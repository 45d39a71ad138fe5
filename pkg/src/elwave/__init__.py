"""Pseudo-spectral lab for viscous flow coupled to sphere-valued director waves."""

from .spectral import Grid
from .dynamics import Params, State

__all__ = ["Grid", "Params", "State"]
__version__ = "0.1.0"
