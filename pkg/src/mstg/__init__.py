"""Multiscale spatio-temporal graph networks for skeleton motion prediction."""

from .tensor import (
    DimensionError,
    NonFiniteError,
    Tape,
    Tensor,
    parameter,
)

__all__ = [
    "DimensionError",
    "NonFiniteError",
    "Tape",
    "Tensor",
    "parameter",
]

__version__ = "0.1.0"
