"""Geometric quantization toolkit on the phase space T*R^n."""

from .expr import (
    PhaseSpace,
    Expr,
    parse,
    simplify,
    differentiate,
    evaluate,
)

__all__ = [
    "PhaseSpace",
    "Expr",
    "parse",
    "simplify",
    "differentiate",
    "evaluate",
]

__version__ = "0.1.0"
