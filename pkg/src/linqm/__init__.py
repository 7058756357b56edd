"""Exact operator-algebra verification suites and measurement simulators."""

from .scalar import Scalar
from .weyl import DiffOp, LinearSub, Var

__version__ = "0.1.0"

__all__ = ["Scalar", "Var", "DiffOp", "LinearSub", "__version__"]
