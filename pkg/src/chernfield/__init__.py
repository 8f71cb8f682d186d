"""Numerical Chern-Weil toolkit for Hermitian metrics on rank-r bundles over C^2 patches."""

__version__ = "0.1.0"

from .errors import ChernfieldError, NumericalFault, ValidationError  # noqa: E402

__all__ = ["__version__", "ChernfieldError", "NumericalFault", "ValidationError"]
