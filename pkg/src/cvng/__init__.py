"""Phase-space tools for non-Gaussian continuous-variable states."""

from .errors import NumericalError, ValidationError

__version__ = "0.1.0"

__all__ = ["NumericalError", "ValidationError", "__version__"]
