"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input rejected before any numerical work (CLI exit code 2)."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to converge or lost accuracy (CLI exit code 3)."""
