"""Exceptions shared across the package."""


class NonFiniteError(ArithmeticError):
    """A trajectory or matrix integration produced inf or nan."""
