"""Exception hierarchy shared by every romkit module.

The CLI maps these onto exit codes: configuration problems exit with 2,
numerical failures with 3 and I/O failures with 4.
"""


class RomkitError(Exception):
    """Base class for all romkit errors."""


class ConfigError(RomkitError, ValueError):
    """Invalid configuration or incompatible method/benchmark pairing."""


class NumericalError(RomkitError, ArithmeticError):
    """A numerical stage failed (factorization, divergence, CFL, ...)."""


class NotPositiveDefiniteError(NumericalError):
    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class SingularMatrixError(NumericalError):
    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class InvalidMeshError(NumericalError):
    """Raised when a morph inverts elements."""

    def __init__(self, message, elements=()):
        super().__init__(message)
        self.elements = list(elements)


class SnapshotFormatError(RomkitError, OSError):
    """Malformed, truncated or version-mismatched artifact file."""
