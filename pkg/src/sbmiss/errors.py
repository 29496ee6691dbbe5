"""Exception types shared across the package."""


class SbmissError(Exception):
    """Base class for all package-specific errors."""


class DomainError(SbmissError, ValueError):
    """A natural parameter lies outside the family's natural domain."""


class SupportError(SbmissError, ValueError):
    """A value lies outside the family's support."""


class RangeError(SbmissError, ValueError):
    """A mean lies outside (or on the boundary of) the family's mean range."""


class SizeError(SbmissError, ValueError):
    """An input is too large or too small for an exhaustive operation."""


class DesignError(SbmissError, ValueError):
    """An observation design is used with incompatible data."""


class ConfigError(SbmissError, ValueError):
    """Inconsistent or unusable configuration."""


class EstimationError(SbmissError, RuntimeError):
    """No usable data to estimate from (e.g. no observed dyad at all)."""


class ParseError(SbmissError, ValueError):
    """Malformed on-disk data.

    Carries the 1-based line number when raised by the CSV reader.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EstimationWarning(UserWarning):
    """Degenerate but recoverable estimation event (empty cell, dying block)."""
