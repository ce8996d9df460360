"""Exception types raised by pairtest."""

__all__ = [
    "PairtestError",
    "InvalidParameterError",
    "DataError",
    "ParseError",
    "BoundaryError",
    "NonConvergenceError",
    "SingularInformationError",
]


class PairtestError(Exception):
    """Base class for all pairtest errors."""


class InvalidParameterError(PairtestError, ValueError):
    """A parameter lies outside its valid domain."""


class DataError(PairtestError, ValueError):
    """Counts fail a structural invariant (negative, empty group, ...)."""


class ParseError(DataError):
    """A data file could not be parsed; carries a 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class BoundaryError(PairtestError, ValueError):
    """An operation requiring interior parameters was called on the boundary."""


class NonConvergenceError(PairtestError, RuntimeError):
    """A fit did not converge; ``best`` holds the last iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SingularInformationError(PairtestError, RuntimeError):
    """A required information or covariance matrix is numerically singular."""
