"""Exception types shared across the laboratory.

``NumericError`` subclasses map to CLI exit code 2; ``UsageError`` to 1.
"""


class ConvLabError(Exception):
    """Base class for all convlab errors."""


class UsageError(ConvLabError, ValueError):
    """Bad command line, config key, or precondition on user input."""


class NumericError(ConvLabError):
    """A computation could not produce a trustworthy number."""


class IndexRangeError(NumericError, ValueError):
    """An index request exceeds what exact integer arithmetic supports."""


class EvaluationError(NumericError):
    """A user function returned a non-finite value."""

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class StagnationError(NumericError, ZeroDivisionError):
    """Root iteration hit equal function values (or a zero derivative)."""

    def __init__(self, message, points=None):
        super().__init__(message)
        self.points = points


class FitError(NumericError, ValueError):
    """Not enough usable points for a rate fit."""


class StabilityError(NumericError):
    """Advective Courant number exceeded; reduce dt."""

    def __init__(self, message, courant=None, step=None):
        super().__init__(message)
        self.courant = courant
        self.step = step


class SingularSpringError(NumericError):
    """Two spring-connected nodes coincide."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class GeometryError(NumericError, ValueError):
    """Requested geometry does not fit the domain."""
