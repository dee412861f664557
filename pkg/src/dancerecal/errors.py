"""Exception types raised across the toolkit."""


class DanceRecalError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(DanceRecalError, ValueError):
    """Inconsistent parameters, skeletons, templates or options."""


class LayoutError(DanceRecalError, ValueError):
    """A vector or file does not follow the 139-channel layout."""


class DegenerateRotationError(DanceRecalError, ValueError):
    """A 6D rotation block cannot be orthonormalized."""


class InvalidMatrixError(DanceRecalError, ValueError):
    """A matrix is not a proper rotation."""


class NumericError(DanceRecalError, ArithmeticError):
    """A computation produced non-finite values."""


class InsufficientDataError(DanceRecalError, ValueError):
    """Not enough frames, clips or rows for the requested statistic."""


class NonFiniteError(DanceRecalError, ValueError):
    """Input data contains NaN or infinity."""


class ParseError(DanceRecalError, ValueError):
    """A file is not valid JSON."""


class SchemaError(DanceRecalError, ValueError):
    """A file violates its schema; ``field`` is the offending path."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class InvariantError(DanceRecalError, ValueError):
    """A loaded object violates an invariant of its type."""
