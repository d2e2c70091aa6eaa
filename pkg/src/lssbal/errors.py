"""Exception types raised by the toolkit.

``LssError`` is the common base; the CLI maps it to exit code 1.
``ModelFormatError`` covers file/JSON problems and maps to exit code 2.
"""


class LssError(Exception):
    """Base class for all domain errors raised by this package."""


class DimensionError(LssError):
    """Matrix or vector dimensions are incompatible with the model."""


class SingularMatrixError(LssError):
    """A matrix that must be invertible is numerically singular."""


class StabilityError(LssError):
    """An operation requires a stable mode matrix and got an unstable one."""


class ConvergenceError(LssError):
    """Iterative solver failed to converge.

    Carries the norm of the last series increment and, when available, the
    existence report for the model that was being solved.
    """

    def __init__(self, message, last_increment=None, existence=None):
        super().__init__(message)
        self.last_increment = last_increment
        self.existence = existence


class AssumptionError(LssError):
    """A matrix-inequality assumption required by a certificate fails."""


class BalancingError(LssError):
    """Balancing cannot proceed (singular or indefinite Gramian factor)."""


class ModelFormatError(LssError):
    """A model or signal file could not be parsed against the schema."""
