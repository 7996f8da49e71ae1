"""Exception types shared across the package."""


class QaglassError(Exception):
    """Base class for all package-specific errors."""


class InvalidSizeError(QaglassError, ValueError):
    """A system size outside the supported range was requested."""


class SizeLimitError(QaglassError, ValueError):
    """An exact method was asked to handle a system too large for it."""


class DimensionMismatchError(QaglassError, ValueError):
    """Array arguments have inconsistent shapes."""


class InstanceParseError(QaglassError, ValueError):
    """A persisted instance file is malformed.

    Carries the name of the offending field in ``field``.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class ConvergenceError(QaglassError, RuntimeError):
    """An iterative solver failed to reach its tolerance.

    ``residual`` holds the last residual; ``iterations`` the step count;
    ``stage`` an optional label for multi-stage solvers.
    """

    def __init__(self, message, residual=None, iterations=None, stage=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.stage = stage


class InsufficientDataError(QaglassError, ValueError):
    """Not enough data points for the requested analysis."""


class DomainError(QaglassError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class NumericsError(QaglassError, RuntimeError):
    """A numerical evaluation produced a non-finite result."""


class UnconvergedInputError(QaglassError, ValueError):
    """A derived quantity was requested from an unconverged solution."""


class CheckpointError(QaglassError, RuntimeError):
    """A checkpoint file is unreadable or does not match the run."""
