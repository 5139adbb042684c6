"""Exceptions and warnings shared across the toolkit."""


class NvpolError(Exception):
    """Base class for toolkit errors."""


class InvalidParameter(NvpolError, ValueError):
    """A parameter failed validation.

    ``key`` names the offending field so front ends can report it.
    """

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class NonHermitianInput(NvpolError, ValueError):
    pass


class GeometryMismatch(NvpolError, TypeError):
    pass


class DegenerateStandoff(InvalidParameter):
    """A sensor-to-sample standoff is zero or negative."""


class NegativeVariance(NvpolError, ValueError):
    pass


class NumericalFailure(NvpolError, ArithmeticError):
    """Base for failures of an iterative or adaptive numerical method."""


class ToleranceNotReached(NumericalFailure):
    pass


class NonConvergent(NumericalFailure):
    pass


class NoCrossover(NumericalFailure):
    pass


class SingularJacobian(NumericalFailure):
    pass


class MaxIterations(NumericalFailure):
    pass


class DegenerateLabeling(UserWarning):
    """Two eigenvectors have equal weight on their dominant Zeeman state."""


class SmallSignalWarning(UserWarning):
    """Predicted contrast or phase lies outside the linear readout regime."""


class FlatDirection(UserWarning):
    """A fit parameter is not identified by the data."""
