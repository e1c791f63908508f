"""Exception hierarchy shared by all reflectlab modules."""


class ReflectLabError(Exception):
    """Base class for every error raised by reflectlab."""


class PoleError(ReflectLabError):
    """A Moebius action or representation formula hit a pole."""


class ChartError(ReflectLabError):
    """Element lies outside the open N-bar P chart (upper-left entry zero)."""


class SingularityError(ReflectLabError):
    """A kernel was evaluated on its singular set."""


class DomainError(ReflectLabError, ValueError):
    """Argument outside the documented domain of an operation."""


class RadicalError(ReflectLabError):
    """The form is indefinite, so the positivity quotient does not exist."""


class InvarianceError(ReflectLabError):
    """An operator fails to preserve the radical of the form."""

    def __init__(self, message, violation):
        super().__init__(message)
        self.violation = violation


class ConvergenceError(ReflectLabError):
    """Two discretisation levels disagree beyond tolerance."""


class PartitionError(ReflectLabError):
    """A point selection is not a transversal of the free theta-orbits."""


class GridError(ReflectLabError):
    """A shift is not compatible with the sampling grid."""


class HypothesisError(ReflectLabError):
    """The invariance hypothesis of an averaging argument is violated."""

    def __init__(self, message, violation):
        super().__init__(message)
        self.violation = violation


class SupportError(ReflectLabError):
    """A test function has mass outside its admissible region."""


class StiffnessError(ReflectLabError):
    """An ODE integration failed to meet its tolerance."""


class ConfigError(ReflectLabError):
    """A scenario configuration does not match its schema."""


class ScenarioError(ReflectLabError):
    """A module error raised while running a scenario."""


class IoError(ReflectLabError, OSError):
    """A report or artifact could not be written."""
