"""Exception hierarchy shared by every module of the package."""


class HardyNehariError(Exception):
    """Base class for all package errors."""


class DomainError(HardyNehariError, ValueError):
    """An argument lies outside the admissible range."""


class ConsistencyError(HardyNehariError):
    """Two independent evaluations of the same quantity disagree."""


class NegativeNormError(HardyNehariError):
    """A Hardy-weighted norm came out negative beyond tolerance."""


class GridMismatchError(HardyNehariError, ValueError):
    """Profiles combined in one integral live on different grids."""


class ProjectionFailure(HardyNehariError):
    """A Nehari projection could not be carried out for the given state."""


class ZeroProfileError(ProjectionFailure):
    """Projection of an identically zero profile was requested."""


class NotDominantError(ProjectionFailure):
    """The interaction matrix is not strictly diagonally dominant."""


class NonpositiveCoefficientError(ProjectionFailure):
    """The linear Nehari system produced a nonpositive scaling."""


class NotPDError(ProjectionFailure):
    """The interaction matrix is not positive definite."""


class NoRootError(ProjectionFailure):
    """The two-block root function never changed sign."""


class NoConvergenceError(HardyNehariError):
    """An iterative method stopped before meeting its tolerance."""


class InvalidQuotientError(HardyNehariError):
    """The coupled L^{2*} form F(u) became nonpositive during minimization."""

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state


class NotOnManifoldError(HardyNehariError):
    """A state expected on a Nehari set violates its constraint."""


class ConfigError(HardyNehariError, ValueError):
    """Invalid command-line or file configuration."""
