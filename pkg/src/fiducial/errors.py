"""Exception hierarchy.

Everything numerical derives from :class:`FiducialError` so callers (and the
CLI) can separate bad numerics from bad configuration.
"""


class FiducialError(Exception):
    """Base class for numerical failures."""


class ConfigError(ValueError):
    """Invalid user configuration; ``path`` names the offending field."""

    def __init__(self, path, reason):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")


class DimensionError(FiducialError, ValueError):
    pass


class InverseUnavailable(FiducialError):
    pass


class TooManySubsets(FiducialError):
    pass


class SingularStatistic(RuntimeWarning):
    """Warned (not raised) when the sufficient-statistic derivative is rank deficient."""


class NonIntegrable(FiducialError):
    pass


class NotMonotone(FiducialError):
    pass


class InvalidCdf(FiducialError):
    pass


class QuantileOutOfRange(FiducialError):
    pass


class NonAncillary(FiducialError):
    pass


class SolverFailure(FiducialError):
    pass


class GridTooCoarse(FiducialError):
    pass


class BudgetExhausted(FiducialError):
    """Raised when the proposal budget runs out; ``partial`` holds what was accepted."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ZeroMassEvent(FiducialError):
    pass


class DegenerateConditioning(FiducialError):
    pass


class ZeroJacobian(FiducialError):
    pass
