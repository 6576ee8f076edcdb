"""Exception types shared across the simulator."""


class BisacError(Exception):
    """Base class for all package errors."""


class InvalidConfig(BisacError):
    """A parameter value violates its documented range."""


class InvalidInput(BisacError):
    """An operation was called with an out-of-domain argument."""


class InvalidCovariance(BisacError):
    """A covariance matrix is not symmetric PSD (or is singular where it must not be)."""


class GeometrySingular(BisacError):
    """The bistatic geometry yields an ill-conditioned Fisher information matrix."""


class NumericalBreakdown(BisacError):
    """A linear solve inside the filter failed."""


class DegenerateLinearization(BisacError):
    """Linearization requested at a degenerate expansion point."""


class SubproblemInfeasible(BisacError):
    """The convex placement subproblem has an empty feasible set."""


class SnrInfeasible(BisacError):
    """No horizontal placement meets the robust SNR threshold."""


class CalibrationDegenerate(BisacError):
    """Channel-error calibration cannot proceed (zero predicted covariance)."""


class ConfigError(BisacError):
    """A scenario configuration file is missing, malformed, or inconsistent."""
