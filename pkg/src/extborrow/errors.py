"""Exception hierarchy shared across the package."""


class BorrowError(Exception):
    """Base class for all package errors."""


class FitError(BorrowError, RuntimeError):
    """A survival model could not be fit."""


class EmptyArm(FitError):
    pass


class NoEventsInArm(FitError):
    pass


class Separation(FitError):
    """The partial likelihood is monotone in beta; no finite maximizer exists."""


class NonConvergence(FitError):
    pass


class PrecisionAtOrAbovePole(BorrowError, ValueError):
    """Hybrid precision >= d_E: no finite number of control events reaches it."""


class KappaZero(BorrowError, ValueError):
    pass


class EvaluationFailed(BorrowError, RuntimeError):
    """A weighted reference refit failed while evaluating the precision curve."""


class TriggerNeverReached(BorrowError, RuntimeError):
    pass


class ExternalSizeInfeasible(BorrowError, ValueError):
    pass


class ConfigError(BorrowError, ValueError):
    pass
