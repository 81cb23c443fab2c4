"""Exception types raised by the package."""


class RefitError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(RefitError, ValueError):
    pass


class ZeroVector(RefitError, ValueError):
    pass


class ZeroReference(RefitError, ValueError):
    """A supported block was given a (numerically) zero reference block."""


class InvalidSubgradient(RefitError, ValueError):
    pass


class NotInSupport(RefitError, ValueError):
    pass


class StepSizeViolation(RefitError, ValueError):
    """tau * sigma * ||Gamma^T Gamma|| >= 1."""


class BudgetExceeded(RefitError, RuntimeError):
    pass


class UnsupportedFormat(RefitError, ValueError):
    pass
