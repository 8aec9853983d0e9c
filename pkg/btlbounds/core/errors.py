class BtlError(Exception):
    """Base class for every error raised by btlbounds."""


class ConfigError(BtlError):
    """Invalid experiment configuration or CLI arguments."""


# --- Model / input errors ---


class ModelError(BtlError, ValueError):
    """Invalid model input (prior, budget, outcome, skills)."""


class DimensionMismatchError(ModelError):
    pass


class ShapeTooSmallError(ModelError):
    """A Gamma shape is below what an expectation needs to be finite."""

    def __init__(self, message: str, shape: float, minimum: float):
        super().__init__(message)
        self.shape = shape
        self.minimum = minimum


class BudgetTooSmallError(ModelError):
    pass


class InfeasibleLoadsError(ModelError):
    pass


class UnsupportedPriorError(ModelError):
    """The prior family is outside what a formula supports (e.g. unequal rates)."""


# --- Numerical errors ---


class NumericalError(BtlError):
    """A numerical routine failed to produce a trustworthy value."""


class SpecialFunctionDomainError(NumericalError, ValueError):
    pass


class ConvergenceError(NumericalError):
    pass


class ToleranceNotMetError(NumericalError):
    def __init__(self, message: str, estimate: float, error_bound: float):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class NotPositiveDefiniteError(NumericalError):
    def __init__(self, message: str, pivot: int):
        super().__init__(message)
        self.pivot = pivot


class NonFiniteIterateError(NumericalError):
    pass


class MonotonicityError(NumericalError):
    pass
