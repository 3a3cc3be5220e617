"""Exception types shared across the package."""


class GibbsfitError(Exception):
    """Base class for all package errors."""


class ConfigError(GibbsfitError):
    """Invalid model, window, grid, or run configuration."""


class NumericalError(GibbsfitError):
    """Estimation or linear-algebra failure."""


class SeparationError(NumericalError):
    """The estimate does not exist (e.g. no observed close pairs)."""


class NotPositiveDefiniteError(NumericalError):
    """Cholesky factorization of the Fredholm system failed."""


class NonConvergenceError(NumericalError):
    """Iteration limit reached; carries the last iterate and a trace."""

    def __init__(self, message, theta=None, trace=None):
        super().__init__(message)
        self.theta = theta
        self.trace = trace or []
