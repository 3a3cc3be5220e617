"""Result containers shared by the fitting routines."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

_FALLBACKS = (None, "pl-estimate", "kernel-clamp")


@dataclass(frozen=True)
class SolverReport:
    """Diagnostics from the optimizer that produced an estimate.

    fallback_used records when the requested estimator could not be computed
    and which substitute produced theta_hat; cholesky_fill_in is the stored
    band size (rows of the banded factor) when a banded solve was involved.
    """

    positive_definite: bool = True
    fallback_used: Optional[str] = None
    cholesky_fill_in: Optional[int] = None
    iterations: int = 0

    def __post_init__(self):
        if self.fallback_used not in _FALLBACKS:
            raise ValueError(f"unknown fallback_used: {self.fallback_used!r}")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")


@dataclass
class FitResult:
    """A fitted parameter vector with its diagnostics.

    method is "pl" or "semi-optimal" and names the estimator that produced
    theta_hat (after any fallback). sensitivity is the empirical sensitivity
    matrix of the estimating function at theta_hat; covariance and stderr are
    filled in by the variance estimators when requested. objective is the
    maximized logistic objective for PL fits.
    """

    theta_hat: np.ndarray
    method: str
    report: SolverReport
    sensitivity: np.ndarray
    covariance: Optional[np.ndarray] = None
    stderr: Optional[np.ndarray] = None
    objective: Optional[float] = None

    def __post_init__(self):
        self.theta_hat = np.asarray(self.theta_hat, dtype=float).copy()
        self.theta_hat.setflags(write=False)
        if self.method not in ("pl", "semi-optimal"):
            raise ValueError(f"unknown method: {self.method!r}")
        self.sensitivity = np.asarray(self.sensitivity, dtype=float)
        if not np.isfinite(self.sensitivity).all():
            raise ValueError("sensitivity must be finite")
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)
            if (self.stderr < 0).any():
                raise ValueError("stderr must be nonnegative")

    @property
    def p(self):
        return len(self.theta_hat)
