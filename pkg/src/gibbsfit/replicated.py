"""Pooled estimation over independent replicated patterns.

A group of replicates shares one parameter vector; the pooled estimating
function is the sum of the per-replicate ones and is solved by Newton with
the summed empirical sensitivities.  Between-replicate variation yields the
sandwich variance Var(theta-hat) = Sbar^{-1} Vbar Sbar^{-T} / n, and fits of
two groups are compared coordinate-wise by normal two-sample z-tests with
Holm multiplicity adjustment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import norm

from .errors import (ConfigError, NonConvergenceError,
                     NotPositiveDefiniteError, NumericalError)
from .models import ModelInstance, config_coords
from .pseudolikelihood import _fit_logistic, pl_estimating_function
from .quadrature import make_grid, make_grid_cell_size
from .results import FitResult, SolverReport
from .semioptimal import (SemiOptimalConfig, _DivergenceError, _Workspace,
                          semi_optimal_ef)


@dataclass
class ReplicateGroup:
    """Independent patterns modeled with a common parameter vector.

    covariates, when given, supplies one field per replicate (entries may be
    None to keep the model's own); windows are allowed to differ.
    """

    patterns: list
    covariates: Optional[list] = None
    label: str = ""

    def __post_init__(self):
        self.patterns = list(self.patterns)
        if not self.patterns:
            raise ConfigError("a replicate group needs at least one pattern")
        if self.covariates is not None:
            self.covariates = list(self.covariates)
            if len(self.covariates) != len(self.patterns):
                raise ConfigError("one covariate entry per replicate required")

    @property
    def n_replicates(self):
        return len(self.patterns)


@dataclass(frozen=True)
class PooledConfig:
    """Grid policy and solver settings for replicated fitting.

    cell_size, when set, sizes every replicate's quadrature and dummy grids
    in length units so that differing windows get comparable resolution;
    otherwise the fixed grid dimensions are used on every window.
    """

    grid: tuple = (50, 50)
    cell_size: Optional[float] = None
    so: SemiOptimalConfig = field(default_factory=SemiOptimalConfig)

    def __post_init__(self):
        if self.cell_size is not None and self.cell_size <= 0:
            raise ConfigError("cell_size must be positive")
        nx, ny = self.grid
        if int(nx) < 1 or int(ny) < 1:
            raise ConfigError("grid dimensions must be >= 1")

    def scheme_for(self, window):
        if self.cell_size is not None:
            return make_grid_cell_size(window, self.cell_size)
        return make_grid(window, *self.grid)

    def dummy_dims_for(self, window):
        if self.cell_size is None:
            return self.so.logistic.dummy_grid
        return (max(1, round(window.width / self.cell_size)),
                max(1, round(window.height / self.cell_size)))


def _replicate_models(model, group):
    if group.covariates is None:
        return [model] * group.n_replicates
    return [model if c is None else model.with_covariate(c)
            for c in group.covariates]


def _check_group(models, group):
    tag = f" in group {group.label!r}" if group.label else ""
    for i, (mdl, x) in enumerate(zip(models, group.patterns)):
        if not mdl.feasible(x.coords):
            raise ConfigError(
                f"replicate {i}{tag} violates the model's hard core")


def _newton_pooled(models, patterns, schemes, theta0, cfg):
    """Newton-Raphson on the summed semi-optimal estimating function."""
    wss = [_Workspace(m, s, config_coords(x))
           for m, s, x in zip(models, schemes, patterns)]
    p = models[0].p
    theta = np.asarray(theta0, dtype=float).copy()
    tol = cfg.tol
    trace = []
    for it in range(cfg.max_iter):
        value = np.zeros(p)
        S = np.zeros((p, p))
        for mdl, x, sch, ws in zip(models, patterns, schemes, wss):
            v_i, S_i, _ = semi_optimal_ef(ModelInstance(mdl, theta), x, sch,
                                          workspace=ws)
            value += v_i
            S += S_i
        if not (np.isfinite(value).all() and np.isfinite(S).all()):
            raise _DivergenceError("estimating function is not finite")
        sup = float(np.abs(value).max())
        trace.append({"theta": theta.copy(), "sup": sup})
        if tol is None:
            tol = 1e-6 * (1.0 + sup)
        if sup <= tol:
            return theta, S, it, max(ws.bandwidth for ws in wss)
        try:
            step = np.linalg.solve(S, value)
        except np.linalg.LinAlgError:
            raise NumericalError(
                "pooled sensitivity matrix is singular") from None
        theta = theta + step
        if not np.isfinite(theta).all():
            raise _DivergenceError("Newton iterate is not finite")
    raise NonConvergenceError(
        f"pooled Newton did not converge in {cfg.max_iter} iterations",
        theta=theta, trace=trace)


def fit_pooled(model, group, method="so", cfg=None):
    """One theta for a replicate group, by pooled PL or pooled semi-optimal.

    The semi-optimal path starts Newton from the pooled PL estimate and
    keeps the single-pattern fallback policy (kernel clamp, then the PL
    estimate itself).
    """
    cfg = cfg if cfg is not None else PooledConfig()
    if method not in ("pl", "so"):
        raise ConfigError(f"unknown method {method!r}")
    models = _replicate_models(model, group)
    _check_group(models, group)
    grids = [cfg.dummy_dims_for(x.window) for x in group.patterns]
    pl = _fit_logistic(models, group.patterns, cfg.so.logistic, grids=grids)
    if method == "pl":
        return pl

    schemes = [cfg.scheme_for(x.window) for x in group.patterns]
    so_cfg = cfg.so
    attempts = [(models, None)]
    if so_cfg.fallback == "clamp-then-pl" and model.n_bands:
        if set(model.kernel_clamp) != set(model.interaction_coords):
            attempts.append(([m.with_kernel_clamp() for m in models],
                             "kernel-clamp"))
    for mdls, tag in attempts:
        try:
            theta, S, iters, band = _newton_pooled(mdls, group.patterns,
                                                   schemes, pl.theta_hat,
                                                   so_cfg)
        except (NotPositiveDefiniteError, _DivergenceError):
            continue
        report = SolverReport(positive_definite=True, fallback_used=tag,
                              cholesky_fill_in=band + 1, iterations=iters)
        return FitResult(theta_hat=theta, method="semi-optimal",
                         report=report, sensitivity=S)
    report = SolverReport(positive_definite=False, fallback_used="pl-estimate",
                          cholesky_fill_in=None,
                          iterations=pl.report.iterations)
    return FitResult(theta_hat=pl.theta_hat, method="pl", report=report,
                     sensitivity=pl.sensitivity, objective=pl.objective)


@dataclass
class SandwichVariance:
    """Between-replicate sandwich variance of a pooled estimate."""

    covariance: np.ndarray
    se: np.ndarray
    s_bar: np.ndarray
    v_bar: np.ndarray
    n_replicates: int


def sandwich_variance(model, group, fit, method="so", cfg=None):
    """Var(theta-hat) = Sbar^{-1} Vbar Sbar^{-T} / n over the replicates.

    Sbar averages the per-replicate empirical sensitivities at theta-hat and
    Vbar is the empirical covariance of the per-replicate estimating-function
    values there; needs at least two replicates.
    """
    cfg = cfg if cfg is not None else PooledConfig()
    if group.n_replicates < 2:
        raise ConfigError("sandwich variance needs at least two replicates")
    if method not in ("pl", "so"):
        raise ConfigError(f"unknown method {method!r}")
    models = _replicate_models(model, group)
    _check_group(models, group)
    if method == "so" and fit.report.fallback_used == "kernel-clamp":
        # theta-hat roots the clamped estimating function, so its variance
        # must be formed from the same function
        models = [m.with_kernel_clamp() for m in models]
    values, sens = [], []
    for mdl, x in zip(models, group.patterns):
        inst = ModelInstance(mdl, fit.theta_hat)
        scheme = cfg.scheme_for(x.window)
        if method == "pl":
            v, S = pl_estimating_function(inst, x, scheme)
        else:
            v, S, _ = semi_optimal_ef(inst, x, scheme)
        values.append(v)
        sens.append(S)
    s_bar = np.mean(sens, axis=0)
    v_bar = np.atleast_2d(np.cov(np.asarray(values), rowvar=False))
    try:
        half = np.linalg.solve(s_bar, v_bar)
        cov = np.linalg.solve(s_bar, half.T).T / group.n_replicates
    except np.linalg.LinAlgError:
        raise NumericalError("mean sensitivity matrix is singular") from None
    cov = (cov + cov.T) / 2.0
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    return SandwichVariance(covariance=cov, se=se, s_bar=s_bar, v_bar=v_bar,
                            n_replicates=group.n_replicates)


@dataclass
class TwoSampleResult:
    """Normal z-test of one coordinate between two fitted groups."""

    z: float
    p: float


def two_sample_test(fit_a, fit_b, coordinate):
    """z = (a - b) / sqrt(se_a^2 + se_b^2), two-sided normal p-value."""
    for f in (fit_a, fit_b):
        if f.stderr is None:
            raise ConfigError("fit carries no standard errors")
    k = int(coordinate)
    diff = float(fit_a.theta_hat[k] - fit_b.theta_hat[k])
    se2 = float(fit_a.stderr[k] ** 2 + fit_b.stderr[k] ** 2)
    z = 0.0 if diff == 0.0 else diff / np.sqrt(se2)
    return TwoSampleResult(z=float(z), p=float(2.0 * norm.sf(abs(z))))


def holm_adjust(pvalues):
    """Holm step-down adjusted p-values (family-wise error control)."""
    p = np.asarray(pvalues, dtype=float)
    if p.ndim != 1 or len(p) == 0:
        raise ConfigError("need a one-dimensional family of p-values")
    if (p < 0).any() or (p > 1).any():
        raise ConfigError("p-values must lie in [0, 1]")
    m = len(p)
    order = np.argsort(p, kind="stable")
    scaled = p[order] * (m - np.arange(m))
    adjusted = np.minimum(1.0, np.maximum.accumulate(scaled))
    out = np.empty(m)
    out[order] = adjusted
    return out


@dataclass
class FamilyTestResult:
    """Two-sample z-tests over a coordinate family with Holm adjustment."""

    coordinates: list
    z: np.ndarray
    p: np.ndarray
    p_adjusted: np.ndarray


def two_sample_family(fit_a, fit_b, coordinates=None):
    """Coordinate-wise two-sample tests with Holm-adjusted p-values."""
    if coordinates is None:
        coordinates = list(range(len(fit_a.theta_hat)))
    coordinates = [int(k) for k in coordinates]
    if not coordinates:
        raise ConfigError("empty coordinate family")
    tests = [two_sample_test(fit_a, fit_b, k) for k in coordinates]
    p = np.array([t.p for t in tests])
    return FamilyTestResult(coordinates=coordinates,
                            z=np.array([t.z for t in tests]), p=p,
                            p_adjusted=holm_adjust(p))
