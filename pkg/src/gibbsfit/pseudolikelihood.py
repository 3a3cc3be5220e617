"""Logistic pseudolikelihood estimation and the grid-quadrature pseudo-score.

The pseudolikelihood root is approximated by maximizing the logistic
composite likelihood

    sum_{u in x} log[ lam(u, x\\u) / (lam(u, x\\u) + rho) ]
      + sum_{d in dummy} log[ rho / (lam(d, x) + rho) ]

over theta, where the dummy points form a stratified binomial process of
intensity rho.  Hard-core-blocked dummy points have lam = 0 and contribute
log(rho/rho) = 0, so they are dropped from the design exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ConfigError, NonConvergenceError, NumericalError, SeparationError
from .models import ModelInstance, conditional_intensity, leave_one_out_stats
from .quadrature import make_grid, make_stratified_dummy
from .results import FitResult, SolverReport


@dataclass(frozen=True)
class LogisticFitConfig:
    dummy_grid: tuple = (50, 50)
    max_iter: int = 50
    grad_tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.grad_tol <= 0:
            raise ConfigError("grad_tol must be > 0")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")


def _pooled_design(models, patterns, cfg, grids=None):
    """Stack logistic rows for one or more patterns.

    models and patterns run in parallel (replicates may carry their own
    covariate); grids optionally gives per-replicate dummy-grid dimensions.
    Returns (T, y, log_rho, total_area) where each data point contributes a
    row with t(u, x\\u) and response 1, and each unblocked dummy point a row
    with t(d, x) and response 0 at its pattern's dummy intensity.
    """
    if grids is None:
        grids = [cfg.dummy_grid] * len(patterns)
    rows, resp, logr = [], [], []
    total_area = 0.0
    for i, (model, x) in enumerate(zip(models, patterns)):
        if not model.feasible(x.coords):
            raise ConfigError("pattern violates the model's hard core")
        total_area += x.window.area
        t_data, _ = leave_one_out_stats(model, x)
        nx, ny = grids[i]
        dummy = make_stratified_dummy(x.window, nx, ny, seed=(cfg.seed, i))
        keep = ~model.is_blocked(dummy.points, x.coords)
        t_dummy = model.stats(dummy.points[keep], x.coords)
        rows.append(t_data)
        rows.append(t_dummy)
        resp.append(np.ones(len(t_data)))
        resp.append(np.zeros(len(t_dummy)))
        logr.append(np.full(len(t_data) + len(t_dummy), np.log(dummy.rho)))
    T = np.vstack(rows)
    return T, np.concatenate(resp), np.concatenate(logr), total_area


def _check_separation(model, T, y):
    """Zero observed total of an interaction statistic makes that coordinate
    diverge to -inf, so the maximizer does not exist."""
    data = T[y == 1.0]
    for k in model.interaction_coords:
        if data[:, k].sum() == 0.0:
            raise SeparationError(
                "estimate does not exist: interaction statistic "
                f"{k} is zero over all data points")


def _logistic_ll(T, y, log_rho, theta):
    a = T @ theta
    return float(np.sum(y * a + (1.0 - y) * log_rho - np.logaddexp(a, log_rho)))


def _newton_logistic(T, y, log_rho, theta0, cfg):
    """Maximize the concave logistic objective; returns (theta, iterations)."""
    theta = np.asarray(theta0, dtype=float).copy()
    ll = _logistic_ll(T, y, log_rho, theta)
    for it in range(cfg.max_iter):
        P = expit(T @ theta - log_rho)
        grad = T.T @ (y - P)
        if np.abs(grad).max() <= cfg.grad_tol:
            return theta, it
        W = P * (1.0 - P)
        H = T.T @ (T * W[:, None])
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            raise NumericalError("singular Hessian in logistic fit") from None
        # near the optimum the true ascent is below float resolution of the
        # objective, so accept any step that does not decrease it materially
        slack = 1e-9 * (1.0 + abs(ll))
        scale = 1.0
        for _ in range(30):
            cand = theta + scale * step
            ll_new = _logistic_ll(T, y, log_rho, cand)
            if ll_new >= ll - slack:
                break
            scale *= 0.5
        else:
            raise NonConvergenceError(
                "logistic step-halving failed to improve the objective",
                theta=theta)
        theta, ll = cand, ll_new
    P = expit(T @ theta - log_rho)
    grad = T.T @ (y - P)
    if np.abs(grad).max() <= cfg.grad_tol:
        return theta, cfg.max_iter
    raise NonConvergenceError(
        f"logistic fit did not converge in {cfg.max_iter} iterations",
        theta=theta, trace={"grad_sup": float(np.abs(grad).max()), "ll": ll})


def _fit_logistic(models, patterns, cfg, grids=None):
    T, y, log_rho, total_area = _pooled_design(models, patterns, cfg, grids)
    n_data = int(y.sum())
    if n_data == 0:
        raise ConfigError("no data points: the intercept diverges")
    _check_separation(models[0], T, y)
    theta0 = np.zeros(models[0].p)
    theta0[0] = np.log(n_data / total_area)
    theta, iters = _newton_logistic(T, y, log_rho, theta0, cfg)

    if grids is None:
        grids = [cfg.dummy_grid] * len(patterns)
    S = np.zeros((models[0].p, models[0].p))
    for model, x, (nx, ny) in zip(models, patterns, grids):
        inst = ModelInstance(model, theta)
        _, S_i = pl_estimating_function(inst, x, make_grid(x.window, nx, ny))
        S += S_i
    report = SolverReport(positive_definite=True, fallback_used=None,
                          cholesky_fill_in=None, iterations=iters)
    return FitResult(theta_hat=theta, method="pl", report=report,
                     sensitivity=S,
                     objective=_logistic_ll(T, y, log_rho, theta))


def fit_logistic_pl(model, x, cfg=None):
    """Maximum logistic-regression pseudolikelihood estimate for one pattern."""
    cfg = cfg if cfg is not None else LogisticFitConfig()
    if x.n == 0:
        raise ConfigError("cannot fit an empty pattern")
    return _fit_logistic([model], [x], cfg)


def fit_logistic_pl_pooled(model, patterns, cfg=None):
    """One theta maximizing the summed logistic objective over replicates.

    Each replicate gets its own stratified dummy process on its own window;
    empty replicates are allowed as long as the group has at least one point.
    """
    cfg = cfg if cfg is not None else LogisticFitConfig()
    patterns = list(patterns)
    if not patterns:
        raise ConfigError("need at least one pattern")
    return _fit_logistic([model] * len(patterns), patterns, cfg)


def pl_estimating_function(inst, x, scheme):
    """Value and sensitivity of the pseudolikelihood estimating function.

    value = sum_{u in x} t(u, x\\u) - sum_j w_j t(u_j, x) lam(u_j, x);
    S     = sum_j w_j t(u_j, x) t(u_j, x)^T lam(u_j, x).

    Data points or nodes with lam = 0 contribute zero.
    """
    model = inst.model
    t_data, blocked = leave_one_out_stats(model, x)
    data_term = t_data[~blocked].sum(axis=0) if len(t_data) else np.zeros(model.p)
    t_nodes = model.stats(scheme.nodes, x.coords)
    lam = conditional_intensity(inst, scheme.nodes, x.coords)
    wl = scheme.weights * lam
    value = data_term - wl @ t_nodes
    S = t_nodes.T @ (t_nodes * wl[:, None])
    return value, S


def pseudo_score(inst, x, scheme):
    """Pseudolikelihood estimating function (score of the log pseudolikelihood)."""
    return pl_estimating_function(inst, x, scheme)[0]


@dataclass
class ProfileResult:
    """Trace of a profile-pseudolikelihood search over irregular parameters."""

    candidates: list
    objectives: np.ndarray
    best: object
    best_fit: FitResult


def profile_pseudolikelihood(model_for, candidates, patterns, cfg=None):
    """Fit each candidate irregular parameter by logistic PL and keep the best.

    model_for maps a candidate (e.g. an interaction range) to a model;
    patterns is one pattern or a list of replicates (fitted pooled).  The
    candidate maximizing the summed logistic objective wins; exact ties go to
    the smallest candidate.  Candidates whose fit fails are excluded; if all
    fail, the error from the last candidate is raised.
    """
    cfg = cfg if cfg is not None else LogisticFitConfig()
    candidates = list(candidates)
    if not candidates:
        raise ConfigError("empty candidate grid")
    if not isinstance(patterns, (list, tuple)):
        patterns = [patterns]
    objectives = np.full(len(candidates), np.nan)
    fits = [None] * len(candidates)
    last_err = None
    for i, c in enumerate(candidates):
        try:
            model = model_for(c)
            fits[i] = _fit_logistic([model] * len(patterns), list(patterns), cfg)
            objectives[i] = fits[i].objective
        except (ConfigError, NumericalError) as e:
            last_err = e
    if np.isnan(objectives).all():
        raise NumericalError(
            f"profile failed for every candidate (last error: {last_err})")
    top = np.nanmax(objectives)
    best = min(c for c, o in zip(candidates, objectives) if o == top)
    return ProfileResult(candidates=candidates, objectives=objectives,
                         best=best, best_fit=fits[candidates.index(best)])
