"""Semi-optimal Takacs-Fiksel estimation.

The weight function phi solves, separately for each configuration y, the
Fredholm equation (I + T_y)phi = lambda1/lambda with kernel

    t(u, v, y; theta) = lambda(v, y; theta) * (1 - interaction ratio(u, v)),

zero beyond the interaction range.  On a quadrature grid the symmetrized
system {I + T~} Z = l is positive definite with T~_ij =
sqrt(w_i w_j) sqrt(lam_i lam_j) (1 - ratio_ij) and l_i = sqrt(w_i lam_i) t_i,
and node values are recovered as phi_i = Z_i / sqrt(w_i lam_i).  Because grid
nodes are ordered row-major, T~ is banded, and the solve uses a banded
Cholesky factorization; nodes with lam = 0 reduce to identity rows and get
phi = 0.

The estimating function sums phi(u, x\\u) over data points (one Fredholm
solve per removed point, plus one for y = x) minus the integral of phi*lambda
over the window; Newton-Raphson from the pseudolikelihood estimate uses the
empirical sensitivity S = sum_j w_j phi_j lambda1_j^T as the Jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded
from scipy.sparse import coo_matrix
from scipy.spatial.distance import cdist

from .errors import (ConfigError, NonConvergenceError, NotPositiveDefiniteError,
                     NumericalError)
from .geometry import as_points
from .models import ModelInstance, config_coords, leave_one_out_stats
from .pseudolikelihood import LogisticFitConfig, fit_logistic_pl
from .results import FitResult, SolverReport

_LOG_CAP = 690.0  # keep exp(log lambda) finite


class _DivergenceError(NumericalError):
    """Newton iterate left the region where intensities are representable."""


@dataclass(frozen=True)
class SemiOptimalConfig:
    max_iter: int = 25
    tol: Optional[float] = None  # None: 1e-6 * (1 + sup-norm at the start
    fallback: str = "clamp-then-pl"  # or "pl"
    logistic: LogisticFitConfig = field(default_factory=LogisticFitConfig)

    def __post_init__(self):
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if self.tol is not None and self.tol <= 0:
            raise ConfigError("tol must be > 0")
        if self.fallback not in ("pl", "clamp-then-pl"):
            raise ConfigError('fallback must be "pl" or "clamp-then-pl"')


@dataclass
class SemiOptimalSolution:
    """Fredholm solution for one configuration: phi-hat at the grid nodes."""

    config: object
    theta: np.ndarray
    scheme: object
    node_values: np.ndarray  # (m, p), rows phi(u_j, config; theta)
    node_lambda: np.ndarray  # (m,)   lambda(u_j, config; theta)
    node_stats: np.ndarray  # (m, p)  t(u_j, config)

    def __post_init__(self):
        if not np.isfinite(self.node_values).all():
            raise NumericalError("non-finite node values in Fredholm solution")


class _Workspace:
    """Geometry and per-pattern tables shared by every Fredholm solve of one
    (model, scheme, pattern) triple.

    Pair interactions are classified once per banded diagonal offset into a
    small integer code: band index 0..nb-1, nb for hard-core-blocked pairs,
    and -1 for pairs in no band (which indexes the trailing zero of the
    per-theta kernel table, so they drop out).  Leave-one-out configurations
    reuse the node-to-data classification columns.
    """

    def __init__(self, model, scheme, x_coords):
        self.model = model
        self.scheme = scheme
        nodes = scheme.nodes
        m = scheme.m
        nb = model.n_bands
        nx, _ = scheme.grid_dims
        sx, sy = scheme.cell
        R = model.range
        if R > 0.0 and m > 1:
            b = int(np.ceil(R / sy)) * nx + int(np.ceil(R / sx))
            b = min(b, m - 1)
        else:
            b = 0
        self.bandwidth = b

        X, Y = nodes[:, 0], nodes[:, 1]
        self.offsets = []
        for k in range(b + 1):
            if k == 0:
                d2 = np.zeros(m)
            else:
                d2 = (X[k:] - X[:m - k]) ** 2 + (Y[k:] - Y[:m - k]) ** 2
            code = model.band_membership(d2)
            code[model.blocked_by(d2)] = nb
            if k == 0 or (code >= 0).any():
                self.offsets.append((k, code))

        self.x = np.asarray(x_coords, dtype=float).reshape(-1, 2)
        self.n = len(self.x)
        self.node_trend = model.trend(nodes)
        if self.n:
            nd2 = cdist(nodes, self.x, "sqeuclidean")
            self.nd_band = model.band_membership(nd2)  # for statistics
            nd_blocked = model.blocked_by(nd2)
            self.nd_code = self.nd_band.copy()  # for kernel values
            self.nd_code[nd_blocked] = nb
            self.nd_blocked = nd_blocked
            self.blocked_count = nd_blocked.sum(axis=1)
        else:
            self.nd_band = np.zeros((m, 0), dtype=np.int8)
            self.nd_code = self.nd_band
            self.nd_blocked = np.zeros((m, 0), dtype=bool)
            self.blocked_count = np.zeros(m, dtype=np.int64)
        counts = np.zeros((m, nb))
        for band in range(nb):
            counts[:, band] = (self.nd_band == band).sum(axis=1)
        self.counts = counts

    def kernel_table(self, theta):
        """Per-code values of 1 - ratio: bands, then blocked (=1), then 0."""
        nb = self.model.n_bands
        table = np.empty(nb + 2)
        table[:nb] = 1.0 - self.model.ratio_table(theta)[:nb]
        table[nb] = 1.0
        table[nb + 1] = 0.0
        return table

    def node_state(self, theta, drop=None):
        """lambda(u_j, y) and t(u_j, y) for y = x, or x minus point `drop`."""
        counts, blocked = self.counts, self.blocked_count
        if drop is not None:
            col = self.nd_band[:, drop]
            sel = col >= 0
            if sel.any():
                counts = counts.copy()
                counts[np.nonzero(sel)[0], col[sel]] -= 1.0
            blocked = blocked - self.nd_blocked[:, drop]
        stats = np.hstack([self.node_trend, counts])
        loglam = stats @ theta
        if loglam.max(initial=-np.inf) > _LOG_CAP:
            raise _DivergenceError("conditional intensity overflow at nodes")
        lam = np.exp(loglam)
        lam[blocked > 0] = 0.0
        return lam, stats

    def solve(self, theta, table, drop=None, state=None):
        """One Fredholm solve; returns (node phi, node lambda, node stats).

        `state` overrides the (lambda, stats) pair computed from the stored
        configuration, for callers that perturb it (for example by adding a
        point at a node).
        """
        lam, stats = state if state is not None else self.node_state(theta, drop)
        w = self.scheme.weights
        s = np.sqrt(w * lam)
        m = len(s)
        ab = np.zeros((self.bandwidth + 1, m))
        for k, code in self.offsets:
            ab[k, :m - k] = table[code] * s[k:] * s[:m - k]
        ab[0] += 1.0
        try:
            cb = cholesky_banded(ab, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            raise NotPositiveDefiniteError(
                "I + T~ is not positive definite") from None
        ell = s[:, None] * stats
        Z = cho_solve_banded((cb, True), ell, check_finite=False)
        phi0 = np.divide(Z, s[:, None], out=np.zeros_like(Z),
                         where=s[:, None] > 0.0)
        # one pass through the interpolation identity phi = t - K phi makes
        # the node values exact for zero kernels and machine-consistent with
        # the extension formula used between nodes
        phi = stats - self._kernel_matvec(lam, table, phi0)
        phi[lam == 0.0] = 0.0
        return phi, lam, stats

    def _kernel_matvec(self, lam, table, g):
        """(K g)_i = sum_j w_j lam_j (1-ratio_ij) g_j over banded pairs."""
        m = len(lam)
        scaled = (self.scheme.weights * lam)[:, None] * g
        out = np.zeros_like(g)
        for k, code in self.offsets:
            c = table[code][:, None]
            if k == 0:
                out += c * scaled
            else:
                out[:m - k] += c * scaled[k:]
                out[k:] += c * scaled[:m - k]
        return out

    def extend_at_data(self, k, table, phi, lam, t_loo_k):
        """Nystrom extension of a leave-one-out solution at the removed point."""
        c = table[self.nd_code[:, k]]
        return t_loo_k - (self.scheme.weights * lam * c) @ phi


def build_kernel_matrix(inst, y, scheme):
    """Symmetrized Nystrom kernel matrix T~ as a sparse CSR matrix.

    Entry (i, j) is sqrt(w_i w_j) sqrt(lam_i lam_j) (1 - ratio_ij), zero
    beyond the interaction range and at nodes where lambda vanishes; exactly
    symmetric because each unordered pair is computed once.
    """
    ws = _Workspace(inst.model, scheme, config_coords(y))
    lam, _ = ws.node_state(inst.theta)
    table = ws.kernel_table(inst.theta)
    s = np.sqrt(scheme.weights * lam)
    m = scheme.m
    rows, cols, vals = [], [], []
    for k, code in ws.offsets:
        v = table[code] * s[k:] * s[:m - k]
        nz = np.nonzero(v)[0]
        if len(nz) == 0:
            continue
        rows.append(nz)
        cols.append(nz + k)
        vals.append(v[nz])
        if k:
            rows.append(nz + k)
            cols.append(nz)
            vals.append(v[nz])
    if rows:
        rows, cols, vals = map(np.concatenate, (rows, cols, vals))
    return coo_matrix((vals, (rows, cols)), shape=(m, m)).tocsr()


def solve_semi_optimal(inst, y, scheme):
    """Solve the Fredholm equation for one configuration y.

    Raises NotPositiveDefiniteError when the banded Cholesky factorization of
    I + T~ fails (the caller's fallback policy decides what happens next).
    """
    ws = _Workspace(inst.model, scheme, config_coords(y))
    table = ws.kernel_table(inst.theta)
    phi, lam, stats = ws.solve(inst.theta, table)
    return SemiOptimalSolution(config=y, theta=inst.theta.copy(), scheme=scheme,
                               node_values=phi, node_lambda=lam,
                               node_stats=stats)


def nystrom_extend(sol, inst, u):
    """phi(u, y; theta) off the grid, by the Nystrom interpolation formula.

    phi(u) = t(u, y) - sum_j w_j lam(u_j, y) (1 - ratio(u, u_j)) phi(u_j, y),
    the sum running over nodes within the interaction range of u; returns the
    zero vector when lambda(u, y) = 0.
    """
    model = inst.model
    y = config_coords(sol.config)
    pt = as_points(u)[0]
    t_u = model.stats(pt[None, :], y)[0]
    if model.is_blocked(pt[None, :], y)[0]:
        return np.zeros(model.p)
    d2 = ((sol.scheme.nodes - pt) ** 2).sum(axis=1)
    code = model.band_membership(d2)
    code[model.blocked_by(d2)] = model.n_bands
    nb = model.n_bands
    table = np.empty(nb + 2)
    table[:nb] = 1.0 - model.ratio_table(inst.theta)[:nb]
    table[nb] = 1.0
    table[nb + 1] = 0.0
    c = table[code]
    return t_u - (sol.scheme.weights * sol.node_lambda * c) @ sol.node_values


def semi_optimal_ef(inst, x, scheme, workspace=None):
    """Semi-optimal estimating function at theta, with empirical sensitivity.

    value = sum_{u in x} phi(u, x\\u; theta) - sum_j w_j phi(u_j, x) lam(u_j, x)
    S     = sum_j w_j phi(u_j, x) lambda1(u_j, x)^T

    One Fredholm solve for y = x plus one per data point; any factorization
    failure propagates as NotPositiveDefiniteError.
    """
    model = inst.model
    coords = config_coords(x)
    if not model.feasible(coords):
        raise ConfigError("pattern violates the model's hard core")
    ws = workspace if workspace is not None else _Workspace(model, scheme, coords)
    table = ws.kernel_table(inst.theta)
    phi_x, lam_x, stats_x = ws.solve(inst.theta, table)
    wl = scheme.weights * lam_x
    integral = wl @ phi_x
    sensitivity = (phi_x * wl[:, None]).T @ stats_x
    t_loo, _ = leave_one_out_stats(model, x)
    data_term = np.zeros(model.p)
    for k in range(ws.n):
        phi_k, lam_k, _ = ws.solve(inst.theta, table, drop=k)
        data_term += ws.extend_at_data(k, table, phi_k, lam_k, t_loo[k])
    report = SolverReport(positive_definite=True, fallback_used=None,
                          cholesky_fill_in=ws.bandwidth + 1, iterations=0)
    return data_term - integral, sensitivity, report


def _newton_semi_optimal(model, x, scheme, theta0, cfg):
    """Newton-Raphson on the semi-optimal estimating function."""
    ws = _Workspace(model, scheme, config_coords(x))
    theta = np.asarray(theta0, dtype=float).copy()
    tol = cfg.tol
    trace = []
    for it in range(cfg.max_iter):
        inst = ModelInstance(model, theta)
        value, S, _ = semi_optimal_ef(inst, x, scheme, workspace=ws)
        if not (np.isfinite(value).all() and np.isfinite(S).all()):
            raise _DivergenceError("estimating function is not finite")
        sup = float(np.abs(value).max())
        trace.append({"theta": theta.copy(), "sup": sup})
        if tol is None:
            tol = 1e-6 * (1.0 + sup)
        if sup <= tol:
            return theta, S, it, ws.bandwidth
        try:
            step = np.linalg.solve(S, value)
        except np.linalg.LinAlgError:
            raise NumericalError(
                "empirical sensitivity matrix is singular") from None
        theta = theta + step
        if not np.isfinite(theta).all():
            raise _DivergenceError("Newton iterate is not finite")
    raise NonConvergenceError(
        f"semi-optimal Newton did not converge in {cfg.max_iter} iterations",
        theta=theta, trace=trace)


def fit_semi_optimal(model, x, scheme, cfg=None):
    """Semi-optimal fit: Newton from the PL estimate, with fallbacks.

    On any numerical failure of the Newton stage (non-positive-definite
    factorization, diverging or non-converging iterates, singular
    sensitivity), the "clamp-then-pl" policy retries with the kernel clamp
    enabled on all interaction coordinates and finally returns the PL
    estimate; "pl" skips the clamp stage.  The report records which estimator
    produced theta_hat.
    """
    cfg = cfg if cfg is not None else SemiOptimalConfig()
    pl = fit_logistic_pl(model, x, cfg.logistic)

    attempts = [(model, None)]
    if cfg.fallback == "clamp-then-pl" and model.n_bands:
        if set(model.kernel_clamp) != set(model.interaction_coords):
            attempts.append((model.with_kernel_clamp(), "kernel-clamp"))
    for mdl, tag in attempts:
        try:
            theta, S, iters, band = _newton_semi_optimal(mdl, x, scheme,
                                                         pl.theta_hat, cfg)
        except NumericalError:
            continue
        report = SolverReport(positive_definite=True, fallback_used=tag,
                              cholesky_fill_in=band + 1, iterations=iters)
        return FitResult(theta_hat=theta, method="semi-optimal", report=report,
                         sensitivity=S)
    report = SolverReport(positive_definite=False, fallback_used="pl-estimate",
                          cholesky_fill_in=None,
                          iterations=pl.report.iterations)
    return FitResult(theta_hat=pl.theta_hat, method="pl", report=report,
                     sensitivity=pl.sensitivity, objective=pl.objective)
