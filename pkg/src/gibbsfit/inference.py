"""Sensitivity/covariance estimation for estimating functions.

Three estimators of the (S, Sigma) pair behind the Godambe information
G = S^T Sigma^{-1} S:

* monte_carlo_s_and_sigma - average empirical sensitivity and empirical
  covariance of estimating-function values over simulated patterns;
* plug_in_covariance - the discretized covariance formula
  Sigma = S + int int D_u phi(v, x) D_v phi(u, x)^T lam({u,v}, x) du dv
  evaluated on the quadrature grid with one extra Fredholm solve per node;
* bootstrap_se - parametric-bootstrap standard errors from refitting
  simulations at theta-hat.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import chi2

from .errors import ConfigError, GibbsfitError, NumericalError
from .models import ModelInstance, config_coords
from .semioptimal import _LOG_CAP, _Workspace
from .simulate import SamplerConfig, sample_many


@dataclass
class GodambeReport:
    """S-vs-Sigma diagnostic for an estimating function."""

    S: np.ndarray
    sigma: np.ndarray
    godambe: Optional[np.ndarray]
    inverse_godambe: Optional[np.ndarray]
    rel_dev: np.ndarray  # entries (S_ij - Sigma_ij) / Sigma_ij
    frobenius_rel_dev: float
    n_sim: int


def monte_carlo_s_and_sigma(inst, estimating_fn, sims):
    """Monte Carlo S (mean sensitivity) and Sigma (covariance of values).

    estimating_fn maps a pattern to a (value, sensitivity) pair at the fixed
    theta of inst; sims is a list of at least two patterns.
    """
    if len(sims) < 2:
        raise ConfigError("need at least two simulated patterns")
    values, sens = [], []
    for x in sims:
        v, S = estimating_fn(x)[:2]
        values.append(np.asarray(v, dtype=float))
        sens.append(np.asarray(S, dtype=float))
    values = np.asarray(values)
    S = np.mean(sens, axis=0)
    sigma = np.atleast_2d(np.cov(values, rowvar=False))
    if (np.diag(sigma) == 0.0).any():
        raise NumericalError(
            "degenerate estimating-function covariance (zero variance)")
    with np.errstate(divide="ignore", invalid="ignore"):
        rel_dev = (S - sigma) / sigma
    frob = float(np.sqrt((rel_dev ** 2).sum()))
    try:
        godambe = S.T @ np.linalg.solve(sigma, S)
        godambe = (godambe + godambe.T) / 2.0
        inverse = np.linalg.inv(godambe)
    except np.linalg.LinAlgError:
        godambe, inverse = None, None
    return GodambeReport(S=S, sigma=sigma, godambe=godambe,
                         inverse_godambe=inverse, rel_dev=rel_dev,
                         frobenius_rel_dev=frob, n_sim=len(sims))


def plug_in_covariance(inst, x, scheme):
    """Plug-in covariance of the semi-optimal estimating function.

    Sigma-hat = sym(S-hat) + sum over node pairs within the interaction range
    of w_i w_j D_i phi(u_j) D_j phi(u_i)^T lam(u_i, x) lam(u_j, x+u_i), where
    D_i phi(v) = phi(v, x+u_i) - phi(v, x) takes one extra Fredholm solve per
    node with lam(u_i, x) > 0.
    """
    model = inst.model
    theta = inst.theta
    coords = config_coords(x)
    if not model.feasible(coords):
        raise ConfigError("pattern violates the model's hard core")
    ws = _Workspace(model, scheme, coords)
    table = ws.kernel_table(theta)
    phi_x, lam_x, stats_x = ws.solve(theta, table)
    w = scheme.weights
    wl = w * lam_x
    S = (phi_x * wl[:, None]).T @ stats_x
    S = (S + S.T) / 2.0

    m = scheme.m
    nodes = scheme.nodes
    b = ws.bandwidth
    p = model.p
    # per-node add-one-point solves, keeping only the rows within the
    # truncation radius (= interaction range) of the added node
    local = [None] * m
    for i in range(m):
        if lam_x[i] == 0.0:
            continue
        lo, hi = max(0, i - b), min(m, i + b + 1)
        d2 = ((nodes[lo:hi] - nodes[i]) ** 2).sum(axis=1)
        band = model.band_membership(d2)
        blocked = model.blocked_by(d2)
        counts = ws.counts.copy()
        sel = band >= 0
        if sel.any():
            counts[np.arange(lo, hi)[sel], band[sel]] += 1.0
        blocked_count = ws.blocked_count.copy()
        blocked_count[lo:hi] += blocked
        stats_i = np.hstack([ws.node_trend, counts])
        loglam = stats_i @ theta
        if loglam.max(initial=-np.inf) > _LOG_CAP:
            raise NumericalError("conditional intensity overflow")
        lam_i = np.exp(loglam)
        lam_i[blocked_count > 0] = 0.0
        phi_i, _, _ = ws.solve(theta, table, state=(lam_i, stats_i))
        local[i] = (lo, hi, phi_i[lo:hi] - phi_x[lo:hi], lam_i[lo:hi], d2)

    M = np.zeros((p, p))
    r2 = model.range ** 2
    for i in range(m):
        if local[i] is None:
            continue
        lo, hi, delta_i, lam_add_i, d2 = local[i]
        for j in range(i, hi):
            if d2[j - lo] >= r2 and j != i:
                continue
            if local[j] is None:
                continue
            lam2 = lam_x[i] * lam_add_i[j - lo]
            if lam2 == 0.0:
                continue
            if j == i:
                di = delta_i[i - lo]
                M += (w[i] * w[i] * lam2) * np.outer(di, di)
            else:
                lo_j = local[j][0]
                B = (w[i] * w[j] * lam2) * np.outer(delta_i[j - lo],
                                                    local[j][2][i - lo_j])
                M += B + B.T
    return S + M


@dataclass
class EllipseParams:
    """Axis-aligned description of a 2D confidence ellipse."""

    center: np.ndarray
    semi_axes: np.ndarray  # descending
    angle: float  # radians, orientation of the major axis
    area: float
    level: float


def confidence_ellipse(cov, center=(0.0, 0.0), coords=(0, 1), level=0.95):
    """Confidence ellipse for one coordinate pair of a covariance matrix.

    Semi-axes are sqrt(q * eigenvalue) with q the chi-square(2) quantile;
    the area is pi * q * sqrt(det C).
    """
    cov = np.asarray(cov, dtype=float)
    i, j = coords
    sub = cov[np.ix_([i, j], [i, j])]
    vals, vecs = np.linalg.eigh(sub)
    if vals.min() < 0:
        raise NumericalError("covariance block is not positive semidefinite")
    q = chi2.ppf(level, df=2)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    angle = float(np.arctan2(vecs[1, 0], vecs[0, 0]))
    return EllipseParams(center=np.asarray(center, dtype=float)[[0, 1]],
                         semi_axes=np.sqrt(q * vals), angle=angle,
                         area=float(np.pi * q * np.sqrt(max(vals.prod(), 0.0))),
                         level=level)


@dataclass
class BootstrapResult:
    """Parametric-bootstrap spread of an estimator around theta-hat."""

    se: np.ndarray
    covariance: np.ndarray
    n_used: int
    n_failed: int
    estimates: np.ndarray  # (n_used, p)

    def ellipse(self, theta_hat, coords=(0, 1), level=0.95):
        return confidence_ellipse(self.covariance, center=np.asarray(
            theta_hat, dtype=float)[list(coords)], coords=coords, level=level)


def bootstrap_se(model, theta_hat, window, fit_fn, n_sim, seed=0, sampler=None):
    """Parametric bootstrap: simulate at theta_hat, refit, report the spread.

    fit_fn maps a pattern to a parameter vector; refits that raise a model or
    numerical error are dropped and counted.  More than 50% failures (or
    fewer than two successes) is an error.
    """
    if n_sim < 2:
        raise ConfigError("n_sim must be >= 2")
    cfg = sampler if sampler is not None else SamplerConfig(seed=seed)
    inst = ModelInstance(model, theta_hat)
    sims = sample_many(inst, window, cfg, n_sim)
    estimates = []
    n_failed = 0
    for pat in sims:
        try:
            estimates.append(np.asarray(fit_fn(pat), dtype=float))
        except GibbsfitError:
            n_failed += 1
    if n_failed > 0.5 * n_sim or len(estimates) < 2:
        raise NumericalError(
            f"bootstrap failed: {n_failed}/{n_sim} refits unusable")
    estimates = np.asarray(estimates)
    cov = np.atleast_2d(np.cov(estimates, rowvar=False))
    return BootstrapResult(se=np.sqrt(np.diag(cov)), covariance=cov,
                           n_used=len(estimates), n_failed=n_failed,
                           estimates=estimates)
