"""Exponential-family pairwise Gibbs models and their conditional intensities."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigError
from .geometry import PointPattern, as_points


def config_coords(y):
    """Coordinates of a configuration given as PointPattern or array."""
    if isinstance(y, PointPattern):
        return y.coords
    return as_points(y)


class PairwiseModel:
    """Gibbs model with log lambda(u, y; theta) = theta . t(u, y).

    The sufficient statistic t(u, y) stacks a constant 1, an optional
    covariate value c(u) * covariate_scale, and for each distance band
    [lo, hi) the number of points of y at distance lo <= |u - v| < hi.
    A hard-core distance delta, when set, makes the conditional intensity
    exactly 0 whenever some point of y lies at distance <= delta from u.

    kernel_clamp lists parameter coordinates whose value is replaced by
    min(theta_k, 0) inside the pairwise interaction ratio used by the
    operator kernel -- and only there; the intensity and its gradient are
    never clamped.  Fitting code may enable the clamp to keep the symmetrized
    Fredholm operator positive definite under attractive interaction.

    The covariate is any callable mapping an (n, 2) coordinate array to n
    values; a CovariateField raster qualifies.
    """

    def __init__(self, bands=(), delta=None, covariate=None,
                 covariate_scale=1.0, kernel_clamp=(), name="pairwise"):
        bands = tuple((float(lo), float(hi)) for lo, hi in bands)
        for lo, hi in bands:
            if not (0.0 <= lo < hi and np.isfinite(hi)):
                raise ConfigError(f"invalid interaction band [{lo}, {hi})")
        ordered = sorted(bands)
        for (_, hi_a), (lo_b, _) in zip(ordered, ordered[1:]):
            if lo_b < hi_a:
                raise ConfigError("interaction bands must not overlap")
        self.bands = bands
        self.delta = None if delta is None else float(delta)
        if self.delta is not None and self.delta < 0:
            raise ConfigError("hard-core distance must be nonnegative")
        self.covariate = covariate
        self.covariate_scale = float(covariate_scale)
        self.name = name
        self.n_trend = 1 + (covariate is not None)
        self.p = self.n_trend + len(bands)
        self.range = max((hi for _, hi in bands), default=0.0)
        kernel_clamp = tuple(sorted(int(k) for k in kernel_clamp))
        if any(k < self.n_trend or k >= self.p for k in kernel_clamp):
            raise ConfigError("kernel_clamp indices must name interaction coordinates")
        self.kernel_clamp = kernel_clamp
        self._lo2 = np.array([lo * lo for lo, _ in bands])
        self._hi2 = np.array([hi * hi for _, hi in bands])
        self._delta2 = -np.inf if self.delta is None else self.delta ** 2

    # ---- structure ---------------------------------------------------------

    @property
    def n_bands(self):
        return len(self.bands)

    @property
    def interaction_coords(self):
        return tuple(range(self.n_trend, self.p))

    def with_kernel_clamp(self, coords=None):
        """Copy of the model with the kernel clamp enabled for the given
        coordinates (default: all interaction coordinates)."""
        clamp = tuple(coords) if coords is not None else self.interaction_coords
        return PairwiseModel(self.bands, self.delta, self.covariate,
                             self.covariate_scale, clamp, self.name)

    def with_covariate(self, covariate, scale=None):
        """Copy of the model with its covariate replaced (same theta layout).

        The model must already have a covariate so that p is unchanged;
        replicated windows each carry their own field this way.
        """
        if self.covariate is None:
            raise ConfigError("model has no covariate coordinate to rebind")
        if covariate is None:
            raise ConfigError("replacement covariate must not be None")
        return PairwiseModel(self.bands, self.delta, covariate,
                             self.covariate_scale if scale is None else scale,
                             self.kernel_clamp, self.name)

    # ---- sufficient statistics ---------------------------------------------

    def trend(self, points):
        """Trend columns of t(u, .): shape (k, n_trend)."""
        pts = as_points(points)
        if self.covariate is None:
            return np.ones((len(pts), 1))
        vals = np.asarray(self.covariate(pts), dtype=float) * self.covariate_scale
        return np.column_stack([np.ones(len(pts)), vals])

    def band_membership(self, sqdist):
        """Band number of each squared distance, -1 when in no band."""
        d2 = np.asarray(sqdist)
        out = np.full(d2.shape, -1, dtype=np.int8)
        for b in range(self.n_bands):
            out[(d2 >= self._lo2[b]) & (d2 < self._hi2[b])] = b
        return out

    def blocked_by(self, sqdist):
        """Hard-core indicator per squared distance (d <= delta)."""
        return np.asarray(sqdist) <= self._delta2

    def stats(self, points, y, d2=None):
        """Sufficient statistics t(u, y) for each row u of points: (k, p)."""
        pts = as_points(points)
        t = self.trend(pts)
        if self.n_bands == 0:
            return t
        cc = config_coords(y)
        if len(cc) == 0:
            return np.column_stack([t, np.zeros((len(pts), self.n_bands))])
        if d2 is None:
            d2 = cdist(pts, cc, "sqeuclidean")
        bidx = self.band_membership(d2)
        counts = np.column_stack([(bidx == b).sum(axis=1) for b in range(self.n_bands)])
        return np.column_stack([t, counts.astype(float)])

    def is_blocked(self, points, y, d2=None):
        """Hard-core indicator H(u, y) == 0 for each row u of points."""
        pts = as_points(points)
        if self.delta is None:
            return np.zeros(len(pts), dtype=bool)
        cc = config_coords(y)
        if len(cc) == 0:
            return np.zeros(len(pts), dtype=bool)
        if d2 is None:
            d2 = cdist(pts, cc, "sqeuclidean")
        return self.blocked_by(d2).any(axis=1)

    def feasible(self, y):
        """H(y) > 0: no pair of y within the hard-core distance."""
        if self.delta is None:
            return True
        cc = config_coords(y)
        if len(cc) < 2:
            return True
        d2 = cdist(cc, cc, "sqeuclidean")
        np.fill_diagonal(d2, np.inf)
        return not self.blocked_by(d2).any()

    # ---- pairwise interaction ratio ------------------------------------------

    def ratio_table(self, theta, clamp=None):
        """Per-band values of the interaction ratio exp(theta_b), with a
        trailing sentinel of 1 so that band index -1 (no band) maps to 1.

        clamp: iterable of parameter coordinates to clamp to min(theta_k, 0)
        inside the ratio; None means use the model's own kernel_clamp setting.
        """
        theta = np.asarray(theta, dtype=float)
        vals = theta[self.n_trend:].copy()
        clamp = self.kernel_clamp if clamp is None else tuple(clamp)
        for k in clamp:
            vals[k - self.n_trend] = min(vals[k - self.n_trend], 0.0)
        table = np.empty(self.n_bands + 1)
        table[:self.n_bands] = np.exp(vals)
        table[-1] = 1.0
        return table

    def pair_potential(self, u, v):
        """Per-pair contribution to t: band indicators, zeros on trend."""
        d2 = float(((as_points(u)[0] - as_points(v)[0]) ** 2).sum())
        out = np.zeros(self.p)
        b = int(self.band_membership(np.array(d2)))
        if b >= 0:
            out[self.n_trend + b] = 1.0
        return out

    def __repr__(self):
        parts = [f"p={self.p}", f"bands={list(self.bands)}"]
        if self.delta is not None:
            parts.append(f"delta={self.delta:g}")
        if self.covariate is not None:
            parts.append("covariate")
        if self.kernel_clamp:
            parts.append(f"kernel_clamp={list(self.kernel_clamp)}")
        return f"PairwiseModel({self.name}: {', '.join(parts)})"


class ModelInstance:
    """A model together with a concrete parameter vector."""

    def __init__(self, model, theta):
        theta = np.asarray(theta, dtype=float).ravel().copy()
        if theta.shape != (model.p,):
            raise ConfigError(f"theta must have length {model.p}, got {theta.shape}")
        if not np.isfinite(theta).all():
            raise ConfigError("theta must be finite")
        theta.setflags(write=False)
        self.model = model
        self.theta = theta

    def __repr__(self):
        return f"ModelInstance({self.model!r}, theta={np.array2string(self.theta, precision=4)})"


# ---- spec operations ---------------------------------------------------------


def conditional_intensity(inst, u, y):
    """Papangelou conditional intensity lambda(u, y; theta).

    Accepts a single point (returns a float) or an (k, 2) array (returns (k,)).
    """
    model = inst.model
    pts = as_points(u)
    t = model.stats(pts, y)
    lam = np.exp(t @ inst.theta)
    blocked = model.is_blocked(pts, y)
    lam[blocked] = 0.0
    if np.asarray(u).ndim == 1:
        return float(lam[0])
    return lam


def intensity_gradient(inst, u, y):
    """d lambda / d theta = lambda(u, y; theta) * t(u, y); zero when blocked."""
    model = inst.model
    pts = as_points(u)
    t = model.stats(pts, y)
    lam = np.exp(t @ inst.theta)
    lam[model.is_blocked(pts, y)] = 0.0
    grad = lam[:, None] * t
    if np.asarray(u).ndim == 1:
        return grad[0]
    return grad


def leave_one_out_stats(model, x):
    """t(u, x \\ u) and the hard-core indicator for every data point u of x.

    Returns (stats, blocked) with shapes (n, p) and (n,).
    """
    cc = config_coords(x)
    if len(cc) == 0:
        return np.zeros((0, model.p)), np.zeros(0, dtype=bool)
    d2 = cdist(cc, cc, "sqeuclidean")
    np.fill_diagonal(d2, np.inf)
    return model.stats(cc, cc, d2=d2), model.is_blocked(cc, cc, d2=d2)


def interaction_ratio(inst, u, v, clamp=()):
    """lambda(v, y u u; theta) / lambda(v, y; theta) for pairwise models.

    The ratio is configuration-free: exp(theta . pair_potential(u, v)),
    multiplied by 0 when |u - v| <= delta; it equals 1 beyond the range R
    and is symmetric in u and v.  It is never clamped unless the caller
    passes clamp coordinates explicitly (the operator kernel does).
    """
    model = inst.model
    d2 = float(((as_points(u)[0] - as_points(v)[0]) ** 2).sum())
    if model.blocked_by(np.array(d2)):
        return 0.0
    table = model.ratio_table(inst.theta, clamp=clamp)
    b = int(model.band_membership(np.array(d2)))
    return float(table[b])


def operator_kernel(inst, u, v, y):
    """t(u, v, y; theta) = lambda(v, y; theta) * (1 - clamped interaction ratio).

    Returns 0 beyond the interaction range and when lambda(v, y; theta) = 0.
    The clamp applies the model's kernel_clamp coordinates inside the ratio
    only.
    """
    model = inst.model
    d2 = float(((as_points(u)[0] - as_points(v)[0]) ** 2).sum())
    if model.range == 0.0 or d2 >= model.range ** 2:
        return 0.0
    lam = conditional_intensity(inst, v, y)
    if lam == 0.0:
        return 0.0
    return lam * (1.0 - interaction_ratio(inst, u, v, clamp=model.kernel_clamp))


# ---- built-in models ---------------------------------------------------------


def poisson(covariate=None, covariate_scale=1.0):
    """Inhomogeneous Poisson: no interaction, H == 1."""
    return PairwiseModel(covariate=covariate, covariate_scale=covariate_scale,
                         name="poisson")


def strauss(r):
    """t(u, y) = (1, #neighbours closer than r); exists for theta_2 <= 0."""
    return PairwiseModel(bands=((0.0, r),), name="strauss")


def strauss_hard_core(delta, r):
    """Strauss statistics plus a hard core at distance delta."""
    if not 0 <= delta < r:
        raise ConfigError("need 0 <= delta < r")
    return PairwiseModel(bands=((0.0, r),), delta=delta, name="strauss_hc")


def multiscale_hard_core(delta, r, big_r, covariate=None, covariate_scale=1.0,
                         kernel_clamp=()):
    """Two interaction bands [0, r) and [r, R) plus hard core and covariate.

    t(u, y) = (1, c(u), #neighbours in [0, r), #neighbours in [r, R)) when a
    covariate is given, without the c(u) column otherwise.
    """
    if not 0 <= delta < r < big_r:
        raise ConfigError("need 0 <= delta < r < R")
    return PairwiseModel(bands=((0.0, r), (r, big_r)), delta=delta,
                         covariate=covariate, covariate_scale=covariate_scale,
                         kernel_clamp=kernel_clamp, name="multiscale_hc")
