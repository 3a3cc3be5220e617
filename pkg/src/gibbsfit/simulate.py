"""Birth/death/shift Metropolis-Hastings sampling of Gibbs model instances."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .geometry import PointPattern
from .quadrature import make_grid


@dataclass(frozen=True)
class SamplerConfig:
    """Chain length and proposal settings.

    One sweep is roughly one proposal per expected point of the
    interaction-free reference (integral of lambda(u, empty) over the window).
    n_sweeps = None picks the smallest count giving at least 1e5 main-phase
    proposals, so the default total including burn-in is at least 2e5.
    shift_sd = None means half the interaction range (or a tenth of the
    shorter window side for interaction-free models).  seed may be an int or
    a tuple of ints (fed to numpy's SeedSequence).
    """

    n_sweeps: int | None = None
    burn_in: int = 100_000
    proposal_mix: tuple = (0.4, 0.4, 0.2)
    shift_sd: float | None = None
    seed: object = 0


def seed_entropy(seed):
    """Normalize a seed to a tuple of ints usable as SeedSequence entropy."""
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def _validate(cfg):
    mix = np.asarray(cfg.proposal_mix, dtype=float)
    if mix.shape != (3,) or (mix < 0).any() or abs(mix.sum() - 1.0) > 1e-9:
        raise ConfigError("proposal_mix must be three nonnegative probabilities summing to 1")
    if (mix[0] > 0) != (mix[1] > 0):
        raise ConfigError("birth and death proposals must both be possible or both disabled")
    if cfg.burn_in < 0:
        raise ConfigError("burn_in must be nonnegative")
    if cfg.n_sweeps is not None and cfg.n_sweeps < 0:
        raise ConfigError("n_sweeps must be nonnegative")


def check_existence(inst):
    """Reject instances whose density is not normalizable (attractive
    interaction without a hard core)."""
    model = inst.model
    if model.delta is None and model.n_bands:
        th = inst.theta[model.n_trend:]
        if (th > 0).any():
            raise ConfigError(
                "positive interaction coordinate without a hard core: "
                "the model density is not normalizable")


def expected_points(inst, window, grid=(50, 50)):
    """Integral of lambda(u, empty) over the window (Poisson-ized count)."""
    g = make_grid(window, *grid)
    trend = inst.model.trend(g.nodes)
    lam0 = np.exp(trend @ inst.theta[:inst.model.n_trend])
    return float(g.weights @ lam0)


def log_birth_ratio(log_lam_u, n_before, area, p_birth, p_death):
    """Log Hastings ratio for a birth into an n_before-point configuration;
    log_lam_u = log lambda(u, x) at the proposed location."""
    return log_lam_u + np.log(area) + np.log(p_death / p_birth) - np.log(n_before + 1)


def log_death_ratio(log_lam_i, n_before, area, p_birth, p_death):
    """Log Hastings ratio for deleting one point of an n_before-point
    configuration; log_lam_i = log lambda(x_i, x minus x_i)."""
    return np.log(n_before) + np.log(p_birth / p_death) - log_lam_i - np.log(area)


def _location_batch(rng, window, batch):
    """Uniform draws on the window (mask cells respected)."""
    scale = np.array([window.width, window.height])
    shift = np.array([window.xmin, window.ymin])
    if window.mask is None:
        return rng.random((batch, 2)) * scale + shift
    chunks, got = [], 0
    while got < batch:
        cand = rng.random((batch, 2)) * scale + shift
        keep = cand[window.contains(cand)]
        chunks.append(keep)
        got += len(keep)
    return np.concatenate(chunks)[:batch]


def sample_gibbs(inst, window, cfg=None):
    """One pattern approximately distributed per the model after burn-in.

    Birth/death/shift Metropolis-Hastings using the Papangelou conditional
    intensity only; hard-core-violating proposals have intensity 0 and are
    rejected, so sampled patterns always respect the hard core.
    """
    cfg = cfg if cfg is not None else SamplerConfig()
    _validate(cfg)
    check_existence(inst)
    model = inst.model
    rng = np.random.default_rng(seed_entropy(cfg.seed))

    mean_n = max(expected_points(inst, window), 1.0)
    sweeps = cfg.n_sweeps if cfg.n_sweeps is not None else int(np.ceil(1e5 / mean_n))
    total = int(cfg.burn_in) + int(np.ceil(sweeps * mean_n))

    p_birth, p_death, p_shift = (float(v) for v in cfg.proposal_mix)
    area = window.area
    const_birth = np.log(area) + (np.log(p_death / p_birth) if p_birth > 0 else 0.0)
    if cfg.shift_sd is not None:
        shift_sd = float(cfg.shift_sd)
    elif model.range > 0:
        shift_sd = model.range / 2.0
    else:
        shift_sd = min(window.width, window.height) / 10.0
    simple_rect = window.mask is None
    xmin, xmax, ymin, ymax = window.bounds

    nb = model.n_bands
    lo2, hi2 = model._lo2, model._hi2
    th_int = inst.theta[model.n_trend:]
    delta2 = model._delta2
    has_hc = model.delta is not None
    has_cov = model.covariate is not None
    th_trend = inst.theta[:model.n_trend]
    cov = model.covariate
    cov_scale = model.covariate_scale

    cap = 256
    xs = np.empty(cap)
    ys = np.empty(cap)
    lt = np.empty(cap)  # theta . trend(point), cached per point
    n = 0

    def trend_value(ux, uy):
        if not has_cov:
            return th_trend[0]
        c = float(np.asarray(cov(np.array([[ux, uy]])))[0])
        return th_trend[0] + th_trend[1] * c * cov_scale

    def log_papangelou(ux, uy, ltu, m):
        if nb == 0 and not has_hc:
            return ltu
        d2 = (xs[:m] - ux) ** 2 + (ys[:m] - uy) ** 2
        if has_hc and m and (d2 <= delta2).any():
            return -np.inf
        v = ltu
        for b in range(nb):
            v += th_int[b] * ((d2 >= lo2[b]) & (d2 < hi2[b])).sum()
        return v

    BATCH = 4096
    kind_buf = acc_buf = idx_buf = norm_buf = loc_buf = loc_lt = None
    ik = ia = ii = ish = il = BATCH
    left = total
    while left > 0:
        left -= 1
        if ik == BATCH:
            kind_buf = rng.random(BATCH)
            ik = 0
        if ia == BATCH:
            acc_buf = np.log(rng.random(BATCH))
            ia = 0
        kind = kind_buf[ik]
        ik += 1
        if kind < p_birth:
            if loc_buf is None or il >= len(loc_buf):
                loc_buf = _location_batch(rng, window, BATCH)
                if has_cov:
                    loc_lt = th_trend[0] + th_trend[1] * cov_scale * np.asarray(cov(loc_buf), dtype=float)
                il = 0
            ux, uy = loc_buf[il]
            ltu = loc_lt[il] if has_cov else th_trend[0]
            il += 1
            loglam = log_papangelou(ux, uy, ltu, n)
            if acc_buf[ia] < loglam + const_birth - np.log(n + 1):
                if n == cap:
                    cap *= 2
                    xs = np.resize(xs, cap)
                    ys = np.resize(ys, cap)
                    lt = np.resize(lt, cap)
                xs[n] = ux
                ys[n] = uy
                lt[n] = ltu
                n += 1
            ia += 1
        elif kind < p_birth + p_death:
            if n > 0:
                if ii == BATCH:
                    idx_buf = rng.random(BATCH)
                    ii = 0
                j = int(idx_buf[ii] * n)
                ii += 1
                xs[j], xs[n - 1] = xs[n - 1], xs[j]
                ys[j], ys[n - 1] = ys[n - 1], ys[j]
                lt[j], lt[n - 1] = lt[n - 1], lt[j]
                loglam = log_papangelou(xs[n - 1], ys[n - 1], lt[n - 1], n - 1)
                if acc_buf[ia] < np.log(n) - loglam - const_birth:
                    n -= 1
                ia += 1
        else:
            if n > 0:
                if ii == BATCH:
                    idx_buf = rng.random(BATCH)
                    ii = 0
                if ish >= BATCH - 1:
                    norm_buf = rng.normal(0.0, shift_sd, BATCH)
                    ish = 0
                j = int(idx_buf[ii] * n)
                ii += 1
                xs[j], xs[n - 1] = xs[n - 1], xs[j]
                ys[j], ys[n - 1] = ys[n - 1], ys[j]
                lt[j], lt[n - 1] = lt[n - 1], lt[j]
                ux = xs[n - 1] + norm_buf[ish]
                uy = ys[n - 1] + norm_buf[ish + 1]
                ish += 2
                if simple_rect:
                    ok = xmin <= ux <= xmax and ymin <= uy <= ymax
                else:
                    ok = bool(window.contains(np.array([[ux, uy]]))[0])
                if ok:
                    ltu = trend_value(ux, uy)
                    log_old = log_papangelou(xs[n - 1], ys[n - 1], lt[n - 1], n - 1)
                    log_new = log_papangelou(ux, uy, ltu, n - 1)
                    if acc_buf[ia] < log_new - log_old:
                        xs[n - 1] = ux
                        ys[n - 1] = uy
                        lt[n - 1] = ltu
                    ia += 1

    return PointPattern(np.column_stack([xs[:n], ys[:n]]), window)


def sample_many(inst, window, cfg, n_sim):
    """Independent seeded chains; deterministic given (cfg, n_sim).

    Chain i uses the seed tuple cfg.seed + (i,), so patterns do not depend on
    how many are requested or in which order they are consumed.
    """
    base = seed_entropy(cfg.seed)
    out = []
    for i in range(int(n_sim)):
        out.append(sample_gibbs(inst, window, replace(cfg, seed=base + (i,))))
    return out
