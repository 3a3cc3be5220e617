"""Monte Carlo RMSE comparison of the two estimators.

A study simulates patterns at known parameters, fits each requested
estimator, and tabulates per-coordinate RMSE together with the relative
improvement of the semi-optimal fit over plain pseudolikelihood,

    improvement = (RMSE_pl - RMSE_so) / RMSE_pl   (reported in percent),

with a bootstrap standard error computed by resampling the Monte Carlo
sample of fits.  Simulations whose estimate does not exist (for example no
point pair within range, so the interaction coordinate separates) are
dropped for BOTH estimators, keeping the comparison paired.  Semi-optimal
fits that fell back are kept (the fallback estimate is what a user would
receive) and counted separately from dropped simulations.

Determinism: replicate (setting, grid, replicate) tasks carry seeds derived
from the master seed and their indices, so results are byte-identical for
any worker count.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field, replace
from multiprocessing import Pool
from typing import Optional

import numpy as np

from .errors import ConfigError, GibbsfitError, SeparationError
from .geometry import unit_square
from .inference import GodambeReport
from .models import ModelInstance, PairwiseModel
from .patternio import dumps_json, fmt, save_fit_report
from .pseudolikelihood import fit_logistic_pl
from .quadrature import make_grid
from .results import FitResult
from .semioptimal import SemiOptimalConfig, fit_semi_optimal
from .simulate import SamplerConfig, sample_gibbs

_ESTIMATORS = ("pl", "so")


@dataclass(frozen=True)
class StudySetting:
    """One table row to estimate: a model, its true theta, and a window."""

    label: str
    model: PairwiseModel
    theta: tuple
    window: Optional[Window] = None

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))
        if len(self.theta) != self.model.p:
            raise ConfigError(
                f"setting {self.label!r}: theta must have length {self.model.p}")


@dataclass(frozen=True)
class ExperimentSpec:
    """Settings x grids x n_sim replicates, with seeds and estimator choice."""

    settings: tuple
    n_sim: int
    seed: int = 0
    grids: tuple = ((50, 50),)
    estimators: tuple = ("pl", "so")
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    so: SemiOptimalConfig = field(default_factory=SemiOptimalConfig)
    boot: int = 200
    workers: int = 1
    out_dir: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "settings", tuple(self.settings))
        object.__setattr__(self, "grids",
                           tuple((int(nx), int(ny)) for nx, ny in self.grids))
        est = tuple(dict.fromkeys(self.estimators))
        object.__setattr__(self, "estimators", est)
        if not self.settings:
            raise ConfigError("a study needs at least one setting")
        if self.n_sim < 1:
            raise ConfigError("n_sim must be >= 1")
        if not est or any(e not in _ESTIMATORS for e in est):
            raise ConfigError(
                f"estimators must be a non-empty subset of {_ESTIMATORS}")
        if not self.grids or any(n < 1 for g in self.grids for n in g):
            raise ConfigError("grids must be non-empty with positive dims")
        if self.boot < 1:
            raise ConfigError("boot must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


@dataclass(frozen=True)
class RmseRow:
    label: str
    grid: tuple
    n_sim: int
    n_used: int
    n_nonexistent: int
    n_failed: int
    n_so_clamped: int
    n_so_pl_fallback: int
    available: bool
    theta_true: tuple
    rmse_pl: Optional[tuple] = None
    rmse_so: Optional[tuple] = None
    rel_improvement_pct: Optional[tuple] = None
    boot_se_pct: Optional[tuple] = None


@dataclass(frozen=True)
class RmseTable:
    rows: tuple
    estimators: tuple
    n_sim: int
    seed: int


# one spec per worker process, installed by the pool initializer
_SPEC = None


def _init_worker(spec):
    global _SPEC
    _SPEC = spec


def _run_task(key):
    """Simulate replicate j of (setting si, grid gi) and fit it.

    Returns (si, gi, j, status, theta_pl, theta_so, so_fallback_tag) with
    plain tuples so records pickle cheaply.
    """
    si, gi, j = key
    spec = _SPEC
    s = spec.settings[si]
    nx, ny = spec.grids[gi]
    window = s.window if s.window is not None else unit_square()
    theta = np.asarray(s.theta, dtype=float)

    x = sample_gibbs(ModelInstance(s.model, theta), window,
                     replace(spec.sampler, seed=(spec.seed, si, j)))

    dummy_seed = int(np.random.SeedSequence(
        (spec.seed, si, gi, j, 1)).generate_state(1)[0])
    log_cfg = replace(spec.so.logistic, dummy_grid=(nx, ny), seed=dummy_seed)
    so_cfg = replace(spec.so, logistic=log_cfg)

    try:
        pl = fit_logistic_pl(s.model, x, log_cfg)
        theta_so = tag = None
        if "so" in spec.estimators:
            so = fit_semi_optimal(s.model, x, make_grid(window, nx, ny),
                                  so_cfg)
            theta_so, tag = tuple(so.theta_hat), so.report.fallback_used
    except (ConfigError, SeparationError):
        # empty pattern or a coordinate with no variation: no estimate exists
        return (si, gi, j, "nonexistent", None, None, None)
    except GibbsfitError:
        return (si, gi, j, "failed", None, None, None)
    return (si, gi, j, "ok", tuple(pl.theta_hat), theta_so, tag)


def _bootstrap_rel_improvement(err_pl, err_so, n_boot, rng):
    """SE of the percent improvement under resampling of the fit sample."""
    n = err_pl.shape[0]
    idx = rng.integers(0, n, size=(n_boot, n))
    with np.errstate(divide="ignore", invalid="ignore"):
        r_pl = np.sqrt((err_pl[idx] ** 2).mean(axis=1))
        r_so = np.sqrt((err_so[idx] ** 2).mean(axis=1))
        rel = 100.0 * (r_pl - r_so) / r_pl
    return rel.std(axis=0, ddof=1) if n_boot > 1 else np.zeros(err_pl.shape[1])


def _reduce_cell(spec, si, gi, recs):
    s = spec.settings[si]
    theta = np.asarray(s.theta, dtype=float)
    ok = [r for r in recs if r[3] == "ok"]
    n_nonexistent = sum(r[3] == "nonexistent" for r in recs)
    n_failed = sum(r[3] == "failed" for r in recs)
    base = dict(label=s.label, grid=spec.grids[gi], n_sim=spec.n_sim,
                n_used=len(ok), n_nonexistent=n_nonexistent,
                n_failed=n_failed, theta_true=tuple(theta),
                n_so_clamped=sum(r[6] == "kernel-clamp" for r in ok),
                n_so_pl_fallback=sum(r[6] == "pl-estimate" for r in ok))
    if not ok:
        return RmseRow(available=False, **base)

    want_pl = "pl" in spec.estimators
    want_so = "so" in spec.estimators
    err_pl = np.array([r[4] for r in ok]) - theta
    rmse_pl = tuple(np.sqrt((err_pl ** 2).mean(axis=0))) if want_pl else None
    rmse_so = rel = se = None
    if want_so:
        err_so = np.array([r[5] for r in ok]) - theta
        rmse_so = tuple(np.sqrt((err_so ** 2).mean(axis=0)))
    if want_pl and want_so:
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = tuple(100.0 * (np.asarray(rmse_pl) - np.asarray(rmse_so))
                        / np.asarray(rmse_pl))
        rng = np.random.default_rng((spec.seed, si, gi, 2))
        se = tuple(_bootstrap_rel_improvement(err_pl, err_so, spec.boot, rng))
    return RmseRow(available=True, rmse_pl=rmse_pl, rmse_so=rmse_so,
                   rel_improvement_pct=rel, boot_se_pct=se, **base)


def run_rmse_study(spec):
    """Run the full study; writes rmse.csv and rmse.json under out_dir."""
    keys = [(si, gi, j)
            for si in range(len(spec.settings))
            for gi in range(len(spec.grids))
            for j in range(spec.n_sim)]
    if spec.workers > 1:
        with Pool(spec.workers, initializer=_init_worker,
                  initargs=(spec,)) as pool:
            records = list(pool.imap_unordered(_run_task, keys))
    else:
        _init_worker(spec)
        records = [_run_task(k) for k in keys]
    records.sort(key=lambda r: r[:3])

    rows = []
    for si in range(len(spec.settings)):
        for gi in range(len(spec.grids)):
            recs = [r for r in records if r[0] == si and r[1] == gi]
            rows.append(_reduce_cell(spec, si, gi, recs))
    table = RmseTable(rows=tuple(rows), estimators=spec.estimators,
                      n_sim=spec.n_sim, seed=spec.seed)
    if spec.out_dir is not None:
        os.makedirs(spec.out_dir, exist_ok=True)
        emit_report(table, "csv", os.path.join(spec.out_dir, "rmse.csv"))
        emit_report(table, "json", os.path.join(spec.out_dir, "rmse.json"))
    return table


# ---- report emission ----------------------------------------------------------


def _write_text(path, text):
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as e:
        raise ConfigError(f"cannot write {path}: {e}") from None
    return path


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _cell(v, sig=6):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return fmt(v, sig)


def _rmse_header(table):
    p = len(table.rows[0].theta_true)
    want_pl = "pl" in table.estimators
    want_so = "so" in table.estimators
    cols = ["setting", "grid", "n_sim", "n_used", "n_nonexistent", "n_failed"]
    if want_so:
        cols += ["n_so_clamped", "n_so_pl_fallback"]
    cols.append("available")
    for k in range(p):
        cols.append(f"theta_true_{k}")
        if want_pl:
            cols.append(f"rmse_pl_{k}")
        if want_so:
            cols.append(f"rmse_so_{k}")
        if want_pl and want_so:
            cols += [f"rel_improvement_pct_{k}", f"boot_se_pct_{k}"]
    return cols, p, want_pl, want_so


def _rmse_csv(table):
    header, p, want_pl, want_so = _rmse_header(table)
    nan = float("nan")
    out = []
    for row in table.rows:
        cells = [row.label, f"{row.grid[0]}x{row.grid[1]}",
                 _cell(row.n_sim), _cell(row.n_used),
                 _cell(row.n_nonexistent), _cell(row.n_failed)]
        if want_so:
            cells += [_cell(row.n_so_clamped), _cell(row.n_so_pl_fallback)]
        cells.append(_cell(row.available))
        for k in range(p):
            cells.append(_cell(row.theta_true[k]))
            if want_pl:
                cells.append(_cell(row.rmse_pl[k] if row.rmse_pl else nan))
            if want_so:
                cells.append(_cell(row.rmse_so[k] if row.rmse_so else nan))
            if want_pl and want_so:
                rel = row.rel_improvement_pct
                se = row.boot_se_pct
                cells.append(_cell(rel[k] if rel else nan))
                cells.append(_cell(se[k] if se else nan))
        out.append(cells)
    return _csv_text(header, out)


def _rmse_json(table):
    rows = []
    for r in table.rows:
        rows.append({
            "setting": r.label, "grid": list(r.grid), "n_sim": r.n_sim,
            "n_used": r.n_used, "n_nonexistent": r.n_nonexistent,
            "n_failed": r.n_failed, "n_so_clamped": r.n_so_clamped,
            "n_so_pl_fallback": r.n_so_pl_fallback,
            "available": r.available,
            "theta_true": list(r.theta_true),
            "rmse_pl": None if r.rmse_pl is None else list(r.rmse_pl),
            "rmse_so": None if r.rmse_so is None else list(r.rmse_so),
            "rel_improvement_pct": (None if r.rel_improvement_pct is None
                                    else list(r.rel_improvement_pct)),
            "boot_se_pct": (None if r.boot_se_pct is None
                            else list(r.boot_se_pct)),
        })
    return {"n_sim": table.n_sim, "seed": table.seed,
            "estimators": list(table.estimators), "rows": rows}


def _godambe_json(rep):
    def opt(M):
        return None if M is None else [list(r) for r in np.asarray(M)]

    return {"n_sim": rep.n_sim,
            "S": opt(rep.S), "sigma": opt(rep.sigma),
            "rel_dev": opt(rep.rel_dev),
            "frobenius_rel_dev": rep.frobenius_rel_dev,
            "godambe": opt(rep.godambe),
            "inverse_godambe": opt(rep.inverse_godambe)}


def _matrix_csv(M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    header = [f"c{i}" for i in range(M.shape[1])]
    return _csv_text(header, [[fmt(v, 6) for v in row] for row in M])


def _fit_csv(fit):
    rows = []
    for i, th in enumerate(fit.theta_hat):
        se = float("nan") if fit.stderr is None else fit.stderr[i]
        rows.append([str(i), fmt(th, 6), fmt(se, 6)])
    return _csv_text(["coordinate", "theta_hat", "se"], rows)


def emit_report(obj, format, path):
    """Write a fit, Godambe report, or RMSE table as json or csv.

    Returns the list of files written.  CSV matrices for a Godambe report
    land in sibling files named <stem>.<matrix>.csv.
    """
    if format not in ("json", "csv"):
        raise ConfigError('format must be "json" or "csv"')
    if isinstance(obj, FitResult):
        if format == "json":
            try:
                save_fit_report(obj, path)
            except OSError as e:
                raise ConfigError(f"cannot write {path}: {e}") from None
            return [path]
        return [_write_text(path, _fit_csv(obj))]
    if isinstance(obj, GodambeReport):
        if format == "json":
            return [_write_text(path, dumps_json(_godambe_json(obj)) + "\n")]
        stem, _ = os.path.splitext(path)
        out = []
        for name, M in (("S", obj.S), ("sigma", obj.sigma),
                        ("rel_dev", obj.rel_dev),
                        ("godambe", obj.godambe),
                        ("inverse_godambe", obj.inverse_godambe)):
            if M is not None:
                out.append(_write_text(f"{stem}.{name}.csv", _matrix_csv(M)))
        return out
    if isinstance(obj, RmseTable):
        if format == "json":
            return [_write_text(path, dumps_json(_rmse_json(obj)) + "\n")]
        return [_write_text(path, _rmse_csv(obj))]
    raise ConfigError(f"cannot emit a {type(obj).__name__}")
