"""File formats: patterns, windows, rasters, model configs, and reports.

* Point pattern: CSV with header line ``x,y``, one point per row, decimal
  dot.  Coordinates are written with 17 significant digits so a written
  pattern reloads bitwise-identically.
* Window: JSON ``{xmin, xmax, ymin, ymax, mask_file?}``; ``mask_file`` is
  resolved relative to the JSON file and holds an ASCII 0/1 grid.
* ASCII grid: whitespace-separated rows, top row = largest y.  Masks use
  0/1 entries; covariate rasters use real values.
* Model config: JSON ``{type, delta?, r?, R?, covariate_file?,
  covariate_scale?, kernel_clamp?}`` with type one of ``poisson``,
  ``strauss``, ``strauss_hc``, ``multiscale_hc``.
* Fit report: JSON carrying every FitResult field; writing and reloading
  reproduces the result exactly.

All emitters are deterministic: same objects, byte-identical files.  JSON
floats carry 17 significant digits; non-finite values become null.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .errors import ConfigError
from .geometry import CovariateField, PointPattern, Window
from .models import (multiscale_hard_core, poisson, strauss,
                     strauss_hard_core)
from .results import FitResult, SolverReport


def fmt(x, sig=17):
    """Fixed-significant-digit decimal form of one float."""
    return "%.*g" % (sig, float(x))


def _json_atom(v):
    if v is None or isinstance(v, bool):
        return "null" if v is None else ("true" if v else "false")
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v) if np.isfinite(v) else "null"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dumps_json(obj, _indent=0):
    """Deterministic JSON text: 2-space indent, 17-significant-digit floats,
    key order as given (callers build dicts in a fixed order)."""
    pad = "  " * _indent
    inner = "  " * (_indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps_json(v, _indent + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [dumps_json(v, _indent + 1) for v in obj]
        if all(len(p) <= 24 and "\n" not in p for p in parts):
            return "[" + ", ".join(parts) + "]"
        return ("[\n" + ",\n".join(inner + p for p in parts) + "\n" + pad + "]")
    return _json_atom(obj)


def save_json(obj, path):
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps_json(obj))
        fh.write("\n")
    return path


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---- point patterns ---------------------------------------------------------

def save_pattern_csv(x, path):
    """Write a pattern (or bare coordinate array) as an x,y CSV file."""
    coords = x.coords if isinstance(x, PointPattern) else np.asarray(x, float)
    with open(path, "w", newline="\n") as fh:
        fh.write("x,y\n")
        for px, py in coords:
            fh.write(f"{fmt(px)},{fmt(py)}\n")
    return path


def _sidecar(path):
    stem, _ = os.path.splitext(path)
    return stem + ".window.json"


def load_pattern_csv(path, window=None):
    """Read an x,y CSV; the window comes from the argument or the
    ``<stem>.window.json`` sidecar next to the file."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "y"]:
            raise ConfigError(f"{path}: expected header 'x,y'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ConfigError(f"{path}:{lineno}: expected two columns")
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                raise ConfigError(
                    f"{path}:{lineno}: not a decimal number") from None
    if window is None:
        sidecar = _sidecar(path)
        if not os.path.exists(sidecar):
            raise ConfigError(
                f"no window given and sidecar {sidecar} not found")
        window = load_window_json(sidecar)
    coords = np.array(rows, dtype=float).reshape(-1, 2)
    try:
        return PointPattern(coords, window)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"{path}: {e}") from None


# ---- windows, masks, rasters ------------------------------------------------

def save_raster_ascii(values, path, sig=17):
    """ASCII grid, one row per line, top row = largest y."""
    vals = np.asarray(values)
    if vals.ndim != 2:
        raise ConfigError("raster must be two-dimensional")
    with open(path, "w", newline="\n") as fh:
        if vals.dtype == bool or np.issubdtype(vals.dtype, np.integer):
            for row in vals.astype(int):
                fh.write(" ".join(str(int(v)) for v in row) + "\n")
        else:
            for row in vals:
                fh.write(" ".join(fmt(v, sig) for v in row) + "\n")
    return path


def load_raster_ascii(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split()])
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise ConfigError(f"{path}: ragged or empty ASCII grid")
    return np.asarray(rows, dtype=float)


def save_window_json(window, path):
    """Write the window; a mask goes to ``<stem>.mask.txt`` next to it."""
    doc = {"xmin": window.xmin, "xmax": window.xmax,
           "ymin": window.ymin, "ymax": window.ymax}
    if window.mask is not None:
        stem, _ = os.path.splitext(path)
        mask_path = stem + ".mask.txt"
        save_raster_ascii(window.mask, mask_path)
        doc["mask_file"] = os.path.basename(mask_path)
    return save_json(doc, path)


def load_window_json(path):
    doc = load_json(path)
    try:
        bounds = [float(doc[k]) for k in ("xmin", "xmax", "ymin", "ymax")]
    except (KeyError, TypeError, ValueError):
        raise ConfigError(f"{path}: window needs xmin/xmax/ymin/ymax") from None
    mask = None
    if doc.get("mask_file"):
        mask_path = os.path.join(os.path.dirname(path) or ".",
                                 doc["mask_file"])
        grid = load_raster_ascii(mask_path)
        if not np.isin(grid, (0.0, 1.0)).all():
            raise ConfigError(f"{mask_path}: mask entries must be 0 or 1")
        mask = grid.astype(bool)
    try:
        return Window(*bounds, mask=mask)
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from None


def load_covariate(path, window):
    """Covariate raster over the window's bounding rectangle."""
    values = load_raster_ascii(path)
    try:
        return CovariateField(values, window.xmin, window.xmax,
                              window.ymin, window.ymax)
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from None


# ---- model configuration ----------------------------------------------------

_MODEL_TYPES = ("poisson", "strauss", "strauss_hc", "multiscale_hc")


def _need(cfg, key, kind):
    if key not in cfg:
        raise ConfigError(f"model type {kind!r} needs field {key!r}")
    return float(cfg[key])


def model_from_config(cfg, window=None, base_dir=".", covariate=None):
    """Build a model from its config dict.

    covariate_file (poisson and multiscale_hc only) is resolved against
    base_dir and needs the window for the raster extent; a covariate object
    passed directly is used when the config names no file (replicate
    manifests supply fields this way).
    """
    if not isinstance(cfg, dict):
        raise ConfigError("model config must be an object")
    kind = cfg.get("type")
    if kind not in _MODEL_TYPES:
        raise ConfigError(
            f"unknown model type {kind!r} (one of {', '.join(_MODEL_TYPES)})")
    known = {"type", "delta", "r", "R", "covariate_file", "covariate_scale",
             "kernel_clamp"}
    extra = set(cfg) - known
    if extra:
        raise ConfigError(f"unknown model config fields: {sorted(extra)}")

    if cfg.get("covariate_file"):
        if window is None:
            raise ConfigError("a covariate raster needs the window extent")
        covariate = load_covariate(
            os.path.join(base_dir, cfg["covariate_file"]), window)
    if covariate is not None and kind not in ("poisson", "multiscale_hc"):
        raise ConfigError(f"model type {kind!r} takes no covariate")
    scale = float(cfg.get("covariate_scale", 1.0))

    if kind == "poisson":
        model = poisson(covariate=covariate, covariate_scale=scale)
    elif kind == "strauss":
        model = strauss(_need(cfg, "R", kind))
    elif kind == "strauss_hc":
        model = strauss_hard_core(_need(cfg, "delta", kind),
                                  _need(cfg, "R", kind))
    else:
        model = multiscale_hard_core(_need(cfg, "delta", kind),
                                     _need(cfg, "r", kind),
                                     _need(cfg, "R", kind),
                                     covariate=covariate,
                                     covariate_scale=scale)
    clamp = cfg.get("kernel_clamp")
    if clamp:
        model = model.with_kernel_clamp(tuple(int(k) for k in clamp))
    return model


# ---- fit reports -------------------------------------------------------------

def _opt_array(v):
    return None if v is None else np.asarray(v, dtype=float)


def fit_report_dict(fit):
    """JSON-ready dict with every FitResult field."""
    rep = fit.report
    return {
        "method": fit.method,
        "theta_hat": list(fit.theta_hat),
        "se": None if fit.stderr is None else list(fit.stderr),
        "covariance": None if fit.covariance is None
        else [list(r) for r in fit.covariance],
        "sensitivity": [list(r) for r in fit.sensitivity],
        "objective": fit.objective,
        "report": {
            "positive_definite": rep.positive_definite,
            "fallback_used": rep.fallback_used,
            "cholesky_fill_in": rep.cholesky_fill_in,
            "iterations": rep.iterations,
        },
    }


def fit_result_from_dict(doc):
    try:
        rep = doc["report"]
        report = SolverReport(
            positive_definite=bool(rep["positive_definite"]),
            fallback_used=rep["fallback_used"],
            cholesky_fill_in=rep["cholesky_fill_in"],
            iterations=int(rep["iterations"]))
        return FitResult(
            theta_hat=np.asarray(doc["theta_hat"], dtype=float),
            method=doc["method"], report=report,
            sensitivity=np.asarray(doc["sensitivity"], dtype=float),
            covariance=_opt_array(doc.get("covariance")),
            stderr=_opt_array(doc.get("se")),
            objective=doc.get("objective"))
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"malformed fit report: {e}") from None


def save_fit_report(fit, path):
    return save_json(fit_report_dict(fit), path)


def load_fit_report(path):
    return fit_result_from_dict(load_json(path))


# ---- matrices and replicate manifests ----------------------------------------

def save_matrix_csv(matrix, path, sig=6):
    """Matrix as CSV rows (table precision: 6 significant digits)."""
    M = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", newline="\n") as fh:
        for row in M:
            fh.write(",".join(fmt(v, sig) for v in row) + "\n")
    return path


def load_group_manifest(path):
    """Replicate-group manifest: patterns, windows, optional covariates.

    JSON layout::

        {"label": "control",
         "replicates": [{"pattern": "a.csv",
                         "window": "a.window.json",   # optional (sidecar)
                         "covariate": "a.cov.txt"},   # optional
                        ...]}

    File names resolve relative to the manifest.  Returns a ReplicateGroup.
    """
    from .replicated import ReplicateGroup

    doc = load_json(path)
    base = os.path.dirname(path) or "."
    reps = doc.get("replicates")
    if not isinstance(reps, list) or not reps:
        raise ConfigError(f"{path}: manifest needs a non-empty replicates list")
    patterns, covariates = [], []
    for i, entry in enumerate(reps):
        if not isinstance(entry, dict) or "pattern" not in entry:
            raise ConfigError(f"{path}: replicate {i} needs a pattern file")
        pat_path = os.path.join(base, entry["pattern"])
        window = (load_window_json(os.path.join(base, entry["window"]))
                  if entry.get("window") else None)
        pattern = load_pattern_csv(pat_path, window=window)
        patterns.append(pattern)
        covariates.append(
            load_covariate(os.path.join(base, entry["covariate"]),
                           pattern.window)
            if entry.get("covariate") else None)
    if all(c is None for c in covariates):
        covariates = None
    return ReplicateGroup(patterns, covariates=covariates,
                          label=str(doc.get("label", "")))
