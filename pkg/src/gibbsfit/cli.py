"""Command-line interface.

Subcommands
-----------
simulate        MCMC patterns from a model at a given theta
fit             single-pattern fit by pseudolikelihood or semi-optimal EF
fit-replicated  pooled fit over a replicate group (sandwich SEs when >= 2)
bootstrap       parametric-bootstrap spread around an existing fit report
godambe         Monte Carlo sensitivity/covariance diagnostics at theta
rmse-study      estimator-comparison experiment from a study config file
profile-R       profile the interaction range over a candidate grid

Every subcommand accepts ``--config FILE``: a JSON object whose keys are
the long option names with dashes replaced by underscores (for example
``{"model": "strauss.json", "dummy_grid": [50, 50]}``).  Options given on
the command line override config-file values.

Exit codes: 0 success, 2 bad configuration or input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .errors import ConfigError, GibbsfitError
from .geometry import unit_square
from .inference import bootstrap_se, monte_carlo_s_and_sigma, plug_in_covariance
from .models import ModelInstance
from .patternio import (dumps_json, fit_report_dict, fmt, load_fit_report,
                        load_group_manifest, load_json, load_pattern_csv,
                        load_window_json, model_from_config, save_fit_report,
                        save_json, save_matrix_csv, save_pattern_csv,
                        save_window_json)
from .pseudolikelihood import (LogisticFitConfig, fit_logistic_pl,
                               pl_estimating_function,
                               profile_pseudolikelihood)
from .quadrature import make_grid
from .replicated import PooledConfig, fit_pooled, sandwich_variance
from .semioptimal import SemiOptimalConfig, fit_semi_optimal, semi_optimal_ef
from .simulate import SamplerConfig, sample_many
from .study import ExperimentSpec, StudySetting, emit_report, run_rmse_study


# ---- option plumbing ----------------------------------------------------------

def _load_config(args):
    if getattr(args, "config", None) is None:
        return {}
    doc = load_json(args.config)
    if not isinstance(doc, dict):
        raise ConfigError(f"{args.config}: config must be a JSON object")
    return doc


def _opt(args, cfg, name, default=None):
    v = getattr(args, name)
    if v is None:
        v = cfg.get(name, default)
    return v


def _req(args, cfg, name):
    v = _opt(args, cfg, name)
    if v is None:
        raise ConfigError(f"missing required option --{name.replace('_', '-')}")
    return v


def _dims(value, name):
    try:
        nx, ny = (int(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be two integers") from None
    if nx < 1 or ny < 1:
        raise ConfigError(f"{name} must be positive")
    return nx, ny


def _sampler(args, cfg, seed):
    kw = {"seed": seed}
    sweeps = _opt(args, cfg, "sweeps")
    burn = _opt(args, cfg, "burn_in")
    if sweeps is not None:
        kw["n_sweeps"] = int(sweeps)
    if burn is not None:
        kw["burn_in"] = int(burn)
    return SamplerConfig(**kw)


def _load_model(path, window):
    return model_from_config(load_json(path), window=window,
                             base_dir=os.path.dirname(path) or ".")


def _emit_or_print(doc, out):
    if out is None:
        print(dumps_json(doc))
    else:
        save_json(doc, out)
        print(f"wrote {out}")


# ---- subcommand handlers -------------------------------------------------------

def _cmd_simulate(args):
    cfg = _load_config(args)
    model_path = _req(args, cfg, "model")
    theta = np.asarray([float(v) for v in _req(args, cfg, "theta")])
    n_sim = int(_req(args, cfg, "nsim"))
    out_dir = _req(args, cfg, "out")
    seed = int(_opt(args, cfg, "seed", 0))
    win_path = _opt(args, cfg, "window")
    window = load_window_json(win_path) if win_path else unit_square()
    model = _load_model(model_path, window)

    pats = sample_many(ModelInstance(model, theta), window,
                       _sampler(args, cfg, seed), n_sim)
    os.makedirs(out_dir, exist_ok=True)
    save_window_json(window, os.path.join(out_dir, "window.json"))
    width = max(3, len(str(n_sim - 1)))
    entries = []
    for i, x in enumerate(pats):
        name = f"pattern_{i:0{width}d}.csv"
        save_pattern_csv(x, os.path.join(out_dir, name))
        entries.append({"pattern": name, "window": "window.json"})
    save_json({"model": load_json(model_path), "theta": list(theta),
               "n_sim": n_sim, "seed": seed, "label": "",
               "replicates": entries},
              os.path.join(out_dir, "manifest.json"))
    print(f"wrote {n_sim} patterns and manifest.json to {out_dir}")
    return 0


def _fit_one(args, cfg):
    """Shared by fit and bootstrap: load data+model, build fit callables."""
    win_path = _opt(args, cfg, "window")
    window = load_window_json(win_path) if win_path else None
    x = load_pattern_csv(_req(args, cfg, "data"), window=window)
    model_path = _req(args, cfg, "model")
    model = _load_model(model_path, x.window)
    seed = int(_opt(args, cfg, "seed", 0))
    dummy = _dims(_opt(args, cfg, "dummy_grid", (50, 50)), "dummy-grid")
    log_cfg = LogisticFitConfig(dummy_grid=dummy, seed=seed)
    grid = _dims(_opt(args, cfg, "grid", (50, 50)), "grid")
    fallback = _opt(args, cfg, "fallback", "clamp-then-pl")
    so_cfg = SemiOptimalConfig(fallback=fallback, logistic=log_cfg)
    return x, model, log_cfg, grid, so_cfg


def _cmd_fit(args):
    cfg = _load_config(args)
    method = _req(args, cfg, "method")
    if method not in ("pl", "so"):
        raise ConfigError('method must be "pl" or "so"')
    x, model, log_cfg, grid, so_cfg = _fit_one(args, cfg)

    if method == "pl":
        if _opt(args, cfg, "se"):
            raise ConfigError(
                "--se is available for --method so (plug-in sandwich); "
                "use the bootstrap subcommand for pseudolikelihood errors")
        fit = fit_logistic_pl(model, x, log_cfg)
    else:
        scheme = make_grid(x.window, *grid)
        fit = fit_semi_optimal(model, x, scheme, so_cfg)
        if _opt(args, cfg, "se"):
            fit = _attach_plug_in_se(fit, model, x, scheme)

    out = _opt(args, cfg, "out")
    if out is None:
        print(dumps_json(fit_report_dict(fit)))
    else:
        save_fit_report(fit, out)
        print(f"wrote {out}")
    theta = ", ".join(fmt(v, 6) for v in fit.theta_hat)
    tag = fit.report.fallback_used
    print(f"theta_hat = [{theta}]" + (f"  (fallback: {tag})" if tag else ""))
    return 0


def _attach_plug_in_se(fit, model, x, scheme):
    """Sandwich variance S^-1 Sigma S^-T with the plug-in Sigma at theta-hat."""
    clamped = model.with_kernel_clamp() if (
        fit.report.fallback_used == "kernel-clamp") else model
    inst = ModelInstance(clamped, fit.theta_hat)
    sigma = plug_in_covariance(inst, x, scheme)
    try:
        si = np.linalg.solve(fit.sensitivity, sigma)
        cov = np.linalg.solve(fit.sensitivity, si.T).T
    except np.linalg.LinAlgError:
        raise ConfigError("sensitivity matrix is singular; no plug-in SE") \
            from None
    cov = 0.5 * (cov + cov.T)
    return dataclasses.replace(fit, covariance=cov,
                               stderr=np.sqrt(np.maximum(np.diag(cov), 0.0)))


def _cmd_fit_replicated(args):
    cfg = _load_config(args)
    method = _opt(args, cfg, "method", "so")
    if method not in ("pl", "so"):
        raise ConfigError('method must be "pl" or "so"')
    group = load_group_manifest(_req(args, cfg, "group"))
    model_path = _req(args, cfg, "model")
    first_cov = None
    if group.covariates is not None:
        first_cov = next((c for c in group.covariates if c is not None), None)
    model = model_from_config(load_json(model_path),
                              window=group.patterns[0].window,
                              base_dir=os.path.dirname(model_path) or ".",
                              covariate=first_cov)
    seed = int(_opt(args, cfg, "seed", 0))
    grid = _dims(_opt(args, cfg, "grid", (50, 50)), "grid")
    cell = _opt(args, cfg, "cell_size")
    log_cfg = LogisticFitConfig(dummy_grid=grid if cell is None else None,
                                seed=seed)
    so_cfg = SemiOptimalConfig(
        fallback=_opt(args, cfg, "fallback", "clamp-then-pl"),
        logistic=log_cfg)
    pooled = PooledConfig(grid=grid,
                          cell_size=None if cell is None else float(cell),
                          so=so_cfg)
    fit = fit_pooled(model, group, method=method, cfg=pooled)
    if group.n_replicates >= 2:
        sv = sandwich_variance(model, group, fit, method=method, cfg=pooled)
        fit = dataclasses.replace(fit, covariance=sv.covariance, stderr=sv.se)

    out = _opt(args, cfg, "out")
    doc = fit_report_dict(fit)
    doc["n_replicates"] = group.n_replicates
    doc["label"] = group.label
    _emit_or_print(doc, out)
    theta = ", ".join(fmt(v, 6) for v in fit.theta_hat)
    print(f"pooled theta_hat = [{theta}] over {group.n_replicates} replicates")
    return 0


def _cmd_bootstrap(args):
    cfg = _load_config(args)
    fit = load_fit_report(_req(args, cfg, "fit"))
    x, model, log_cfg, grid, so_cfg = _fit_one(args, cfg)
    n_sim = int(_req(args, cfg, "nsim"))
    seed = int(_opt(args, cfg, "seed", 0))

    if fit.method == "pl":
        def refit(pat):
            return fit_logistic_pl(model, pat, log_cfg).theta_hat
    else:
        def refit(pat):
            scheme = make_grid(pat.window, *grid)
            return fit_semi_optimal(model, pat, scheme, so_cfg).theta_hat

    boot = bootstrap_se(model, fit.theta_hat, x.window, refit, n_sim,
                        sampler=_sampler(args, cfg, seed))
    prefix = _opt(args, cfg, "out", "bootstrap")
    paths = [save_json({"method": fit.method,
                        "theta_hat": list(fit.theta_hat),
                        "se": list(boot.se),
                        "n_sim": n_sim, "n_used": boot.n_used,
                        "n_failed": boot.n_failed},
                       f"{prefix}.json")]
    paths.append(save_matrix_csv(boot.covariance, f"{prefix}.covariance.csv"))
    paths.append(save_matrix_csv(boot.estimates, f"{prefix}.estimates.csv"))
    print("wrote " + ", ".join(str(p) for p in paths))
    se = ", ".join(fmt(v, 6) for v in boot.se)
    print(f"bootstrap se = [{se}]  ({boot.n_used} used, {boot.n_failed} failed)")
    return 0


def _cmd_godambe(args):
    cfg = _load_config(args)
    model_path = _req(args, cfg, "model")
    theta = np.asarray([float(v) for v in _req(args, cfg, "theta")])
    n_sim = int(_req(args, cfg, "nsim"))
    seed = int(_opt(args, cfg, "seed", 0))
    ef = _opt(args, cfg, "ef", "so")
    if ef not in ("pl", "so"):
        raise ConfigError('ef must be "pl" or "so"')
    win_path = _opt(args, cfg, "window")
    window = load_window_json(win_path) if win_path else unit_square()
    model = _load_model(model_path, window)
    grid = _dims(_opt(args, cfg, "grid", (50, 50)), "grid")
    scheme = make_grid(window, *grid)

    inst = ModelInstance(model, theta)
    sims = sample_many(inst, window, _sampler(args, cfg, seed), n_sim)
    fn = pl_estimating_function if ef == "pl" else semi_optimal_ef
    report = monte_carlo_s_and_sigma(
        inst, lambda pat: fn(inst, pat, scheme), sims)

    prefix = _opt(args, cfg, "out", "godambe")
    paths = emit_report(report, "json", f"{prefix}.json")
    paths += emit_report(report, "csv", f"{prefix}.csv")
    print("wrote " + ", ".join(str(p) for p in paths))
    print(f"frobenius(relative deviation) = {fmt(report.frobenius_rel_dev, 6)}")
    return 0


def _study_spec(args):
    cfg = _load_config(args)
    if not cfg:
        raise ConfigError("rmse-study needs --config STUDY.json")
    base = os.path.dirname(args.config) or "."
    raw = cfg.get("settings")
    if not isinstance(raw, list) or not raw:
        raise ConfigError("study config needs a non-empty settings list")
    settings = []
    for i, s in enumerate(raw):
        try:
            label = s.get("label", f"setting{i}")
            window = (load_window_json(os.path.join(base, s["window"]))
                      if s.get("window") else None)
            model = model_from_config(
                s["model"], window=window or unit_square(), base_dir=base)
            settings.append(StudySetting(label, model, tuple(s["theta"]),
                                         window=window))
        except (KeyError, TypeError) as e:
            raise ConfigError(f"settings[{i}]: missing or bad field {e}") \
                from None
    kw = {}
    sampler_cfg = cfg.get("sampler", {})
    if not isinstance(sampler_cfg, dict):
        raise ConfigError("sampler must be an object")
    skw = {}
    if "sweeps" in sampler_cfg:
        skw["n_sweeps"] = int(sampler_cfg["sweeps"])
    if "burn_in" in sampler_cfg:
        skw["burn_in"] = int(sampler_cfg["burn_in"])
    if skw:
        kw["sampler"] = SamplerConfig(**skw)
    if "fallback" in cfg:
        kw["so"] = SemiOptimalConfig(fallback=cfg["fallback"])
    if "estimators" in cfg:
        kw["estimators"] = tuple(cfg["estimators"])
    if "grids" in cfg:
        kw["grids"] = tuple(_dims(g, "grids entry") for g in cfg["grids"])
    if "boot" in cfg:
        kw["boot"] = int(cfg["boot"])
    return ExperimentSpec(
        settings=tuple(settings),
        n_sim=int(_req(args, cfg, "nsim")),
        seed=int(_opt(args, cfg, "seed", 0)),
        workers=int(_opt(args, cfg, "workers", 1)),
        out_dir=_opt(args, cfg, "out"),
        **kw)


def _cmd_rmse_study(args):
    spec = _study_spec(args)
    table = run_rmse_study(spec)
    for row in table.rows:
        if not row.available:
            print(f"{row.label} [{row.grid[0]}x{row.grid[1]}]: unavailable "
                  f"({row.n_nonexistent} nonexistent, {row.n_failed} failed)")
            continue
        parts = [f"{row.label} [{row.grid[0]}x{row.grid[1]}]:",
                 f"used {row.n_used}/{row.n_sim}"]
        if row.rel_improvement_pct is not None:
            rel = ", ".join(fmt(v, 4) for v in row.rel_improvement_pct)
            se = ", ".join(fmt(v, 4) for v in row.boot_se_pct)
            parts.append(f"improvement% [{rel}] (boot se [{se}])")
        print(" ".join(parts))
    if spec.out_dir:
        print(f"wrote {os.path.join(spec.out_dir, 'rmse.csv')} and rmse.json")
    return 0


def _cmd_profile_r(args):
    cfg = _load_config(args)
    win_path = _opt(args, cfg, "window")
    window = load_window_json(win_path) if win_path else None
    x = load_pattern_csv(_req(args, cfg, "data"), window=window)
    model_path = _req(args, cfg, "model")
    model_cfg = load_json(model_path)
    base = os.path.dirname(model_path) or "."
    candidates = [float(v) for v in _req(args, cfg, "candidates")]
    dummy = _dims(_opt(args, cfg, "dummy_grid", (50, 50)), "dummy-grid")
    seed = int(_opt(args, cfg, "seed", 0))

    def model_for(r):
        return model_from_config(dict(model_cfg, R=r), window=x.window,
                                 base_dir=base)

    prof = profile_pseudolikelihood(
        model_for, candidates, x,
        LogisticFitConfig(dummy_grid=dummy, seed=seed))
    doc = {"candidates": list(prof.candidates),
           "objectives": list(prof.objectives),
           "best": prof.best,
           "fit": fit_report_dict(prof.best_fit)}
    _emit_or_print(doc, _opt(args, cfg, "out"))
    print(f"best R = {fmt(prof.best, 6)}")
    return 0


# ---- parser -------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(
        prog="gibbsfit",
        description="Fit spatial Gibbs point-process models by "
                    "pseudolikelihood or a semi-optimal estimating function.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file; flags override")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")

    def model_opts(sp):
        sp.add_argument("--model", help="model config JSON")
        sp.add_argument("--window", help="window JSON (else data sidecar)")

    def sampler_opts(sp):
        sp.add_argument("--sweeps", type=int, help="MCMC main-phase sweeps")
        sp.add_argument("--burn-in", dest="burn_in", type=int,
                        help="MCMC burn-in proposals")

    sp = sub.add_parser("simulate", help="sample patterns by MCMC")
    common(sp), model_opts(sp), sampler_opts(sp)
    sp.add_argument("--theta", type=float, nargs="+")
    sp.add_argument("--nsim", type=int)

    sp = sub.add_parser("fit", help="fit one pattern")
    common(sp), model_opts(sp)
    sp.add_argument("--method", choices=("pl", "so"))
    sp.add_argument("--data", help="pattern CSV")
    sp.add_argument("--dummy-grid", dest="dummy_grid", type=int, nargs=2,
                    metavar=("NX", "NY"))
    sp.add_argument("--grid", type=int, nargs=2, metavar=("NX", "NY"))
    sp.add_argument("--fallback", choices=("pl", "clamp-then-pl"))
    sp.add_argument("--se", action="store_true", default=None,
                    help="plug-in sandwich standard errors (so only)")

    sp = sub.add_parser("fit-replicated", help="pooled fit over replicates")
    common(sp)
    sp.add_argument("--group", help="replicate-group manifest JSON")
    sp.add_argument("--model", help="model config JSON")
    sp.add_argument("--method", choices=("pl", "so"))
    sp.add_argument("--grid", type=int, nargs=2, metavar=("NX", "NY"))
    sp.add_argument("--cell-size", dest="cell_size", type=float,
                    help="grid cell side; overrides --grid per window")
    sp.add_argument("--fallback", choices=("pl", "clamp-then-pl"))

    sp = sub.add_parser("bootstrap", help="parametric bootstrap around a fit")
    common(sp), model_opts(sp), sampler_opts(sp)
    sp.add_argument("--fit", help="fit report JSON to resample")
    sp.add_argument("--data", help="pattern CSV (window source)")
    sp.add_argument("--nsim", type=int)
    sp.add_argument("--dummy-grid", dest="dummy_grid", type=int, nargs=2)
    sp.add_argument("--grid", type=int, nargs=2)
    sp.add_argument("--fallback", choices=("pl", "clamp-then-pl"))

    sp = sub.add_parser("godambe", help="Monte Carlo S and Sigma at theta")
    common(sp), model_opts(sp), sampler_opts(sp)
    sp.add_argument("--theta", type=float, nargs="+")
    sp.add_argument("--nsim", type=int)
    sp.add_argument("--ef", choices=("pl", "so"),
                    help="estimating function (default so)")
    sp.add_argument("--grid", type=int, nargs=2)

    sp = sub.add_parser("rmse-study", help="estimator comparison experiment")
    common(sp)
    sp.add_argument("--nsim", type=int)
    sp.add_argument("--workers", type=int)

    sp = sub.add_parser("profile-R", help="profile the interaction range")
    common(sp), model_opts(sp)
    sp.add_argument("--data", help="pattern CSV")
    sp.add_argument("--candidates", type=float, nargs="+")
    sp.add_argument("--dummy-grid", dest="dummy_grid", type=int, nargs=2)

    return p


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "fit-replicated": _cmd_fit_replicated,
    "bootstrap": _cmd_bootstrap,
    "godambe": _cmd_godambe,
    "rmse-study": _cmd_rmse_study,
    "profile-R": _cmd_profile_r,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except GibbsfitError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3
    except json.JSONDecodeError as e:
        print(f"error: invalid JSON: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
