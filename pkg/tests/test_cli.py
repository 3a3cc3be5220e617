import json

import numpy as np
import pytest

from gibbsfit import load_fit_report, load_group_manifest, load_pattern_csv
from gibbsfit.cli import main
from gibbsfit.patternio import save_json, save_pattern_csv, save_window_json
from gibbsfit import unit_square

from helpers import clustered_pattern

SAMPLER = ["--sweeps", "50", "--burn-in", "2000"]


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Model configs plus a simulated Poisson replicate directory."""
    d = tmp_path_factory.mktemp("cli")
    save_json({"type": "poisson"}, d / "poisson.json")
    save_json({"type": "strauss", "R": 0.08}, d / "strauss.json")
    rc = main(["simulate", "--model", str(d / "poisson.json"),
               "--theta", str(np.log(60.0)), "--nsim", "3",
               "--seed", "5", "--out", str(d / "sims")] + SAMPLER)
    assert rc == 0
    return d


class TestSimulate:
    def test_outputs(self, workdir):
        sims = workdir / "sims"
        names = sorted(p.name for p in sims.iterdir())
        assert names == ["manifest.json", "pattern_000.csv", "pattern_001.csv",
                         "pattern_002.csv", "window.json"]
        doc = json.loads((sims / "manifest.json").read_text())
        assert doc["n_sim"] == 3 and doc["model"] == {"type": "poisson"}
        group = load_group_manifest(sims / "manifest.json")
        assert group.n_replicates == 3
        assert all(p.window.bounds == (0.0, 1.0, 0.0, 1.0)
                   for p in group.patterns)

    def test_config_file_with_flag_override(self, workdir, tmp_path):
        save_json({"model": str(workdir / "poisson.json"),
                   "theta": [float(np.log(30.0))], "nsim": 1, "seed": 2,
                   "sweeps": 50, "burn_in": 2000,
                   "out": str(tmp_path / "d")}, tmp_path / "c.json")
        rc = main(["simulate", "--config", str(tmp_path / "c.json"),
                   "--nsim", "2"])
        assert rc == 0
        doc = json.loads((tmp_path / "d" / "manifest.json").read_text())
        assert doc["n_sim"] == 2  # flag beat the config value

    def test_missing_required_is_exit_2(self, capsys):
        assert main(["simulate", "--theta", "1.0", "--nsim", "1",
                     "--out", "x"]) == 2
        assert "--model" in capsys.readouterr().err


class TestFit:
    def test_pl_fit_writes_report(self, workdir, tmp_path):
        out = tmp_path / "fit.json"
        rc = main(["fit", "--method", "pl",
                   "--model", str(workdir / "poisson.json"),
                   "--data", str(workdir / "sims" / "pattern_000.csv"),
                   "--window", str(workdir / "sims" / "window.json"),
                   "--dummy-grid", "10", "10", "--out", str(out)])
        assert rc == 0
        fit = load_fit_report(out)
        assert fit.method == "pl"
        assert abs(fit.theta_hat[0] - np.log(60.0)) < 1.0

    def test_so_fit_with_plug_in_se(self, workdir, tmp_path, capsys):
        out = tmp_path / "so.json"
        rc = main(["fit", "--method", "so",
                   "--model", str(workdir / "poisson.json"),
                   "--data", str(workdir / "sims" / "pattern_001.csv"),
                   "--window", str(workdir / "sims" / "window.json"),
                   "--grid", "10", "10", "--dummy-grid", "10", "10",
                   "--se", "--out", str(out)])
        assert rc == 0
        assert "theta_hat" in capsys.readouterr().out
        fit = load_fit_report(out)
        assert fit.method == "semi-optimal"
        assert fit.stderr is not None and fit.stderr[0] > 0

    def test_se_with_pl_is_config_error(self, workdir, tmp_path, capsys):
        rc = main(["fit", "--method", "pl", "--se",
                   "--model", str(workdir / "poisson.json"),
                   "--data", str(workdir / "sims" / "pattern_000.csv"),
                   "--window", str(workdir / "sims" / "window.json")])
        assert rc == 2
        assert "bootstrap" in capsys.readouterr().err

    def test_separation_is_exit_3(self, tmp_path, capsys):
        win = unit_square()
        save_pattern_csv(np.array([[0.1, 0.1], [0.5, 0.5], [0.9, 0.9]]),
                         tmp_path / "far.csv")
        save_window_json(win, tmp_path / "far.window.json")
        save_json({"type": "strauss", "R": 0.01}, tmp_path / "m.json")
        rc = main(["fit", "--method", "pl", "--model", str(tmp_path / "m.json"),
                   "--data", str(tmp_path / "far.csv"),
                   "--dummy-grid", "8", "8"])
        assert rc == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_bad_model_file_is_exit_2(self, workdir, tmp_path, capsys):
        (tmp_path / "bad.json").write_text("{not json")
        rc = main(["fit", "--method", "pl", "--model", str(tmp_path / "bad.json"),
                   "--data", str(workdir / "sims" / "pattern_000.csv"),
                   "--window", str(workdir / "sims" / "window.json")])
        assert rc == 2
        rc = main(["fit", "--method", "pl",
                   "--model", str(tmp_path / "missing.json"),
                   "--data", str(workdir / "sims" / "pattern_000.csv"),
                   "--window", str(workdir / "sims" / "window.json")])
        assert rc == 2


class TestFitReplicated:
    def test_pooled_with_sandwich_se(self, workdir, tmp_path):
        out = tmp_path / "pooled.json"
        rc = main(["fit-replicated",
                   "--group", str(workdir / "sims" / "manifest.json"),
                   "--model", str(workdir / "poisson.json"),
                   "--method", "pl", "--grid", "8", "8", "--out", str(out)])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["n_replicates"] == 3
        assert doc["se"] is not None and doc["se"][0] > 0


class TestBootstrapAndGodambe:
    def test_bootstrap_files(self, workdir, tmp_path):
        fit_path = tmp_path / "fit.json"
        main(["fit", "--method", "pl",
              "--model", str(workdir / "poisson.json"),
              "--data", str(workdir / "sims" / "pattern_000.csv"),
              "--window", str(workdir / "sims" / "window.json"),
              "--dummy-grid", "10", "10", "--out", str(fit_path)])
        rc = main(["bootstrap", "--fit", str(fit_path),
                   "--model", str(workdir / "poisson.json"),
                   "--data", str(workdir / "sims" / "pattern_000.csv"),
                   "--window", str(workdir / "sims" / "window.json"),
                   "--dummy-grid", "10", "10", "--nsim", "4", "--seed", "9",
                   "--out", str(tmp_path / "boot")] + SAMPLER)
        assert rc == 0
        doc = json.loads((tmp_path / "boot.json").read_text())
        assert doc["n_used"] + doc["n_failed"] == 4
        assert (tmp_path / "boot.covariance.csv").exists()
        est = (tmp_path / "boot.estimates.csv").read_text().splitlines()
        assert len(est) == doc["n_used"]

    def test_godambe_files(self, workdir, tmp_path):
        rc = main(["godambe", "--model", str(workdir / "poisson.json"),
                   "--theta", str(np.log(60.0)), "--nsim", "4", "--seed", "3",
                   "--ef", "pl", "--grid", "8", "8",
                   "--out", str(tmp_path / "god")] + SAMPLER)
        assert rc == 0
        doc = json.loads((tmp_path / "god.json").read_text())
        assert doc["n_sim"] == 4 and doc["S"] is not None
        assert (tmp_path / "god.S.csv").exists()
        assert (tmp_path / "god.sigma.csv").exists()


class TestRmseStudy:
    def test_study_from_config(self, workdir, tmp_path, capsys):
        save_json({"settings": [{"label": "p60",
                                 "model": {"type": "poisson"},
                                 "theta": [float(np.log(60.0))]}],
                   "nsim": 2, "seed": 7, "grids": [[8, 8]],
                   "estimators": ["pl"],
                   "sampler": {"sweeps": 50, "burn_in": 2000},
                   "out": str(tmp_path / "study")},
                  tmp_path / "study.json")
        rc = main(["rmse-study", "--config", str(tmp_path / "study.json")])
        assert rc == 0
        assert "p60" in capsys.readouterr().out
        lines = (tmp_path / "study" / "rmse.csv").read_text().splitlines()
        assert len(lines) == 2

    def test_study_requires_config(self, capsys):
        assert main(["rmse-study", "--nsim", "5"]) == 2


class TestProfileR:
    def test_profile_over_candidates(self, tmp_path, rng, capsys):
        x = clustered_pattern(rng)
        save_pattern_csv(x, tmp_path / "clust.csv")
        save_window_json(x.window, tmp_path / "clust.window.json")
        save_json({"type": "strauss", "R": 0.08}, tmp_path / "m.json")
        out = tmp_path / "prof.json"
        rc = main(["profile-R", "--model", str(tmp_path / "m.json"),
                   "--data", str(tmp_path / "clust.csv"),
                   "--candidates", "0.02", "0.05", "0.1",
                   "--dummy-grid", "10", "10", "--out", str(out)])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["best"] in (0.02, 0.05, 0.1)
        assert len(doc["objectives"]) == 3
        assert "best R" in capsys.readouterr().out


class TestParser:
    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2
