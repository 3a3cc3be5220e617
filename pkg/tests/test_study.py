import numpy as np
import pytest

from gibbsfit import (ConfigError, ExperimentSpec, FitResult, GodambeReport,
                      LogisticFitConfig, ModelInstance, SamplerConfig,
                      SolverReport, StudySetting, emit_report,
                      fit_logistic_pl, poisson, run_rmse_study, sample_gibbs,
                      strauss, unit_square)
from gibbsfit.semioptimal import SemiOptimalConfig
from gibbsfit.study import _reduce_cell

FAST = SamplerConfig(burn_in=2_000, n_sweeps=50)


def _poisson_spec(**kw):
    setting = StudySetting("poisson60", poisson(), (np.log(60.0),))
    defaults = dict(settings=(setting,), n_sim=3, seed=11,
                    grids=((10, 10),), sampler=FAST, boot=60)
    defaults.update(kw)
    return ExperimentSpec(**defaults)


class TestSpecValidation:
    def test_bad_fields(self):
        with pytest.raises(ConfigError, match="n_sim"):
            _poisson_spec(n_sim=0)
        with pytest.raises(ConfigError, match="estimators"):
            _poisson_spec(estimators=())
        with pytest.raises(ConfigError, match="estimators"):
            _poisson_spec(estimators=("pl", "mle"))
        with pytest.raises(ConfigError, match="at least one setting"):
            _poisson_spec(settings=())
        with pytest.raises(ConfigError, match="grids"):
            _poisson_spec(grids=((0, 10),))
        with pytest.raises(ConfigError, match="workers"):
            _poisson_spec(workers=0)

    def test_theta_length_checked(self):
        with pytest.raises(ConfigError, match="length 2"):
            StudySetting("s", strauss(0.1), (1.0,))

    def test_duplicate_estimators_collapse(self):
        assert _poisson_spec(estimators=("pl", "pl")).estimators == ("pl",)


class TestSingleSimulation:
    def test_rmse_is_absolute_error_and_boot_se_zero(self):
        spec = _poisson_spec(n_sim=1)
        table = run_rmse_study(spec)
        (row,) = table.rows
        assert row.n_used == 1 and row.available

        # replay the task's seed derivation by hand
        from dataclasses import replace
        theta = np.array([np.log(60.0)])
        x = sample_gibbs(ModelInstance(poisson(), theta), unit_square(),
                         replace(FAST, seed=(11, 0, 0)))
        dseed = int(np.random.SeedSequence((11, 0, 0, 0, 1))
                    .generate_state(1)[0])
        fit = fit_logistic_pl(poisson(), x,
                              LogisticFitConfig(dummy_grid=(10, 10),
                                                seed=dseed))
        assert row.rmse_pl[0] == abs(fit.theta_hat[0] - theta[0])
        assert row.boot_se_pct == (0.0,)


class TestEstimatorSubsets:
    def test_pl_only_leaves_so_columns_absent(self, tmp_path):
        spec = _poisson_spec(estimators=("pl",))
        table = run_rmse_study(spec)
        (row,) = table.rows
        assert row.rmse_pl is not None
        assert row.rmse_so is None
        assert row.rel_improvement_pct is None and row.boot_se_pct is None
        (path,) = emit_report(table, "csv", tmp_path / "t.csv")
        header = (tmp_path / "t.csv").read_text().splitlines()[0]
        assert "rmse_pl_0" in header and "rmse_so" not in header
        assert "rel_improvement" not in header

    def test_so_only_reports_so_rmse(self):
        table = run_rmse_study(_poisson_spec(estimators=("so",)))
        (row,) = table.rows
        assert row.rmse_so is not None and row.rmse_pl is None
        assert row.rel_improvement_pct is None


class TestDeterminismAndWorkers:
    def test_worker_count_does_not_change_bytes(self, tmp_path):
        settings = (StudySetting("a", poisson(), (np.log(40.0),)),
                    StudySetting("b", poisson(), (np.log(70.0),)))
        out = {}
        for workers in (1, 2):
            spec = ExperimentSpec(settings=settings, n_sim=3, seed=4,
                                  grids=((8, 8),), sampler=FAST, boot=40,
                                  workers=workers,
                                  out_dir=str(tmp_path / f"w{workers}"))
            run_rmse_study(spec)
            out[workers] = tuple(
                (tmp_path / f"w{workers}" / name).read_bytes()
                for name in ("rmse.csv", "rmse.json"))
        assert out[1] == out[2]

    def test_row_count_is_settings_times_grids(self):
        spec = _poisson_spec(grids=((8, 8), (12, 12)), estimators=("pl",))
        table = run_rmse_study(spec)
        assert len(table.rows) == 2
        assert table.rows[0].grid == (8, 8) and table.rows[1].grid == (12, 12)


class TestOmissions:
    def test_no_pairs_in_range_counts_as_nonexistent(self):
        # R so small that a pair within range is essentially impossible:
        # every simulation separates and the whole row is unavailable
        setting = StudySetting("sep", strauss(0.001), (np.log(20.0), 0.0))
        spec = ExperimentSpec(settings=(setting,), n_sim=3, seed=2,
                              grids=((10, 10),), sampler=FAST, boot=20)
        table = run_rmse_study(spec)
        (row,) = table.rows
        assert row.n_nonexistent == 3 and row.n_used == 0
        assert not row.available
        assert row.rmse_pl is None and row.rmse_so is None
        assert row.n_nonexistent + row.n_failed + row.n_used == spec.n_sim

    def test_unavailable_row_still_emits(self, tmp_path):
        setting = StudySetting("sep", strauss(0.001), (np.log(20.0), 0.0))
        spec = ExperimentSpec(settings=(setting,), n_sim=2, seed=2,
                              grids=((10, 10),), sampler=FAST)
        table = run_rmse_study(spec)
        emit_report(table, "csv", tmp_path / "t.csv")
        body = (tmp_path / "t.csv").read_text().splitlines()
        assert len(body) == 2  # header + one row
        assert "nan" in body[1] and body[1].startswith("sep,10x10,2,0,2,0")


class TestReduceArithmetic:
    def test_counts_rmse_and_improvement(self):
        spec = ExperimentSpec(
            settings=(StudySetting("s", strauss(0.1), (4.0, -1.0)),),
            n_sim=4, seed=0, boot=50)
        recs = [
            (0, 0, 0, "ok", (4.1, -1.2), (4.05, -1.1), None),
            (0, 0, 1, "ok", (3.9, -0.8), (3.95, -0.9), "kernel-clamp"),
            (0, 0, 2, "nonexistent", None, None, None),
            (0, 0, 3, "ok", (4.2, -1.0), (4.2, -1.0), "pl-estimate"),
        ]
        row = _reduce_cell(spec, 0, 0, recs)
        assert (row.n_used, row.n_nonexistent, row.n_failed) == (3, 1, 0)
        assert (row.n_so_clamped, row.n_so_pl_fallback) == (1, 1)
        assert np.allclose(row.rmse_pl, [np.sqrt(0.06 / 3), np.sqrt(0.08 / 3)])
        assert np.allclose(row.rmse_so[0], np.sqrt(0.045 / 3))
        want = 100.0 * (1.0 - np.sqrt(0.045 / 0.06))
        assert np.isclose(row.rel_improvement_pct[0], want)
        assert row.boot_se_pct[0] > 0

    def test_failure_kind_counted_separately(self):
        spec = ExperimentSpec(
            settings=(StudySetting("s", poisson(), (4.0,)),),
            n_sim=3, seed=0)
        recs = [(0, 0, 0, "ok", (4.0,), (4.0,), None),
                (0, 0, 1, "failed", None, None, None),
                (0, 0, 2, "nonexistent", None, None, None)]
        row = _reduce_cell(spec, 0, 0, recs)
        assert (row.n_used, row.n_nonexistent, row.n_failed) == (1, 1, 1)


class TestEmitReport:
    def test_fit_result_csv_and_json(self, tmp_path):
        fit = FitResult(theta_hat=np.array([1.5, -0.25]), method="pl",
                        report=SolverReport(iterations=3),
                        sensitivity=np.eye(2))
        (p,) = emit_report(fit, "csv", tmp_path / "fit.csv")
        lines = (tmp_path / "fit.csv").read_text().splitlines()
        assert lines[0] == "coordinate,theta_hat,se"
        assert lines[1] == "0,1.5,nan" and len(lines) == 3
        emit_report(fit, "json", tmp_path / "fit.json")
        from gibbsfit import load_fit_report
        assert np.array_equal(load_fit_report(tmp_path / "fit.json").theta_hat,
                              fit.theta_hat)

    def test_godambe_json_and_matrix_files(self, tmp_path):
        rep = GodambeReport(S=np.eye(2), sigma=2 * np.eye(2),
                            godambe=None, inverse_godambe=None,
                            rel_dev=-0.5 * np.eye(2), frobenius_rel_dev=0.5,
                            n_sim=10)
        (p,) = emit_report(rep, "json", tmp_path / "g.json")
        import json
        doc = json.loads((tmp_path / "g.json").read_text())
        assert doc["godambe"] is None and doc["sigma"][0][0] == 2.0
        paths = emit_report(rep, "csv", tmp_path / "g.csv")
        names = sorted(p.split("/")[-1] for p in paths)
        assert names == ["g.S.csv", "g.rel_dev.csv", "g.sigma.csv"]
        assert (tmp_path / "g.S.csv").read_text() == "c0,c1\n1,0\n0,1\n"

    def test_rejects_bad_format_and_type(self, tmp_path):
        with pytest.raises(ConfigError, match="format"):
            emit_report(RmseLike(), "xml", tmp_path / "x")
        with pytest.raises(ConfigError, match="cannot emit"):
            emit_report(RmseLike(), "json", tmp_path / "x")


class RmseLike:
    pass


class TestOutDir:
    def test_out_dir_gets_both_files(self, tmp_path):
        spec = _poisson_spec(out_dir=str(tmp_path / "study"),
                             estimators=("pl",))
        table = run_rmse_study(spec)
        csv_text = (tmp_path / "study" / "rmse.csv").read_text()
        assert csv_text.count("\n") == len(table.rows) + 1
        import json
        doc = json.loads((tmp_path / "study" / "rmse.json").read_text())
        assert doc["n_sim"] == 3 and len(doc["rows"]) == 1
        assert doc["rows"][0]["rmse_so"] is None
