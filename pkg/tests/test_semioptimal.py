"""Fredholm solver, Nystrom extension, and the semi-optimal fit."""

import time

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from gibbsfit import (ConfigError, ModelInstance, NotPositiveDefiniteError,
                      PointPattern, conditional_intensity, interaction_ratio,
                      make_grid, pl_estimating_function, poisson, pseudo_score,
                      strauss, strauss_hard_core, unit_square)
from gibbsfit.pseudolikelihood import LogisticFitConfig, fit_logistic_pl
from gibbsfit.semioptimal import (SemiOptimalConfig, build_kernel_matrix,
                                  fit_semi_optimal, nystrom_extend,
                                  semi_optimal_ef, solve_semi_optimal)
from gibbsfit.simulate import SamplerConfig, sample_gibbs
from helpers import clustered_pattern, grid_root


def dense_kernel(inst, y, scheme):
    """Brute-force symmetrized kernel matrix, entry by entry."""
    model = inst.model
    nodes = scheme.nodes
    m = scheme.m
    lam = conditional_intensity(inst, nodes, y.coords if hasattr(y, "coords") else y)
    sw = np.sqrt(scheme.weights)
    T = np.zeros((m, m))
    dist = cdist(nodes, nodes)
    for i in range(m):
        for j in range(m):
            if dist[i, j] >= model.range or lam[i] == 0.0 or lam[j] == 0.0:
                continue
            r = interaction_ratio(inst, nodes[i], nodes[j],
                                  clamp=model.kernel_clamp)
            T[i, j] = sw[i] * sw[j] * np.sqrt(lam[i] * lam[j]) * (1.0 - r)
    return T, lam


@pytest.fixture(scope="module")
def strauss_data():
    inst = ModelInstance(strauss(0.08), [np.log(100), np.log(0.2)])
    x = sample_gibbs(inst, unit_square(), SamplerConfig(seed=2024))
    return inst, x


class TestPoissonReduction:
    def test_node_values_equal_stats_exactly(self, rng):
        x = PointPattern(rng.random((60, 2)), unit_square())
        inst = ModelInstance(poisson(), [np.log(60.0)])
        sol = solve_semi_optimal(inst, x, make_grid(x.window, 30, 30))
        # lambda1/lambda simplifies to t(u_j, x); the kernel is identically
        # zero, so the solve must reproduce it bit for bit
        assert np.array_equal(sol.node_values, sol.node_stats)

    def test_kernel_matrix_zero(self, rng):
        x = PointPattern(rng.random((20, 2)), unit_square())
        inst = ModelInstance(poisson(), [1.0])
        K = build_kernel_matrix(inst, x, make_grid(x.window, 20, 20))
        assert K.nnz == 0

    def test_ef_equals_pseudo_score(self, rng):
        x = PointPattern(rng.random((50, 2)), unit_square())
        inst = ModelInstance(poisson(), [np.log(40.0)])
        scheme = make_grid(x.window, 25, 25)
        value, S, report = semi_optimal_ef(inst, x, scheme)
        e_pl, S_pl = pl_estimating_function(inst, x, scheme)
        assert np.allclose(value, e_pl, atol=1e-10)
        assert np.allclose(S, S_pl, atol=1e-10)
        assert report.positive_definite

    def test_extend_returns_stats_everywhere(self, rng):
        x = PointPattern(rng.random((30, 2)), unit_square())
        inst = ModelInstance(poisson(), [2.0])
        sol = solve_semi_optimal(inst, x, make_grid(x.window, 15, 15))
        for _ in range(10):
            u = rng.random(2)
            assert np.array_equal(nystrom_extend(sol, inst, u),
                                  inst.model.stats(u[None, :], x.coords)[0])

    def test_empty_pattern_value(self):
        x = PointPattern(np.zeros((0, 2)), unit_square())
        inst = ModelInstance(poisson(), [np.log(100.0)])
        scheme = make_grid(x.window, 50, 50)
        value, _, _ = semi_optimal_ef(inst, x, scheme)
        assert value[0] == pytest.approx(-100.0 * x.window.area, rel=1e-12)


class TestDenseOracle:
    def test_matrix_matches_brute_force(self, strauss_data):
        inst, x = strauss_data
        scheme = make_grid(x.window, 10, 10)
        K = build_kernel_matrix(inst, x, scheme).toarray()
        T, _ = dense_kernel(inst, x, scheme)
        assert np.abs(K - T).max() <= 1e-12

    def test_solution_matches_dense_solve(self, strauss_data):
        inst, x = strauss_data
        scheme = make_grid(x.window, 10, 10)
        sol = solve_semi_optimal(inst, x, scheme)
        T, lam = dense_kernel(inst, x, scheme)
        s = np.sqrt(scheme.weights * lam)
        ell = s[:, None] * inst.model.stats(scheme.nodes, x.coords)
        Z = np.linalg.solve(np.eye(scheme.m) + T, ell)
        phi = np.divide(Z, s[:, None], out=np.zeros_like(Z),
                        where=s[:, None] > 0)
        assert np.abs(sol.node_values - phi).max() <= 1e-8

    def test_sparsity_pattern_is_range_neighborhood(self, strauss_data):
        inst, x = strauss_data
        scheme = make_grid(x.window, 10, 10)
        K = build_kernel_matrix(inst, x, scheme).toarray()
        dist = cdist(scheme.nodes, scheme.nodes)
        assert (K[dist >= inst.model.range] == 0).all()
        # gamma < 1 and lambda > 0 everywhere: every within-range pair stored
        assert (K[dist < inst.model.range] > 0).all()

    def test_bitwise_symmetry(self, strauss_data):
        inst, x = strauss_data
        K = build_kernel_matrix(inst, x, make_grid(x.window, 25, 25))
        assert (K != K.T).nnz == 0


class TestSolverContracts:
    def test_residual(self, strauss_data):
        inst, x = strauss_data
        scheme = make_grid(x.window, 25, 25)
        sol = solve_semi_optimal(inst, x, scheme)
        K = build_kernel_matrix(inst, x, scheme)
        s = np.sqrt(scheme.weights * sol.node_lambda)
        Z = s[:, None] * sol.node_values
        ell = s[:, None] * sol.node_stats
        resid = Z + K @ Z - ell
        assert np.abs(resid).max() <= 1e-10 * np.abs(ell).max()

    def test_node_consistency(self, strauss_data, rng):
        inst, x = strauss_data
        scheme = make_grid(x.window, 25, 25)
        sol = solve_semi_optimal(inst, x, scheme)
        for i in rng.choice(scheme.m, size=20, replace=False):
            ext = nystrom_extend(sol, inst, scheme.nodes[i])
            ref = sol.node_values[i]
            assert np.abs(ext - ref).max() <= 1e-8 * (1.0 + np.abs(ref).max())

    def test_blocked_nodes_zero(self):
        x = PointPattern([[0.5, 0.5]], unit_square())
        inst = ModelInstance(strauss_hard_core(0.05, 0.1), [np.log(50), -0.5])
        scheme = make_grid(x.window, 50, 50)
        sol = solve_semi_optimal(inst, x, scheme)
        blocked = sol.node_lambda == 0.0
        assert blocked.sum() > 0
        assert (sol.node_values[blocked] == 0.0).all()
        # extension at a blocked location is the zero vector
        assert np.array_equal(nystrom_extend(sol, inst, np.array([0.5, 0.51])),
                              np.zeros(2))

    def test_extension_beyond_range_of_nodes(self):
        # R smaller than half the node spacing: the kernel sum at a cell
        # corner is empty and the extension is t(u, y) exactly
        x = PointPattern([[0.825, 0.825]], unit_square())
        inst = ModelInstance(strauss(0.01), [np.log(10), -0.3])
        scheme = make_grid(x.window, 20, 20)
        sol = solve_semi_optimal(inst, x, scheme)
        u = np.array([0.1, 0.1])  # corner of four cells
        assert np.array_equal(nystrom_extend(sol, inst, u),
                              inst.model.stats(u[None, :], x.coords)[0])

    def test_not_positive_definite_raises(self, rng):
        x = clustered_pattern(rng)
        inst = ModelInstance(strauss(0.08), [np.log(100), 1.5])
        with pytest.raises(NotPositiveDefiniteError):
            solve_semi_optimal(inst, x, make_grid(x.window, 30, 30))

    def test_infeasible_pattern_rejected(self):
        x = PointPattern([[0.5, 0.5], [0.5, 0.52]], unit_square())
        inst = ModelInstance(strauss_hard_core(0.05, 0.1), [1.0, -0.5])
        with pytest.raises(ConfigError):
            semi_optimal_ef(inst, x, make_grid(x.window, 20, 20))


class TestFit:
    def test_poisson_two_iterations_and_grid_root(self, rng):
        x = PointPattern(rng.random((100, 2)), unit_square())
        scheme = make_grid(x.window, 40, 40)
        fit = fit_semi_optimal(poisson(), x, scheme)
        assert fit.method == "semi-optimal"
        assert fit.report.iterations <= 2
        oracle = grid_root(poisson(), x, scheme, [np.log(100.0)])
        assert np.abs(fit.theta_hat - oracle).max() <= 1e-6

    def test_strauss_fit_converges(self, strauss_data):
        inst, x = strauss_data
        fit = fit_semi_optimal(inst.model, x, make_grid(x.window, 50, 50))
        assert fit.method == "semi-optimal"
        assert fit.report.fallback_used is None
        assert fit.report.positive_definite
        assert np.isfinite(fit.theta_hat).all()
        # estimates in the right neighborhood of the truth
        assert np.abs(fit.theta_hat - inst.theta).max() < 1.5

    def test_deterministic(self, strauss_data):
        inst, x = strauss_data
        scheme = make_grid(x.window, 30, 30)
        a = fit_semi_optimal(inst.model, x, scheme)
        b = fit_semi_optimal(inst.model, x, scheme)
        assert np.array_equal(a.theta_hat, b.theta_hat)

    def test_grid_refinement_stability(self, strauss_data):
        inst, x = strauss_data
        f50 = fit_semi_optimal(inst.model, x, make_grid(x.window, 50, 50))
        f75 = fit_semi_optimal(inst.model, x, make_grid(x.window, 75, 75))
        rel = np.abs(f75.theta_hat - f50.theta_hat) / np.abs(f50.theta_hat)
        assert rel.max() <= 0.05

    def test_clamp_fallback_on_attractive_data(self, rng):
        x = clustered_pattern(rng)
        scheme = make_grid(x.window, 30, 30)
        fit = fit_semi_optimal(strauss(0.08), x, scheme)
        assert fit.report.fallback_used == "kernel-clamp"
        assert fit.method == "semi-optimal"
        # with the clamp active the kernel vanishes (theta2 > 0), so the fit
        # solves the grid pseudo-score
        pl_theta = fit_logistic_pl(strauss(0.08), x).theta_hat
        assert fit.theta_hat[1] > 0  # data really is attractive
        oracle = grid_root(strauss(0.08), x, scheme, pl_theta)
        assert np.abs(fit.theta_hat - oracle).max() <= 1e-5

    def test_pl_fallback_policy(self, rng):
        x = clustered_pattern(rng)
        scheme = make_grid(x.window, 30, 30)
        cfg = SemiOptimalConfig(fallback="pl")
        fit = fit_semi_optimal(strauss(0.08), x, scheme, cfg)
        assert fit.method == "pl"
        assert fit.report.fallback_used == "pl-estimate"
        assert not fit.report.positive_definite
        assert np.array_equal(fit.theta_hat,
                              fit_logistic_pl(strauss(0.08), x).theta_hat)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            SemiOptimalConfig(max_iter=0)
        with pytest.raises(ConfigError):
            SemiOptimalConfig(tol=-1.0)
        with pytest.raises(ConfigError):
            SemiOptimalConfig(fallback="never")


class TestComplexitySmoke:
    def test_wider_range_costs_more(self, strauss_data):
        _, x = strauss_data
        scheme = make_grid(x.window, 50, 50)

        def ef_time(r):
            model = strauss(r)
            inst = ModelInstance(model, [np.log(100), np.log(0.5)])
            best = np.inf
            for _ in range(3):
                t0 = time.perf_counter()
                semi_optimal_ef(inst, x, scheme)
                best = min(best, time.perf_counter() - t0)
            return best

        assert ef_time(0.12) > ef_time(0.04)
