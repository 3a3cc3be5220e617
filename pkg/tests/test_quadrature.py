"""Quadrature grids, stratified dummies, and window integration."""

import numpy as np
import pytest

from gibbsfit import (ConfigError, Window, integrate, make_grid,
                      make_grid_cell_size, make_stratified_dummy, unit_square)


class TestMakeGrid:
    def test_unit_square_50(self):
        g = make_grid(unit_square(), 50, 50)
        assert g.m == 2500
        assert np.allclose(g.weights, 4e-4)
        assert g.weights.sum() == pytest.approx(1.0)

    def test_single_cell(self):
        g = make_grid(unit_square(), 1, 1)
        assert g.m == 1
        assert g.nodes[0].tolist() == [0.5, 0.5]
        assert g.weights[0] == pytest.approx(1.0)

    def test_half_masked(self):
        mask = np.array([[1, 0], [1, 0]], dtype=bool)
        g = make_grid(Window(0, 1, 0, 1, mask=mask), 2, 2)
        assert g.m == 2
        assert g.weights.sum() == pytest.approx(0.5)
        assert (g.nodes[:, 0] == 0.25).all()

    def test_node_order_row_major_bottom_up(self):
        g = make_grid(unit_square(), 3, 2)
        # x varies fastest, y increases with node index
        assert np.allclose(g.nodes[:3, 1], 0.25)
        assert np.allclose(g.nodes[3:, 1], 0.75)
        assert np.allclose(g.nodes[:3, 0], [1 / 6, 0.5, 5 / 6])

    def test_empty_grid_is_error(self):
        # mask includes only the top-right corner; a 1x1 grid centers at the
        # middle, which is excluded
        mask = np.zeros((8, 8), dtype=bool)
        mask[0, 7] = True
        with pytest.raises(ConfigError):
            make_grid(Window(0, 1, 0, 1, mask=mask), 1, 1)

    def test_cell_size_variant(self):
        g = make_grid_cell_size(Window(0, 2, 0, 1), 0.1)
        assert g.grid_dims == (20, 10)


class TestStratifiedDummy:
    def test_one_point_per_cell(self):
        d = make_stratified_dummy(unit_square(), 50, 50, seed=3)
        assert len(d.points) == 2500
        assert d.rho == pytest.approx(2500.0)
        # exactly one point in every cell
        ix = np.floor(d.points[:, 0] * 50).astype(int)
        iy = np.floor(d.points[:, 1] * 50).astype(int)
        cells = set(zip(ix.tolist(), iy.tolist()))
        assert len(cells) == 2500

    def test_deterministic(self):
        a = make_stratified_dummy(unit_square(), 20, 20, seed=11)
        b = make_stratified_dummy(unit_square(), 20, 20, seed=11)
        assert np.array_equal(a.points, b.points)

    def test_masked_cells_skipped(self):
        mask = np.array([[1, 0], [1, 0]], dtype=bool)
        d = make_stratified_dummy(Window(0, 1, 0, 1, mask=mask), 2, 2, seed=0)
        assert len(d.points) == 2
        assert (d.points[:, 0] < 0.5).all()
        assert d.rho == pytest.approx(4.0)


class TestIntegrate:
    def test_constant(self):
        g = make_grid(unit_square(), 50, 50)
        assert integrate(g, lambda pts: np.ones(len(pts))) == pytest.approx(1.0)

    def test_linear_exact(self):
        g = make_grid(unit_square(), 7, 9)
        assert integrate(g, lambda pts: pts[:, 0]) == pytest.approx(0.5, abs=1e-12)
        assert integrate(g, lambda pts: 2 * pts[:, 0] - 3 * pts[:, 1]) == pytest.approx(-0.5, abs=1e-12)

    def test_vector_valued(self):
        g = make_grid(unit_square(), 10, 10)
        out = integrate(g, lambda pts: np.column_stack([np.ones(len(pts)), pts[:, 1]]))
        assert out.shape == (2,)
        assert out[0] == pytest.approx(1.0)
        assert out[1] == pytest.approx(0.5, abs=1e-12)

    def test_refinement_converges(self):
        # Lipschitz but non-affine integrand: error shrinks with the cell size
        f = lambda pts: np.abs(pts[:, 0] - 0.37) + np.sin(3 * pts[:, 1])
        exact = integrate(make_grid(unit_square(), 400, 400), f)
        coarse = integrate(make_grid(unit_square(), 25, 25), f)
        fine = integrate(make_grid(unit_square(), 50, 50), f)
        assert abs(fine - exact) < abs(coarse - exact) + 1e-12
        assert abs(fine - exact) < 1e-3
