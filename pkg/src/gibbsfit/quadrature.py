"""Grid quadrature over windows and stratified dummy points."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .geometry import Window


class QuadratureGrid:
    """Midpoint quadrature on the cells of a regular nx-by-ny subdivision.

    Nodes are the centers of cells whose center lies inside the window, listed
    row-major from the bottom-left corner (x fastest); each node carries the
    full cell area as its weight.
    """

    def __init__(self, window, nx, ny):
        if not isinstance(window, Window):
            raise TypeError("window must be a Window")
        nx, ny = int(nx), int(ny)
        if nx < 1 or ny < 1:
            raise ConfigError("grid dimensions must be >= 1")
        sx = window.width / nx
        sy = window.height / ny
        xs = window.xmin + (np.arange(nx) + 0.5) * sx
        ys = window.ymin + (np.arange(ny) + 0.5) * sy
        gx, gy = np.meshgrid(xs, ys)
        nodes = np.column_stack([gx.ravel(), gy.ravel()])
        keep = window.contains(nodes)
        if not keep.any():
            raise ConfigError("quadrature grid is empty: every cell center is masked out")
        nodes = nodes[keep]
        nodes.setflags(write=False)
        self.nodes = nodes
        self.weights = np.full(len(nodes), sx * sy)
        self.weights.setflags(write=False)
        self.grid_dims = (nx, ny)
        self.cell = (sx, sy)
        self.window = window

    @property
    def m(self):
        return len(self.nodes)

    def __repr__(self):
        nx, ny = self.grid_dims
        return f"QuadratureGrid({nx}x{ny}, m={self.m})"


def make_grid(window, nx, ny):
    """Deterministic cell-center quadrature scheme for window integrals."""
    return QuadratureGrid(window, nx, ny)


def make_grid_cell_size(window, cell_size):
    """Grid with approximately square cells of the given side length."""
    if cell_size <= 0:
        raise ConfigError("cell size must be positive")
    nx = max(1, round(window.width / cell_size))
    ny = max(1, round(window.height / cell_size))
    return QuadratureGrid(window, nx, ny)


@dataclass(frozen=True)
class DummyPattern:
    """Stratified dummy points with their intensity (points per unit area)."""

    points: np.ndarray
    rho: float


def make_stratified_dummy(window, nx, ny, seed=0):
    """One uniformly placed point per included cell; rho = 1 / cell area.

    Cell inclusion follows the quadrature rule (cell center inside the
    window), so the same seed always yields the same pattern.
    """
    grid = QuadratureGrid(window, nx, ny)
    sx, sy = grid.cell
    rng = np.random.default_rng(seed)
    offsets = (rng.random((grid.m, 2)) - 0.5) * np.array([sx, sy])
    return DummyPattern(points=grid.nodes + offsets, rho=1.0 / (sx * sy))


def integrate(scheme, f):
    """Riemann sum sum_j w_j f(u_j); f maps an (m, 2) array to (m,) or (m, k)."""
    vals = np.asarray(f(scheme.nodes), dtype=float)
    if vals.ndim == 1:
        return float(scheme.weights @ vals)
    return scheme.weights @ vals
