"""Shared test oracles."""

import numpy as np

from gibbsfit import (ModelInstance, PointPattern, multiscale_hard_core,
                      pl_estimating_function, poisson, strauss,
                      strauss_hard_core, unit_square)


def xcoord(pts):
    return pts[:, 0]


def random_instance(rng):
    """A random built-in model with random parameters: (instance, config)."""
    kind = rng.integers(0, 4)
    if kind == 0:
        model = poisson(covariate=xcoord if rng.random() < 0.5 else None)
        theta = rng.normal(3.5, 0.5, model.p)
    elif kind == 1:
        model = strauss(float(rng.uniform(0.05, 0.15)))
        theta = [rng.normal(4, 0.5), rng.uniform(-2, 0)]
    elif kind == 2:
        model = strauss_hard_core(0.01, float(rng.uniform(0.05, 0.15)))
        theta = [rng.normal(4, 0.5), rng.uniform(-2, 0.5)]
    else:
        model = multiscale_hard_core(0.01, 0.08, 0.16, covariate=xcoord)
        theta = [rng.normal(3.5, 0.5), rng.normal(0, 0.5),
                 rng.uniform(-2, 0.5), rng.uniform(-0.5, 0.5)]
    n = int(rng.integers(0, 40))
    config = rng.random((n, 2))
    return ModelInstance(model, theta), config


def grid_root(model, x, scheme, theta0, tol=1e-11):
    """Newton (Fisher-scoring) root of the grid-quadrature pseudo-score."""
    theta = np.asarray(theta0, dtype=float).copy()
    for _ in range(80):
        e, S = pl_estimating_function(ModelInstance(model, theta), x, scheme)
        if np.abs(e).max() < tol:
            break
        theta = theta + np.linalg.solve(S, e)
    return theta


def clustered_pattern(rng, n_clusters=10, per_cluster=5, sd=0.005):
    """Tightly clustered pattern (strong empirical attraction)."""
    centers = rng.random((n_clusters, 2)) * 0.8 + 0.1
    pts = centers[:, None, :] + rng.normal(scale=sd, size=(n_clusters, per_cluster, 2))
    return PointPattern(pts.reshape(-1, 2), unit_square())
