"""Windows, point patterns, covariate rasters, and neighbour counting."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist, pdist


def as_points(points):
    """Coerce to an (n, 2) float array; a single (x, y) pair becomes one row."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        if pts.size == 0:
            return np.zeros((0, 2))
        if pts.size != 2:
            raise ValueError("a point needs exactly two coordinates")
        pts = pts.reshape(1, 2)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"expected (n, 2) coordinates, got shape {np.shape(points)}")
    return pts


def _cell_indices(x, y, xmin, ymin, width, height, nx, ny):
    """Raster (row, col) of the cell containing each point, row 0 = top strip."""
    col = np.clip(np.floor((x - xmin) / width * nx).astype(int), 0, nx - 1)
    iy = np.clip(np.floor((y - ymin) / height * ny).astype(int), 0, ny - 1)
    return ny - 1 - iy, col


class Window:
    """Axis-aligned rectangle, optionally restricted by a boolean cell mask.

    The mask is raster-ordered: row 0 covers the top strip of the rectangle
    (largest y values), matching the ASCII grid file layout.  A point belongs
    to the window when it lies in the rectangle and, if a mask is present, the
    cell containing it is included; there is no sub-cell geometry.
    """

    def __init__(self, xmin, xmax, ymin, ymax, mask=None):
        bounds = np.array([xmin, xmax, ymin, ymax], dtype=float)
        if not np.isfinite(bounds).all():
            raise ValueError("window bounds must be finite")
        if bounds[1] <= bounds[0] or bounds[3] <= bounds[2]:
            raise ValueError("window must have xmax > xmin and ymax > ymin")
        self.xmin, self.xmax, self.ymin, self.ymax = bounds
        if mask is not None:
            mask = np.array(mask, dtype=bool)
            if mask.ndim != 2 or mask.size == 0:
                raise ValueError("mask must be a non-empty 2-d boolean raster")
            if not mask.any():
                raise ValueError("mask excludes every cell")
            mask.setflags(write=False)
        self.mask = mask

    @property
    def bounds(self):
        return (self.xmin, self.xmax, self.ymin, self.ymax)

    @property
    def width(self):
        return self.xmax - self.xmin

    @property
    def height(self):
        return self.ymax - self.ymin

    @property
    def area(self):
        """Rectangle area times the included-cell fraction of the mask."""
        full = self.width * self.height
        if self.mask is None:
            return full
        return full * self.mask.mean()

    def contains(self, points):
        """Boolean array: which points lie inside the window."""
        pts = as_points(points)
        x, y = pts[:, 0], pts[:, 1]
        inside = (x >= self.xmin) & (x <= self.xmax) & (y >= self.ymin) & (y <= self.ymax)
        if self.mask is not None and inside.any():
            ny, nx = self.mask.shape
            row, col = _cell_indices(x, y, self.xmin, self.ymin, self.width, self.height, nx, ny)
            inside &= self.mask[row, col]
        return inside

    def __repr__(self):
        masked = "" if self.mask is None else f", mask {self.mask.shape}"
        return (f"Window([{self.xmin:g}, {self.xmax:g}] x "
                f"[{self.ymin:g}, {self.ymax:g}]{masked})")


def unit_square():
    return Window(0.0, 1.0, 0.0, 1.0)


class PointPattern:
    """Immutable finite planar point pattern with its observation window.

    Every point must lie inside the window; exact duplicate coordinates are
    rejected (hard-core densities vanish on duplicates and simulation never
    produces them).
    """

    def __init__(self, coords, window):
        pts = as_points(coords)
        if not np.isfinite(pts).all():
            raise ValueError("point coordinates must be finite")
        if not isinstance(window, Window):
            raise TypeError("window must be a Window")
        inside = window.contains(pts)
        if not inside.all():
            raise ValueError(f"{int((~inside).sum())} point(s) outside the window")
        if len(pts) > 1:
            order = np.lexsort((pts[:, 1], pts[:, 0]))
            diffs = np.diff(pts[order], axis=0)
            if np.any(np.all(diffs == 0.0, axis=1)):
                raise ValueError("duplicate points are not allowed")
        pts = pts.copy()
        pts.setflags(write=False)
        self.coords = pts
        self.window = window

    @property
    def n(self):
        return len(self.coords)

    def __len__(self):
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)

    def __repr__(self):
        return f"PointPattern(n={self.n}, {self.window!r})"


def _coords_of(y):
    if isinstance(y, PointPattern):
        return y.coords
    return as_points(y)


def count_neighbors(u, y, lo, hi):
    """Number of points v of y with lo <= |u - v| < hi (closed-open band)."""
    if not (0 <= lo < hi):
        raise ValueError("need 0 <= lo < hi")
    coords = _coords_of(y)
    if len(coords) == 0:
        return 0
    d2 = cdist(as_points(u), coords, "sqeuclidean")[0]
    return int(((d2 >= lo * lo) & (d2 < hi * hi)).sum())


def pair_count(y, r):
    """Number of unordered pairs of y at distance strictly less than r."""
    if r <= 0:
        raise ValueError("need r > 0")
    coords = _coords_of(y)
    if len(coords) < 2:
        return 0
    return int((pdist(coords, "sqeuclidean") < r * r).sum())


def min_interpoint_distance(y):
    """Smallest pairwise distance, or None for fewer than two points."""
    coords = _coords_of(y)
    if len(coords) < 2:
        return None
    return float(np.sqrt(pdist(coords, "sqeuclidean").min()))


class CovariateField:
    """Real-valued raster over a rectangle with containing-cell lookup.

    Row 0 of the raster covers the top strip (largest y).  Lookup outside the
    rectangle clips to the nearest edge cell.  Instances are callable on
    (n, 2) coordinate arrays, so they can be used directly as model covariates.
    """

    def __init__(self, values, xmin, xmax, ymin, ymax):
        vals = np.array(values, dtype=float)
        if vals.ndim != 2 or vals.size == 0:
            raise ValueError("raster must be a non-empty 2-d array")
        if not np.isfinite(vals).all():
            raise ValueError("raster values must be finite")
        if xmax <= xmin or ymax <= ymin:
            raise ValueError("raster rectangle must have positive extent")
        vals.setflags(write=False)
        self.values = vals
        self.xmin, self.xmax, self.ymin, self.ymax = map(float, (xmin, xmax, ymin, ymax))

    def value_at(self, points):
        pts = as_points(points)
        ny, nx = self.values.shape
        row, col = _cell_indices(pts[:, 0], pts[:, 1], self.xmin, self.ymin,
                                 self.xmax - self.xmin, self.ymax - self.ymin, nx, ny)
        return self.values[row, col]

    def __call__(self, points):
        return self.value_at(points)
