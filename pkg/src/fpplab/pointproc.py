"""Space-time Poisson sampling and the available-space acceptance filter.

A point v appearing at time t survives the filter iff some center x with
|x - v| <= 1 has seen no earlier sample point within distance 1.  Feasibility
is decided exactly on the candidate set {v, circle-circle intersections}; see
``_cover``.  Sampling proceeds slab-by-slab in time until no empty unit disk
remains with center in the saturation region (window grown by margin - 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.spatial import Delaunay, cKDTree
from scipy import sparse

from . import _cover, _cells

DEFAULT_MARGIN = 7.0
_HASH_CS = 2.0  # hash-grid cell size; neighbor radius 2 = one ring
_COVER_CS = 1.0  # coverage-grid cell size
_MAX_SLABS = 2000


@dataclass(frozen=True)
class Window:
    """Axis-aligned simulation window with a sampling margin."""

    lo: tuple[float, float]
    hi: tuple[float, float]
    margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        if not (self.hi[0] > self.lo[0] and self.hi[1] > self.lo[1]):
            raise ValueError("degenerate window: hi must exceed lo coordinatewise")
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")

    @property
    def area(self) -> float:
        return (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])

    def expanded(self, d: float) -> tuple[float, float, float, float]:
        """Bounds (x0, y0, x1, y1) of the window grown by d on every side."""
        return (self.lo[0] - d, self.lo[1] - d, self.hi[0] + d, self.hi[1] + d)

    def contains(self, p, shrink: float = 0.0) -> bool:
        return (self.lo[0] + shrink <= p[0] <= self.hi[0] - shrink
                and self.lo[1] + shrink <= p[1] <= self.hi[1] - shrink)


@dataclass(frozen=True)
class SpaceTimeSample:
    """Finite realization of the driving space-time Poisson process."""

    window: Window
    positions: np.ndarray  # (n, 2) float64
    times: np.ndarray      # (n,) float64, strictly increasing
    rate: float
    seed: int

    def __post_init__(self):
        t = self.times
        if len(t) != len(self.positions):
            raise ValueError("positions/times length mismatch")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("appearance times must be strictly increasing")
        x0, y0, x1, y1 = self.window.expanded(self.window.margin)
        p = self.positions
        if len(p) and not (
            np.all(p[:, 0] >= x0) and np.all(p[:, 0] <= x1)
            and np.all(p[:, 1] >= y0) and np.all(p[:, 1] <= y1)
        ):
            raise ValueError("sample positions outside window plus margin")

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class AcceptedSet:
    """Vertices surviving the available-space filter."""

    window: Window
    vertices: np.ndarray  # (m, 2) float64
    parent_sample_seed: int
    saturated: bool

    def __len__(self) -> int:
        return len(self.vertices)


class _Grids:
    """Hash grid plus coverage grid over a window's sampling region."""

    def __init__(self, window: Window, capacity: int):
        x0, y0, x1, y1 = window.expanded(window.margin + 1.0)
        self.ox, self.oy = x0, y0
        self.nx = max(1, int(np.ceil((x1 - x0) / _HASH_CS)))
        self.ny = max(1, int(np.ceil((y1 - y0) / _HASH_CS)))
        self.head = np.full(self.nx * self.ny, -1, dtype=np.int64)
        self.nxt = np.full(capacity, -1, dtype=np.int64)
        self.anx = max(1, int(np.ceil((x1 - x0) / _COVER_CS)))
        self.any = max(1, int(np.ceil((y1 - y0) / _COVER_CS)))
        self.alive = np.ones(self.anx * self.any, dtype=np.uint8)

    def grow(self, capacity: int):
        if capacity > len(self.nxt):
            nxt = np.full(capacity, -1, dtype=np.int64)
            nxt[: len(self.nxt)] = self.nxt
            self.nxt = nxt

    def hash_args(self, px, py):
        return (px, py, self.ox, self.oy, _HASH_CS, self.nx, self.ny,
                self.head, self.nxt)

    def cover_args(self):
        return (self.ox, self.oy, _COVER_CS, self.anx, self.any, self.alive)


def _saturation_rect(window: Window) -> tuple[float, float, float, float]:
    return window.expanded(window.margin - 1.0)


def sample_space_time(window: Window, rate: float = 1.0, t_slab: float = 1.0,
                      seed: int = 0) -> SpaceTimeSample:
    """Sample the driving process until the saturation region is covered.

    Points arrive in (window + margin) x (0, T]; T grows slab-by-slab until no
    unit disk with center in (window + margin - 1) is empty of sample points.
    Deterministic given (window, rate, t_slab, seed).
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    if t_slab <= 0:
        raise ValueError("t_slab must be positive")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))
    x0, y0, x1, y1 = window.expanded(window.margin)
    area = (x1 - x0) * (y1 - y0)
    mean_per_slab = rate * area * t_slab

    px = np.empty(0, dtype=np.float64)
    py = np.empty(0, dtype=np.float64)
    ts = np.empty(0, dtype=np.float64)
    grids = _Grids(window, capacity=max(1024, int(4 * mean_per_slab)))
    rx0, ry0, rx1, ry1 = _saturation_rect(window)

    for k in range(_MAX_SLABS):
        n = int(rng.poisson(mean_per_slab))
        xs = rng.uniform(x0, x1, n)
        ys = rng.uniform(y0, y1, n)
        tt = k * t_slab + t_slab * np.sort(rng.random(n))
        start = len(px)
        px = np.concatenate([px, xs])
        py = np.concatenate([py, ys])
        ts = np.concatenate([ts, tt])
        grids.grow(len(px))
        _insert_points(px, py, start, len(px), *grids.hash_args(px, py)[2:])
        _cover.kill_sweep(*grids.hash_args(px, py), *grids.cover_args())
        if not _cover.exists_uncovered(*grids.hash_args(px, py),
                                       *grids.cover_args(),
                                       rx0, ry0, rx1, ry1):
            break
    else:
        raise RuntimeError(
            f"saturation not reached after {_MAX_SLABS} slabs; "
            "check rate and window size")

    positions = np.column_stack([px, py])
    return SpaceTimeSample(window=window, positions=positions, times=ts,
                           rate=rate, seed=seed)


@njit(cache=True)
def _insert_points(px, py, start, stop, ox, oy, cs, nx, ny, head, nxt):
    for k in range(start, stop):
        c = _cover._cell_index(px[k], py[k], ox, oy, cs, nx, ny)
        nxt[k] = head[c]
        head[c] = k


def accept(sample: SpaceTimeSample, batch: int | None = None) -> AcceptedSet:
    """Apply the available-space filter to a time-ordered sample.

    Order-stable: the output depends only on the time order of the points,
    never on batch boundaries (the coverage grid is a pure accelerator).
    """
    n = len(sample)
    if batch is None:
        # one coverage sweep per unit of time keeps the accelerator amortized
        x0, y0, x1, y1 = sample.window.expanded(sample.window.margin)
        batch = max(4096, int((x1 - x0) * (y1 - y0)))
    px = np.ascontiguousarray(sample.positions[:, 0])
    py = np.ascontiguousarray(sample.positions[:, 1])
    grids = _Grids(sample.window, capacity=max(1, n))
    accepted = np.zeros(n, dtype=np.bool_)
    for k, start in enumerate(range(0, n, batch)):
        stop = min(n, start + batch)
        _cover.accept_batch(px, py, start, stop,
                            *grids.hash_args(px, py)[2:],
                            *grids.cover_args(), accepted)
        if stop < n:
            _cover.kill_sweep(*grids.hash_args(px, py), *grids.cover_args())
    saturated = not _cover.exists_uncovered(*grids.hash_args(px, py),
                                            *grids.cover_args(),
                                            *_saturation_rect(sample.window))
    return AcceptedSet(window=sample.window,
                       vertices=sample.positions[accepted].copy(),
                       parent_sample_seed=sample.seed,
                       saturated=bool(saturated))


def is_saturated(history: SpaceTimeSample, upto_time: float) -> bool:
    """True iff no empty unit disk remains, counting points with time <= upto_time."""
    mask = history.times <= upto_time
    px = np.ascontiguousarray(history.positions[mask, 0])
    py = np.ascontiguousarray(history.positions[mask, 1])
    grids = _Grids(history.window, capacity=max(1, len(px)))
    _insert_points(px, py, 0, len(px), *grids.hash_args(px, py)[2:])
    return not _cover.exists_uncovered(*grids.hash_args(px, py),
                                       *grids.cover_args(),
                                       *_saturation_rect(history.window))


@dataclass(frozen=True)
class HoleReport:
    max_empty_radius: float
    passed: bool
    center_rect: tuple[float, float, float, float]


def verify_hole_property(accepted: AcceptedSet, trim: float = 0.0) -> HoleReport:
    """Largest empty-circle radius with center in the trimmed window.

    Computed from the clipped Voronoi cells of the accepted vertices: the
    farthest point of a convex cell from its site is a cell vertex, so the
    maximum is attained at a Voronoi vertex, a window-edge crossing, or a
    window corner.
    """
    if not accepted.saturated:
        raise ValueError("hole property is only guaranteed for saturated sets")
    pts = accepted.vertices
    if len(pts) < 3:
        raise ValueError("need at least 3 vertices for a Voronoi diagram")
    w = accepted.window
    rx0, ry0 = w.lo[0] + trim, w.lo[1] + trim
    rx1, ry1 = w.hi[0] - trim, w.hi[1] - trim
    if rx1 <= rx0 or ry1 <= ry0:
        raise ValueError("trim leaves an empty window")
    indptr, indices = _two_ring_neighbors(pts)
    r = _cells.max_cell_radius(
        np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]),
        indptr, indices, rx0, ry0, rx1, ry1)
    return HoleReport(max_empty_radius=float(r), passed=bool(r < 1.0),
                      center_rect=(rx0, ry0, rx1, ry1))


def _two_ring_neighbors(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """CSR adjacency of Delaunay neighbors-of-neighbors.

    The two-ring absorbs any near-degenerate diagonal choice made by the
    triangulation backend, so the clipped cells are metrically correct.
    """
    tri = Delaunay(pts)
    s = tri.simplices
    rows = np.concatenate([s[:, 0], s[:, 1], s[:, 2], s[:, 1], s[:, 2], s[:, 0]])
    cols = np.concatenate([s[:, 1], s[:, 2], s[:, 0], s[:, 0], s[:, 1], s[:, 2]])
    n = len(pts)
    a = sparse.csr_matrix(
        (np.ones(len(rows), dtype=np.uint8), (rows, cols)), shape=(n, n))
    a.data[:] = 1
    two = (a + a @ a).tocsr()
    two.setdiag(0)
    two.eliminate_zeros()
    return two.indptr.astype(np.int64), two.indices.astype(np.int64)


def local_density_counts(accepted: AcceptedSet, radius: float,
                         centers: np.ndarray) -> np.ndarray:
    """Vertex counts of balls B_radius(c) for each center row c."""
    tree = cKDTree(accepted.vertices)
    return np.array([
        len(tree.query_ball_point(c, radius)) for c in np.atleast_2d(centers)
    ])
