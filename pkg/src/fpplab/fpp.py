"""Edge speeds, passage times, geodesics, and block passage times.

Speeds are i.i.d. positive continuous draws attached to edges in canonical
(lexicographic endpoint) order.  The per-edge passage time eta_e * |e| is
rounded to the dyadic grid 2^-26 before any shortest-path work: every partial
sum along a path is then exactly representable in a double (totals stay far
below 2^26 at desk scale), so passage-time identities and inequalities hold
bit-exactly rather than to rounding error.  The statistical perturbation is
below 2^-27 relative, orders of magnitude under every tolerance used here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import dijkstra as _dijkstra

from .geom import AcceptedGraph, cell_of

_QUANTUM = 2.0 ** -26


class DisconnectedError(RuntimeError):
    """Raised when no path joins the requested endpoints."""


@dataclass(frozen=True)
class SpeedField:
    """Per-edge positive speeds with the derived quantized edge times."""

    distribution: str
    params: tuple[float, ...]
    seed: int
    speeds: np.ndarray        # (e,) raw draws eta_e > 0
    edge_time: np.ndarray     # (e,) quantized eta_e * |e|

    def __len__(self) -> int:
        return len(self.speeds)


def _parse_distribution(name) -> tuple[str, tuple[float, ...]]:
    if isinstance(name, (tuple, list)):
        kind, params = name[0], tuple(float(p) for p in name[1])
        return str(kind), params
    text = str(name)
    if ":" in text:
        kind, _, rest = text.partition(":")
        params = tuple(float(p) for p in rest.split(",") if p)
    elif "(" in text and text.endswith(")"):
        kind, _, rest = text.partition("(")
        params = tuple(float(p) for p in rest[:-1].split(",") if p)
    else:
        kind, params = text, ()
    kind = kind.strip().lower()
    aliases = {"exp": "exponential", "exponential": "exponential",
               "half_normal": "half_normal", "halfnormal": "half_normal",
               "uniform": "uniform"}
    if kind not in aliases:
        raise ValueError(f"unknown speed distribution {name!r}")
    return aliases[kind], params


def sample_speeds(graph: AcceptedGraph, distribution="exponential:1.0",
                  seed: int = 0) -> SpeedField:
    """Draw i.i.d. edge speeds; deterministic per (seed, canonical edge index)."""
    kind, params = _parse_distribution(distribution)
    n = graph.n_edges
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))
    if kind == "exponential":
        mean = params[0] if params else 1.0
        if mean <= 0:
            raise ValueError("exponential mean must be positive")
        speeds = rng.exponential(mean, n)
    elif kind == "half_normal":
        scale = params[0] if params else 1.0
        if scale <= 0:
            raise ValueError("half_normal scale must be positive")
        speeds = np.abs(rng.normal(0.0, scale, n))
    elif kind == "uniform":
        if len(params) != 2:
            raise ValueError("uniform requires (a, b)")
        a, b = params
        if not (0.0 <= a < b):
            raise ValueError("uniform requires 0 <= a < b")
        speeds = rng.uniform(a, b, n)
    else:  # pragma: no cover
        raise ValueError(kind)
    if np.any(speeds <= 0.0):
        # probability-zero event for the menu above; keep determinism by a
        # fixed nudge rather than redrawing
        speeds = np.maximum(speeds, _QUANTUM)
    edge_time = np.round(speeds * graph.edge_length / _QUANTUM) * _QUANTUM
    edge_time = np.maximum(edge_time, _QUANTUM)
    return SpeedField(distribution=kind, params=tuple(params), seed=seed,
                      speeds=speeds, edge_time=edge_time)


@dataclass(frozen=True)
class GeodesicResult:
    x: np.ndarray            # query endpoint (position)
    y: np.ndarray
    source: int              # phi(x), site index
    target: int              # phi(y)
    T: float
    path: np.ndarray         # site indices from source to target
    wandering: float         # max over path vertices of distance to line xy
    censored: bool

    def path_positions(self, graph: AcceptedGraph) -> np.ndarray:
        return graph.vertices[self.path]


@dataclass(frozen=True)
class GridMap:
    """Cubical partition of the plane with spacing q in [4, 5]."""

    q: float = 4.5
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (4.0 <= self.q <= 5.0):
            raise ValueError("grid spacing q must lie in [4, 5]")

    def nearest(self, p) -> tuple[float, float]:
        """psi_q(p): the grid point nearest to p (half-open tie rule)."""
        gx = self.origin[0] + self.q * np.floor((p[0] - self.origin[0]) / self.q + 0.5)
        gy = self.origin[1] + self.q * np.floor((p[1] - self.origin[1]) / self.q + 0.5)
        return (float(gx), float(gy))

    def cube_sites(self, graph: AcceptedGraph, u) -> np.ndarray:
        """Indices of sites in the cube F_u = u + [-q/2, q/2)^2."""
        h = 0.5 * self.q
        v = graph.vertices
        m = ((v[:, 0] >= u[0] - h) & (v[:, 0] < u[0] + h)
             & (v[:, 1] >= u[1] - h) & (v[:, 1] < u[1] + h))
        return np.nonzero(m)[0]


def shortest_path_tree(graph: AcceptedGraph, speeds: SpeedField, source: int):
    """Single-source sweep: (dist, predecessors) under quantized edge times.

    Passage times always run on the core-window restriction of the graph;
    see AcceptedGraph.csr.
    """
    g = graph.csr(weights=speeds.edge_time, core_only=True)
    dist, pred = _dijkstra(g, directed=False, indices=source,
                           return_predecessors=True)
    return dist, pred


def extract_path(pred: np.ndarray, source: int, target: int) -> np.ndarray:
    path = [target]
    k = target
    while k != source:
        k = pred[k]
        if k < 0:
            raise DisconnectedError(f"no path to vertex {target}")
        path.append(int(k))
    return np.array(path[::-1], dtype=np.int64)


def _line_distances(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    nrm = np.hypot(*d)
    if nrm == 0.0:
        return np.hypot(points[:, 0] - a[0], points[:, 1] - a[1])
    return np.abs((points[:, 0] - a[0]) * d[1] - (points[:, 1] - a[1]) * d[0]) / nrm


def is_censored(graph: AcceptedGraph, path_pos: np.ndarray, buffer: float = 2.0) -> bool:
    w = graph.window
    return bool(np.any(
        (path_pos[:, 0] < w.lo[0] + buffer) | (path_pos[:, 0] > w.hi[0] - buffer)
        | (path_pos[:, 1] < w.lo[1] + buffer) | (path_pos[:, 1] > w.hi[1] - buffer)))


def passage_time(graph: AcceptedGraph, speeds: SpeedField, x, y,
                 tree=None) -> GeodesicResult:
    """T(x, y) = T(phi(x), phi(y)) with the geodesic and wandering statistics.

    ``tree`` may carry a precomputed (dist, pred, source) triple to reuse one
    sweep across many targets.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    src = cell_of(graph, x)
    tgt = cell_of(graph, y)
    if tree is not None:
        dist, pred, tree_src = tree
        if tree_src != src:
            raise ValueError("tree source does not match phi(x)")
    else:
        dist, pred = shortest_path_tree(graph, speeds, src)
    if src == tgt:
        return GeodesicResult(x=x, y=y, source=src, target=tgt, T=0.0,
                              path=np.array([src], dtype=np.int64),
                              wandering=0.0,
                              censored=is_censored(graph, graph.vertices[[src]]))
    if not np.isfinite(dist[tgt]):
        raise DisconnectedError(f"vertices {src} and {tgt} are disconnected")
    path = extract_path(pred, src, tgt)
    pos = graph.vertices[path]
    wander = float(np.max(_line_distances(pos, x, y)))
    return GeodesicResult(x=x, y=y, source=src, target=tgt,
                          T=float(dist[tgt]), path=path, wandering=wander,
                          censored=is_censored(graph, pos))


def t_hat(graph: AcceptedGraph, speeds: SpeedField, gridmap: GridMap,
          u, v) -> float:
    """Block passage time: min T(y, z) over sites y in F_u, z in F_v."""
    su = gridmap.cube_sites(graph, u)
    sv = gridmap.cube_sites(graph, v)
    if len(su) == 0 or len(sv) == 0:
        raise ValueError("grid cube contains no site (window trimmed too far)")
    if u == v or (len(su) == len(sv) and np.array_equal(su, sv)):
        return 0.0
    g = graph.csr(weights=speeds.edge_time, core_only=True)
    dist = _dijkstra(g, directed=False, indices=su, min_only=True)
    val = float(np.min(dist[sv]))
    if not np.isfinite(val):
        raise DisconnectedError("cubes are disconnected")
    return val


def big_m(graph: AcceptedGraph, speeds: SpeedField, gridmap: GridMap, u) -> float:
    """M(u) = max T(y, z) over site pairs y, z in the cube F_u."""
    su = gridmap.cube_sites(graph, u)
    if len(su) == 0:
        raise ValueError("grid cube contains no site")
    if len(su) == 1:
        return 0.0
    g = graph.csr(weights=speeds.edge_time, core_only=True)
    dist = _dijkstra(g, directed=False, indices=su)
    sub = dist[:, su]
    val = float(np.max(sub))
    if not np.isfinite(val):
        raise DisconnectedError("cube is internally disconnected")
    return val


def entry_point(result: GeodesicResult, graph: AcceptedGraph, s: float):
    """First path vertex with first coordinate >= s, scanning from the x end.

    Returns the site index, or None when the geodesic never enters H_s^+.
    """
    pos = graph.vertices[result.path]
    hits = np.nonzero(pos[:, 0] >= s)[0]
    if len(hits) == 0:
        return None
    return int(result.path[hits[0]])
