"""Constructive dilation paths and empirical graph dilation.

The straight segment between two sites crosses a sequence of Voronoi cells;
hopping greedily between cell centers, moving on as soon as the next entry
point is more than delta_g away, yields a graph path whose Euclidean length
is at most (3 + 2 delta_g) / delta_g times the straight-line distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import dijkstra as _dijkstra

from .geom import AcceptedGraph

_T_EPS = 1e-12  # parameter-space tolerance for grazing crossings


@dataclass(frozen=True)
class CellWalk:
    sites: np.ndarray         # cell sequence x_0 .. x_m (site indices)
    entries: np.ndarray       # (m+1, 2): a_j = first point of Q_{x_j} on the segment; a_m = y


@dataclass(frozen=True)
class DilationPath:
    x: int
    y: int
    cell_walk: np.ndarray
    entry_points: np.ndarray
    selected: np.ndarray      # indices j(0) < ... < j(l) into the walk
    path: np.ndarray          # site sequence x_{j(0)} .. x_{j(l)}
    euclidean_length: float

    def ratio(self, graph: AcceptedGraph) -> float:
        a = graph.vertices[self.x]
        b = graph.vertices[self.y]
        return self.euclidean_length / float(np.hypot(*(b - a)))


def dilation_bound(delta_g: float) -> float:
    return (3.0 + 2.0 * delta_g) / delta_g


def segment_cell_walk(graph: AcceptedGraph, x: int, y: int) -> CellWalk:
    """Cells crossed by the open segment from site x to site y, in order.

    Cells met in a single point (within parameter tolerance) are skipped;
    such grazing contacts have probability zero.
    """
    if graph.triangulation is None:
        raise ValueError("graph carries no triangulation (rebuild required)")
    w = graph.window
    a = graph.vertices[x]
    b = graph.vertices[y]
    if not (w.contains(a) and w.contains(b)):
        raise ValueError("segment endpoints must lie in the core window")
    if x == y:
        raise ValueError("endpoints must differ")
    indptr, indices = graph.triangulation.adjacency_csr()
    verts = graph.vertices
    seg = b - a

    sites = [x]
    entries = [a.copy()]
    cur = x
    t_in = 0.0
    guard = 0
    raw = []  # (site, t_in, t_out)
    while cur != y:
        guard += 1
        if guard > len(verts):
            raise RuntimeError("cell walk failed to terminate")
        sc = verts[cur]
        t_best = np.inf
        nxt = -1
        for p in range(indptr[cur], indptr[cur + 1]):
            j = indices[p]
            d = verts[j] - sc
            denom = float(seg @ d)
            if denom <= 0.0:
                continue  # moving away from the bisector of j
            cj = 0.5 * float((verts[j] + sc) @ d)
            t = (cj - float(a @ d)) / denom
            if t < t_in - _T_EPS:
                continue
            if t < t_best - _T_EPS or (abs(t - t_best) <= _T_EPS and j < nxt):
                t_best = t
                nxt = j
        if nxt < 0 or t_best > 1.0 + _T_EPS:
            break  # segment ends inside the current cell
        raw.append((cur, t_in, min(t_best, 1.0)))
        cur = nxt
        t_in = t_best
    raw.append((cur, t_in, 1.0))
    if cur != y:
        raise RuntimeError("cell walk did not reach the target site")

    # drop grazing crossings (zero-length intersections), keep endpoints
    walk_sites = []
    walk_entries = []
    for k, (site, ta, tb) in enumerate(raw):
        if 0 < k < len(raw) - 1 and tb - ta <= _T_EPS:
            continue
        walk_sites.append(site)
        walk_entries.append(a + ta * seg)
    return CellWalk(sites=np.array(walk_sites, dtype=np.int64),
                    entries=np.array(walk_entries))


def dilation_path(graph: AcceptedGraph, x: int, y: int) -> DilationPath:
    """Greedy hop selection along the cell walk, per the constructive rule.

    With cells Q_{x_0} .. Q_{x_m} and entry points a_j (a_m = y), take
    j(k+1) as the least j > j(k) with |a_{j+1} - a_{j(k)+1}| > delta_g or
    j = m.  Every selected hop is a Delaunay or augmentation edge.
    """
    walk = segment_cell_walk(graph, x, y)
    m = len(walk.sites) - 1
    # a_pts[j] = a_j: entry point of cell j, with a_m redefined as y itself
    a_pts = walk.entries.copy()
    a_pts[m] = graph.vertices[y]
    selected = [0]
    delta = graph.delta_g
    while selected[-1] < m:
        jk = selected[-1]
        anchor = a_pts[jk + 1]
        nxt = m
        for j in range(jk + 1, m + 1):
            if j == m or np.hypot(*(a_pts[j + 1] - anchor)) > delta:
                nxt = j
                break
        selected.append(nxt)
    sel = np.array(selected, dtype=np.int64)
    path = walk.sites[sel]
    edge_set = _edge_lookup(graph)
    total = 0.0
    for u, v in zip(path[:-1], path[1:]):
        key = (int(min(u, v)), int(max(u, v)))
        if key not in edge_set:
            raise RuntimeError(
                f"constructive hop {key} is not a graph edge (augmentation bug)")
        total += float(np.hypot(*(graph.vertices[v] - graph.vertices[u])))
    return DilationPath(x=x, y=y, cell_walk=walk.sites,
                        entry_points=a_pts, selected=sel, path=path,
                        euclidean_length=total)


def _edge_lookup(graph: AcceptedGraph) -> set:
    cached = getattr(graph, "_edge_lookup_cache", None)
    if cached is None:
        cached = {(int(i), int(j)) for i, j in graph.edges}
        object.__setattr__(graph, "_edge_lookup_cache", cached)
    return cached


def empirical_dilation(graph: AcceptedGraph, pairs: np.ndarray,
                       delaunay_only: bool = False) -> dict:
    """Shortest-path (Euclidean edge length) to straight-line distance ratios.

    Returns max ratio, per-pair ratios, and a histogram over [1, max].
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if delaunay_only:
        keep = graph.edge_kind == 0
        i, j = graph.edges[keep, 0], graph.edges[keep, 1]
        w = graph.edge_length[keep]
    else:
        i, j = graph.edges[:, 0], graph.edges[:, 1]
        w = graph.edge_length
    from scipy import sparse
    n = len(graph.vertices)
    g = sparse.csr_matrix(
        (np.concatenate([w, w]),
         (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n))
    ratios = np.empty(len(pairs))
    by_src: dict[int, list[int]] = {}
    for k, (s, t) in enumerate(pairs):
        by_src.setdefault(int(s), []).append(k)
    for s, rows in by_src.items():
        dist = _dijkstra(g, directed=False, indices=s)
        for k in rows:
            t = pairs[k, 1]
            d = float(np.hypot(*(graph.vertices[t] - graph.vertices[s])))
            if not np.isfinite(dist[t]):
                raise RuntimeError(f"pair {s},{t} disconnected")
            ratios[k] = dist[t] / d if d > 0 else 1.0
    hist, edges = np.histogram(ratios, bins=20)
    return {"max_ratio": float(np.max(ratios)), "ratios": ratios,
            "histogram": (hist, edges)}
