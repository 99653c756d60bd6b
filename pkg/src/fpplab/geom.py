"""Delaunay triangulation, Voronoi cells, and the augmented graph.

The triangulation is produced by Qhull and then repaired to the canonical
exact Delaunay triangulation: every interior edge is checked with the exact
in-circle predicate and flipped when illegal.  Exactly cocircular quads are
resolved deterministically by the rule "lower index wins": the chosen
diagonal is the one incident to the smallest site index of the quad, which
makes every cocircular group a fan from its lowest-index member.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.spatial import Delaunay as _QhullDelaunay
from scipy.spatial import cKDTree

from . import _cells
from .geometry import TAU_GEO, incircle, orient2d
from .pointproc import AcceptedSet, Window

GRAPH_SCHEMA = "fpplab-graph/1"

KIND_DELAUNAY = 0
KIND_AUGMENT = 1


@dataclass(frozen=True)
class Triangulation:
    sites: np.ndarray      # (n, 2)
    triangles: np.ndarray  # (m, 3) int32, ccw
    neighbors: np.ndarray  # (m, 3) int32, k-th entry opposite k-th vertex

    def edge_array(self) -> np.ndarray:
        """Unique undirected edges as an (e, 2) array with i < j."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def adjacency_csr(self) -> tuple[np.ndarray, np.ndarray]:
        e = self.edge_array()
        n = len(self.sites)
        a = sparse.csr_matrix(
            (np.ones(2 * len(e), dtype=np.uint8),
             (np.concatenate([e[:, 0], e[:, 1]]),
              np.concatenate([e[:, 1], e[:, 0]]))), shape=(n, n))
        return a.indptr.astype(np.int64), a.indices.astype(np.int64)


@dataclass(frozen=True)
class VoronoiCell:
    site: np.ndarray       # (2,)
    polygon: np.ndarray    # (k, 2), ccw
    clipped: bool          # touches the clipping rectangle boundary


def delaunay(sites: np.ndarray) -> Triangulation:
    """Canonical exact Delaunay triangulation of planar sites."""
    sites = np.asarray(sites, dtype=np.float64)
    if sites.ndim != 2 or sites.shape[1] != 2:
        raise ValueError("sites must be an (n, 2) array")
    if len(sites) < 3:
        raise ValueError("need at least 3 sites")
    if len(np.unique(sites, axis=0)) != len(sites):
        raise ValueError("duplicate sites")
    try:
        qh = _QhullDelaunay(sites)
    except Exception as exc:  # all-collinear input raises QhullError
        raise ValueError(f"triangulation failed: {exc}") from exc
    if qh.simplices.shape[0] == 0 or qh.coplanar.shape[0] > 0:
        raise ValueError("degenerate input: sites collinear or not 2d")
    tris = qh.simplices.astype(np.int32).copy()
    nbr = qh.neighbors.astype(np.int32).copy()
    _orient_ccw(sites, tris, nbr)
    _canonical_repair(sites, tris, nbr)
    return Triangulation(sites=sites, triangles=tris, neighbors=nbr)


def _orient_ccw(sites, tris, nbr):
    a, b, c = sites[tris[:, 0]], sites[tris[:, 1]], sites[tris[:, 2]]
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - \
            (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    flip = cross < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    nbr[flip] = nbr[flip][:, [0, 2, 1]]
    if np.any(cross == 0):
        # fall back to exact orientation for the (rare) zero rows
        for t in np.nonzero(cross == 0)[0]:
            i, j, k = tris[t]
            s = orient2d(*sites[i], *sites[j], *sites[k])
            if s == 0:
                raise ValueError("degenerate (collinear) triangle in input")
            if s < 0:
                tris[t] = tris[t][[0, 2, 1]]
                nbr[t] = nbr[t][[0, 2, 1]]


def _edge_vertices(tris, t, k):
    """Edge opposite vertex k of triangle t, plus the apex."""
    u = tris[t, (k + 1) % 3]
    v = tris[t, (k + 2) % 3]
    c = tris[t, k]
    return u, v, c


def _legalize_status(sites, tris, nbr, t, k):
    """-1 keep, +1 flip (strict), 0 cocircular (tie rule applies)."""
    s = nbr[t, k]
    if s < 0:
        return -1
    u, v, c = _edge_vertices(tris, t, k)
    k2 = int(np.nonzero(nbr[s] == t)[0][0])
    d = tris[s, k2]
    val = incircle(*sites[u], *sites[v], *sites[c], *sites[d])
    if val > 0:
        return 1
    if val < 0:
        return -1
    return 0


def _initial_suspects(sites, tris, nbr):
    """Interior edges not certainly legal, found with one vectorized filter."""
    m = len(tris)
    ts, ks = np.nonzero(nbr > np.arange(m, dtype=nbr.dtype)[:, None])
    if len(ts) == 0:
        return []
    u = tris[ts, (ks + 1) % 3]
    v = tris[ts, (ks + 2) % 3]
    c = tris[ts, ks]
    s = nbr[ts, ks]
    mask = nbr[s] == ts[:, None]
    k2 = np.argmax(mask, axis=1)
    d = tris[s, k2]
    pa, pb, pc, pd = sites[u], sites[v], sites[c], sites[d]
    adx = pa[:, 0] - pd[:, 0]
    ady = pa[:, 1] - pd[:, 1]
    bdx = pb[:, 0] - pd[:, 0]
    bdy = pb[:, 1] - pd[:, 1]
    cdx = pc[:, 0] - pd[:, 0]
    cdy = pc[:, 1] - pd[:, 1]
    bdxcdy = bdx * cdy
    cdxbdy = cdx * bdy
    alift = adx * adx + ady * ady
    cdxady = cdx * ady
    adxcdy = adx * cdy
    blift = bdx * bdx + bdy * bdy
    adxbdy = adx * bdy
    bdxady = bdx * ady
    clift = cdx * cdx + cdy * cdy
    det = (alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy)
           + clift * (adxbdy - bdxady))
    permanent = ((np.abs(bdxcdy) + np.abs(cdxbdy)) * alift
                 + (np.abs(cdxady) + np.abs(adxcdy)) * blift
                 + (np.abs(adxbdy) + np.abs(bdxady)) * clift)
    from .geometry import _ICC_ERR
    suspect = det >= -_ICC_ERR * permanent
    return list(zip(ts[suspect].tolist(), ks[suspect].tolist()))


def _canonical_repair(sites, tris, nbr):
    stack = _initial_suspects(sites, tris, nbr)
    guard = 0
    limit = 60 * (len(stack) + 16) + 20 * len(tris)
    while stack:
        guard += 1
        if guard > limit:
            raise RuntimeError("flip repair did not converge")
        t, k = stack.pop()
        s = nbr[t, k]
        if s < 0:
            continue
        u, v, c = _edge_vertices(tris, t, k)
        status = _legalize_status(sites, tris, nbr, t, k)
        if status == 0:
            k2 = int(np.nonzero(nbr[s] == t)[0][0])
            d = tris[s, k2]
            if min(c, d) > min(u, v):
                continue  # diagonal already incident to the quad minimum
            status = 1
        if status == 1:
            pushed = _flip(sites, tris, nbr, t, k)
            stack.extend(pushed)


def _flip(sites, tris, nbr, t, k):
    """Flip the edge opposite vertex k of triangle t; return edges to recheck."""
    s = nbr[t, k]
    u, v, c = _edge_vertices(tris, t, k)
    k2 = int(np.nonzero(nbr[s] == t)[0][0])
    d = tris[s, k2]
    # outer neighbors
    s_pos_u = int(np.nonzero(tris[s] == u)[0][0])
    s_pos_v = int(np.nonzero(tris[s] == v)[0][0])
    t_pos_u = int(np.nonzero(tris[t] == u)[0][0])
    t_pos_v = int(np.nonzero(tris[t] == v)[0][0])
    n_ud = nbr[s, s_pos_v]   # across (u, d)
    n_dv = nbr[s, s_pos_u]   # across (d, v)
    n_vc = nbr[t, t_pos_u]   # across (v, c)
    n_cu = nbr[t, t_pos_v]   # across (c, u)
    # new triangles: t := (u, d, c), s := (d, v, c)
    tris[t, 0], tris[t, 1], tris[t, 2] = u, d, c
    tris[s, 0], tris[s, 1], tris[s, 2] = d, v, c
    nbr[t, 0] = s        # opposite u: edge (d, c)
    nbr[t, 1] = n_cu     # opposite d: edge (c, u)
    nbr[t, 2] = n_ud     # opposite c: edge (u, d)
    nbr[s, 0] = n_vc     # opposite d: edge (v, c)
    nbr[s, 1] = t        # opposite v: edge (c, d)
    nbr[s, 2] = n_dv     # opposite c: edge (d, v)
    for outer, tri_new in ((n_ud, t), (n_cu, t), (n_dv, s), (n_vc, s)):
        if outer >= 0:
            old = t if tri_new == s else s
            pos = np.nonzero(nbr[outer] == old)[0]
            if len(pos):
                nbr[outer, pos[0]] = tri_new
    out = []
    for tri_, apex in ((t, 1), (t, 2), (s, 0), (s, 2)):
        if nbr[tri_, apex] >= 0:
            out.append((tri_, apex))
    return out


# ------------------------------------------------------------------ cells

@dataclass(frozen=True)
class CellComplex:
    """All clipped Voronoi cells in flat-array form (one polygon per site)."""

    sites: np.ndarray
    verts: np.ndarray     # concatenated ccw polygons
    offs: np.ndarray      # (n+1,) slice offsets into verts
    clipped: np.ndarray   # (n,) bool: touches the clipping rectangle
    rect: tuple[float, float, float, float]

    def __len__(self) -> int:
        return len(self.offs) - 1

    def polygon(self, i: int) -> np.ndarray:
        return self.verts[self.offs[i]:self.offs[i + 1]]

    def cell(self, i: int) -> VoronoiCell:
        return VoronoiCell(site=self.sites[i], polygon=self.polygon(i),
                           clipped=bool(self.clipped[i]))

    def radii(self) -> np.ndarray:
        return _cells.cell_radii(
            np.ascontiguousarray(self.sites[:, 0]),
            np.ascontiguousarray(self.sites[:, 1]), self.verts, self.offs)

    def __iter__(self):
        return (self.cell(i) for i in range(len(self)))

    def __getitem__(self, i):
        return self.cell(i)


def build_cell_complex(tri: Triangulation,
                       rect: tuple[float, float, float, float]) -> CellComplex:
    rx0, ry0, rx1, ry1 = rect
    if not (rx1 > rx0 and ry1 > ry0):
        raise ValueError("degenerate clipping rectangle")
    indptr, indices = tri.adjacency_csr()
    sx = np.ascontiguousarray(tri.sites[:, 0])
    sy = np.ascontiguousarray(tri.sites[:, 1])
    verts, offs = _cells.build_cells(sx, sy, indptr, indices, rx0, ry0, rx1, ry1)
    clipped = _cells.cells_touch_rect(verts, offs, rx0, ry0, rx1, ry1, 1e-9)
    return CellComplex(sites=tri.sites, verts=verts, offs=offs,
                       clipped=clipped, rect=rect)


def voronoi_cells(tri: Triangulation, rect: tuple[float, float, float, float]
                  ) -> list[VoronoiCell]:
    """Voronoi cells of the triangulation sites, clipped to rect (x0,y0,x1,y1)."""
    return list(build_cell_complex(tri, rect))


def _as_complex(cells, tri: Triangulation) -> CellComplex:
    if isinstance(cells, CellComplex):
        return cells
    offs = np.zeros(len(cells) + 1, dtype=np.int64)
    for i, c in enumerate(cells):
        offs[i + 1] = offs[i] + len(c.polygon)
    verts = (np.ascontiguousarray(np.concatenate(
        [c.polygon for c in cells if len(c.polygon)]))
        if offs[-1] else np.empty((0, 2)))
    clipped = np.array([c.clipped for c in cells], dtype=bool)
    return CellComplex(sites=tri.sites, verts=verts, offs=offs,
                       clipped=clipped, rect=(0.0, 0.0, 0.0, 0.0))


def augment(cells, tri: Triangulation, delta_g: float,
            delaunay_edges: np.ndarray | None = None) -> np.ndarray:
    """Augmentation edges: non-adjacent cell pairs at distance in (0, delta_g].

    Wherever the hole property holds, cells sit inside unit balls around
    their sites, so |x - y| <= 2 + delta_g for any qualifying pair; cells
    with larger reach (clipped boundary cells) get a widened candidate
    search.  Returns an (a, 2) index array with i < j.
    """
    if not (0.0 < delta_g < 1.0):
        raise ValueError("delta_g must lie in (0, 1)")
    cx = _as_complex(cells, tri)
    sites = tri.sites
    n = len(sites)
    tree = cKDTree(sites)
    radii = cx.radii()
    pairs = tree.query_pairs(2.0 + delta_g + 1e-6,
                             output_type="ndarray").astype(np.int64)
    big = np.nonzero(radii > 1.0)[0]
    if len(big):
        rmax = float(np.max(radii))
        extra = []
        for i in big:
            hits = tree.query_ball_point(sites[i], radii[i] + rmax + delta_g)
            for j in hits:
                if j != i:
                    extra.append((min(int(i), j), max(int(i), j)))
        if extra:
            pairs = np.unique(np.concatenate(
                [pairs, np.array(extra, dtype=np.int64)]), axis=0)
    if len(pairs) == 0:
        return np.empty((0, 2), dtype=np.int64)
    pairs.sort(axis=1)
    # drop Delaunay-adjacent pairs
    de = (tri.edge_array() if delaunay_edges is None else delaunay_edges
          ).astype(np.int64)
    keys_pairs = pairs[:, 0] * n + pairs[:, 1]
    keys_de = de[:, 0] * n + de[:, 1]
    pairs = pairs[~np.isin(keys_pairs, keys_de)]
    if len(pairs) == 0:
        return np.empty((0, 2), dtype=np.int64)
    # cheap bounding-box prefilter before exact segment-pair distances
    bb = _cells.cell_bboxes(cx.verts, cx.offs)
    ba, bc = bb[pairs[:, 0]], bb[pairs[:, 1]]
    gx = np.maximum(0.0, np.maximum(ba[:, 0] - bc[:, 2], bc[:, 0] - ba[:, 2]))
    gy = np.maximum(0.0, np.maximum(ba[:, 1] - bc[:, 3], bc[:, 1] - ba[:, 3]))
    pairs = pairs[np.hypot(gx, gy) <= delta_g]
    if len(pairs) == 0:
        return np.empty((0, 2), dtype=np.int64)
    d = _cells.poly_pair_distances(cx.verts, cx.offs, pairs)
    keep = (d > TAU_GEO) & (d <= delta_g)
    out = pairs[keep]
    order = np.lexsort((out[:, 1], out[:, 0]))
    return out[order]


# ------------------------------------------------------------------ graph

@dataclass(frozen=True)
class AcceptedGraph:
    """Augmented Delaunay graph over an accepted vertex set."""

    window: Window
    vertices: np.ndarray            # (n, 2)
    cells: CellComplex
    edges: np.ndarray               # (e, 2) int64, i < j
    edge_kind: np.ndarray           # (e,) uint8: 0 delaunay, 1 augmentation
    edge_length: np.ndarray         # (e,) float64, Euclidean
    delta_g: float
    seed_chain: tuple[int, ...]     # provenance (sample seed, ...)
    triangulation: Triangulation | None = None

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def core_vertex_mask(self) -> np.ndarray:
        """Vertices inside the core window (excludes the sampling margin)."""
        cached = getattr(self, "_core_mask_cache", None)
        if cached is None:
            v = self.vertices
            w = self.window
            cached = ((v[:, 0] >= w.lo[0]) & (v[:, 0] <= w.hi[0])
                      & (v[:, 1] >= w.lo[1]) & (v[:, 1] <= w.hi[1]))
            object.__setattr__(self, "_core_mask_cache", cached)
        return cached

    def csr(self, weights: np.ndarray | None = None,
            core_only: bool = False) -> sparse.csr_matrix:
        """Symmetric sparse adjacency with given per-edge weights (default |e|).

        With core_only, edges are restricted to endpoints inside the core
        window: the margin band carries clipped cells and long hull edges
        (finite-sample artifacts violating the interior separation bound)
        that must not act as shortcuts in passage-time computations.
        """
        w = self.edge_length if weights is None else weights
        i, j = self.edges[:, 0], self.edges[:, 1]
        if core_only:
            inside = self.core_vertex_mask()
            keep = inside[i] & inside[j]
            i, j, w = i[keep], j[keep], w[keep]
        n = len(self.vertices)
        return sparse.csr_matrix(
            (np.concatenate([w, w]),
             (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n))

    def kd_tree(self) -> cKDTree:
        return cKDTree(self.vertices)


def build_graph(accepted: AcceptedSet, delta_g: float = 0.2) -> AcceptedGraph:
    """Construct the augmented Delaunay graph of an accepted vertex set."""
    if accepted.window.margin < 7.0:
        raise ValueError("graph construction requires window margin >= 7")
    tri = delaunay(accepted.vertices)
    rect = accepted.window.expanded(accepted.window.margin)
    cells = build_cell_complex(tri, rect)
    de = tri.edge_array().astype(np.int64)
    ae = augment(cells, tri, delta_g, delaunay_edges=de)
    edges = np.concatenate([de, ae]) if len(ae) else de
    kind = np.concatenate([
        np.zeros(len(de), dtype=np.uint8),
        np.ones(len(ae), dtype=np.uint8),
    ]) if len(ae) else np.zeros(len(de), dtype=np.uint8)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    edges = edges[order]
    kind = kind[order]
    length = np.hypot(*(accepted.vertices[edges[:, 0]]
                        - accepted.vertices[edges[:, 1]]).T)
    return AcceptedGraph(window=accepted.window, vertices=accepted.vertices,
                         cells=cells, edges=edges, edge_kind=kind,
                         edge_length=length, delta_g=delta_g,
                         seed_chain=(accepted.parent_sample_seed,),
                         triangulation=tri)


def cell_of(graph: AcceptedGraph, y) -> int:
    """Index of the site whose cell contains y (nearest site; low index on ties)."""
    y = np.asarray(y, dtype=float)
    x0, y0, x1, y1 = graph.window.expanded(graph.window.margin)
    if not (x0 <= y[0] <= x1 and y0 <= y[1] <= y1):
        raise ValueError("query point outside window")
    d, idx = graph.kd_tree().query(y, k=2)
    if d[1] - d[0] <= TAU_GEO:
        return int(min(idx[0], idx[1]))
    return int(idx[0])


# ------------------------------------------------------------------ JSON io

def graph_to_json(graph: AcceptedGraph) -> str:
    doc = {
        "schema": GRAPH_SCHEMA,
        "window": {"lo": list(graph.window.lo), "hi": list(graph.window.hi),
                   "margin": graph.window.margin},
        "delta_g": graph.delta_g,
        "seed_chain": list(graph.seed_chain),
        "sites": [[float(x), float(y)] for x, y in graph.vertices],
        "edges": [[int(i), int(j), int(k), float(l)]
                  for (i, j), k, l in zip(graph.edges, graph.edge_kind,
                                          graph.edge_length)],
    }
    return json.dumps(doc, separators=(",", ":"))


def graph_from_json(text: str) -> AcceptedGraph:
    doc = json.loads(text)
    if doc.get("schema") != GRAPH_SCHEMA:
        raise ValueError(f"unsupported graph schema: {doc.get('schema')!r}")
    window = Window(lo=tuple(doc["window"]["lo"]), hi=tuple(doc["window"]["hi"]),
                    margin=doc["window"]["margin"])
    vertices = np.array(doc["sites"], dtype=np.float64).reshape(-1, 2)
    earr = doc["edges"]
    edges = np.array([[e[0], e[1]] for e in earr], dtype=np.int64)
    kind = np.array([e[2] for e in earr], dtype=np.uint8)
    length = np.array([e[3] for e in earr], dtype=np.float64)
    tri = delaunay(vertices)
    rect = window.expanded(window.margin)
    cells = build_cell_complex(tri, rect)
    return AcceptedGraph(window=window, vertices=vertices, cells=cells,
                         edges=edges, edge_kind=kind, edge_length=length,
                         delta_g=doc["delta_g"],
                         seed_chain=tuple(doc["seed_chain"]),
                         triangulation=tri)
