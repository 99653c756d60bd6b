"""Invariant checks for accepted graphs: hole property, edge separation,
cell size, constructive dilation bound, and local density report."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .pointproc import AcceptedSet, verify_hole_property, local_density_counts
from .geom import AcceptedGraph, graph_from_json
from .dilation import dilation_path, dilation_bound, empirical_dilation
from .geometry import TAU_GEO

_INTERIOR = 3.0  # distance from the core-window boundary for interior checks


def _interior_mask(graph: AcceptedGraph, depth: float) -> np.ndarray:
    w = graph.window
    v = graph.vertices
    return ((v[:, 0] >= w.lo[0] + depth) & (v[:, 0] <= w.hi[0] - depth)
            & (v[:, 1] >= w.lo[1] + depth) & (v[:, 1] <= w.hi[1] - depth))


def check_separation(graph: AcceptedGraph, depth: float = _INTERIOR) -> dict:
    """Interior Delaunay edges must have Euclidean length < 2."""
    inner = _interior_mask(graph, depth)
    sel = (graph.edge_kind == 0) & inner[graph.edges[:, 0]] & inner[graph.edges[:, 1]]
    if not np.any(sel):
        return {"checked": 0, "max_length": 0.0, "pass": True}
    mx = float(np.max(graph.edge_length[sel]))
    return {"checked": int(np.sum(sel)), "max_length": mx, "pass": bool(mx < 2.0)}


def check_cell_size(graph: AcceptedGraph, depth: float = _INTERIOR) -> dict:
    """Interior unclipped cells must satisfy Q_y inside B_1(y)."""
    inner = _interior_mask(graph, depth)
    worst = 0.0
    checked = 0
    for i in np.nonzero(inner)[0]:
        cell = graph.cells[i]
        if cell.clipped or len(cell.polygon) == 0:
            continue
        checked += 1
        d = np.hypot(cell.polygon[:, 0] - cell.site[0],
                     cell.polygon[:, 1] - cell.site[1])
        worst = max(worst, float(np.max(d)))
    return {"checked": checked, "max_cell_radius": worst,
            "pass": bool(worst < 1.0 + TAU_GEO)}


def check_hole(graph: AcceptedGraph) -> dict:
    acc = AcceptedSet(window=graph.window, vertices=graph.vertices,
                      parent_sample_seed=graph.seed_chain[0] if graph.seed_chain else 0,
                      saturated=True)
    rep = verify_hole_property(acc, trim=0.0)
    return {"max_empty_radius": rep.max_empty_radius, "pass": rep.passed}


def sample_interior_pairs(graph: AcceptedGraph, n_pairs: int, seed: int,
                          distances=(2.0, 5.0, 10.0, 20.0, 50.0)) -> np.ndarray:
    """Stratified interior site pairs at target separations."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))
    inner = np.nonzero(_interior_mask(graph, 5.0))[0]
    if len(inner) < 2:
        return np.empty((0, 2), dtype=np.int64)
    w = graph.window
    span = min(w.hi[0] - w.lo[0], w.hi[1] - w.lo[1]) - 12.0
    usable = [d for d in distances if d <= span] or [min(distances)]
    tree = graph.kd_tree()
    pairs = []
    guard = 0
    while len(pairs) < n_pairs and guard < 50 * n_pairs:
        guard += 1
        d = usable[len(pairs) % len(usable)]
        i = int(rng.choice(inner))
        theta = rng.uniform(0.0, 2.0 * np.pi)
        target = graph.vertices[i] + d * np.array([np.cos(theta), np.sin(theta)])
        if not graph.window.contains(target, shrink=5.0):
            continue
        j = int(tree.query(target)[1])
        if j != i:
            pairs.append((i, j))
    return np.array(pairs, dtype=np.int64)


def check_dilation(graph: AcceptedGraph, pairs: np.ndarray) -> dict:
    bound = dilation_bound(graph.delta_g)
    worst = 0.0
    bad_hops = 0
    for i, j in pairs:
        try:
            dp = dilation_path(graph, int(i), int(j))
        except RuntimeError:
            bad_hops += 1
            continue
        worst = max(worst, dp.ratio(graph))
    emp = empirical_dilation(graph, pairs) if len(pairs) else {"max_ratio": 1.0}
    emp_del = (empirical_dilation(graph, pairs, delaunay_only=True)
               if len(pairs) else {"max_ratio": 1.0})
    return {
        "pairs": int(len(pairs)),
        "bound": bound,
        "max_constructive_ratio": worst,
        "max_empirical_ratio": float(emp["max_ratio"]),
        "max_delaunay_ratio": float(emp_del["max_ratio"]),
        "hop_failures": bad_hops,
        "pass": bool(bad_hops == 0 and worst <= bound + TAU_GEO
                     and emp_del["max_ratio"] <= 1.998 + 0.01),
    }


def check_density(graph: AcceptedGraph, radii=(5.0, 10.0)) -> dict:
    acc = AcceptedSet(window=graph.window, vertices=graph.vertices,
                      parent_sample_seed=0, saturated=True)
    w = graph.window
    center = np.array([[0.5 * (w.lo[0] + w.hi[0]), 0.5 * (w.lo[1] + w.hi[1])]])
    rows = []
    for r in radii:
        c = int(local_density_counts(acc, float(r), center)[0])
        rows.append({"r": r, "count": c, "per_area": c / (np.pi * r * r)})
    return {"balls": rows}


def verify_graph(graph: AcceptedGraph, pairs: int = 200, seed: int = 0) -> dict:
    pair_arr = sample_interior_pairs(graph, pairs, seed)
    checks = {
        "hole": check_hole(graph),
        "separation": check_separation(graph),
        "cell_size": check_cell_size(graph),
        "dilation": check_dilation(graph, pair_arr),
        "density": check_density(graph),
    }
    hard = ["hole", "separation", "cell_size", "dilation"]
    return {"pass": all(checks[k]["pass"] for k in hard), "checks": checks}


def verify_graph_file(path, pairs: int = 200, seed: int = 0) -> dict:
    graph = graph_from_json(Path(path).read_text())
    return verify_graph(graph, pairs=pairs, seed=seed)
