"""Numba kernels for Voronoi cell construction by half-plane clipping.

A site's cell is the window rectangle clipped by the perpendicular-bisector
half-planes of its neighbor sites.  Supplying the Delaunay neighbors is
sufficient; extra neighbors are harmless (their bisectors pass outside or
touch the true cell).
"""

from __future__ import annotations

import numpy as np
from numba import njit

_BUF = 160  # max vertices per working polygon; cells have far fewer


@njit(cache=True)
def _clip_halfplane_inplace(poly, m, nx, ny, c, out):
    """Clip polygon (first m rows of poly) to {p : p.n <= c}; result in out."""
    k = 0
    for i in range(m):
        j = i + 1
        if j == m:
            j = 0
        vi = poly[i, 0] * nx + poly[i, 1] * ny - c
        vj = poly[j, 0] * nx + poly[j, 1] * ny - c
        if vi <= 0.0:
            out[k, 0] = poly[i, 0]
            out[k, 1] = poly[i, 1]
            k += 1
        if (vi < 0.0 < vj) or (vj < 0.0 < vi):
            t = vi / (vi - vj)
            out[k, 0] = poly[i, 0] + t * (poly[j, 0] - poly[i, 0])
            out[k, 1] = poly[i, 1] + t * (poly[j, 1] - poly[i, 1])
            k += 1
    return k


@njit(cache=True)
def _cell_of_site(i, sx, sy, indptr, indices, rx0, ry0, rx1, ry1, work_a, work_b):
    work_a[0, 0] = rx0
    work_a[0, 1] = ry0
    work_a[1, 0] = rx1
    work_a[1, 1] = ry0
    work_a[2, 0] = rx1
    work_a[2, 1] = ry1
    work_a[3, 0] = rx0
    work_a[3, 1] = ry1
    m = 4
    cur = work_a
    alt = work_b
    xi = sx[i]
    yi = sy[i]
    for p in range(indptr[i], indptr[i + 1]):
        j = indices[p]
        if j == i:
            continue
        nx = sx[j] - xi
        ny = sy[j] - yi
        if nx == 0.0 and ny == 0.0:
            continue
        c = 0.5 * (sx[j] * sx[j] + sy[j] * sy[j] - xi * xi - yi * yi)
        m = _clip_halfplane_inplace(cur, m, nx, ny, c, alt)
        cur, alt = alt, cur
        if m == 0:
            break
    return cur, m


@njit(cache=True)
def build_cells(sx, sy, indptr, indices, rx0, ry0, rx1, ry1):
    """Build all clipped cells; returns (flat vertex array, offsets)."""
    n = len(sx)
    work_a = np.empty((_BUF, 2), dtype=np.float64)
    work_b = np.empty((_BUF, 2), dtype=np.float64)
    offs = np.zeros(n + 1, dtype=np.int64)
    chunks = np.empty((8 * n + 64, 2), dtype=np.float64)
    total = 0
    for i in range(n):
        cur, m = _cell_of_site(i, sx, sy, indptr, indices,
                               rx0, ry0, rx1, ry1, work_a, work_b)
        if total + m > len(chunks):
            grown = np.empty((2 * len(chunks) + m, 2), dtype=np.float64)
            grown[:total] = chunks[:total]
            chunks = grown
        for t in range(m):
            chunks[total + t, 0] = cur[t, 0]
            chunks[total + t, 1] = cur[t, 1]
        total += m
        offs[i + 1] = total
    return chunks[:total].copy(), offs


@njit(cache=True, inline="always")
def _seg_point_d2(px, py, ax, ay, bx, by):
    abx = bx - ax
    aby = by - ay
    denom = abx * abx + aby * aby
    if denom == 0.0:
        dx = px - ax
        dy = py - ay
        return dx * dx + dy * dy
    t = ((px - ax) * abx + (py - ay) * aby) / denom
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    dx = px - (ax + t * abx)
    dy = py - (ay + t * aby)
    return dx * dx + dy * dy


@njit(cache=True, inline="always")
def _orient_sign(ax, ay, bx, by, cx, cy):
    v = (ax - cx) * (by - cy) - (ay - cy) * (bx - cx)
    if v > 0.0:
        return 1
    if v < 0.0:
        return -1
    return 0


@njit(cache=True)
def _segments_cross(ax, ay, bx, by, cx, cy, dx, dy):
    o1 = _orient_sign(ax, ay, bx, by, cx, cy)
    o2 = _orient_sign(ax, ay, bx, by, dx, dy)
    o3 = _orient_sign(cx, cy, dx, dy, ax, ay)
    o4 = _orient_sign(cx, cy, dx, dy, bx, by)
    return o1 != o2 and o3 != o4


@njit(cache=True)
def poly_pair_distances(verts, offs, pairs):
    """Min distance between the convex cell polygons of each (i, j) pair.

    Distance over closed segment pairs; 0.0 on proper crossings.  Cells that
    touch at a single point report ~0 rather than exactly 0, which the caller
    separates with its tolerance.
    """
    out = np.empty(len(pairs), dtype=np.float64)
    for p in range(len(pairs)):
        i = pairs[p, 0]
        j = pairs[p, 1]
        a0, a1 = offs[i], offs[i + 1]
        b0, b1 = offs[j], offs[j + 1]
        na = a1 - a0
        nb = b1 - b0
        if na == 0 or nb == 0:
            out[p] = np.inf
            continue
        best = np.inf
        for s in range(na):
            ax0 = verts[a0 + s, 0]
            ay0 = verts[a0 + s, 1]
            s2 = a0 + ((s + 1) % na)
            ax1 = verts[s2, 0]
            ay1 = verts[s2, 1]
            for t in range(nb):
                bx0 = verts[b0 + t, 0]
                by0 = verts[b0 + t, 1]
                t2 = b0 + ((t + 1) % nb)
                bx1 = verts[t2, 0]
                by1 = verts[t2, 1]
                if _segments_cross(ax0, ay0, ax1, ay1, bx0, by0, bx1, by1):
                    best = 0.0
                    break
                d2 = _seg_point_d2(ax0, ay0, bx0, by0, bx1, by1)
                v = _seg_point_d2(ax1, ay1, bx0, by0, bx1, by1)
                if v < d2:
                    d2 = v
                v = _seg_point_d2(bx0, by0, ax0, ay0, ax1, ay1)
                if v < d2:
                    d2 = v
                v = _seg_point_d2(bx1, by1, ax0, ay0, ax1, ay1)
                if v < d2:
                    d2 = v
                if d2 < best:
                    best = d2
            if best == 0.0:
                break
        out[p] = np.sqrt(best) if best < np.inf else np.inf
    return out


@njit(cache=True)
def cell_bboxes(verts, offs):
    n = len(offs) - 1
    out = np.empty((n, 4), dtype=np.float64)
    for i in range(n):
        a, b = offs[i], offs[i + 1]
        if a == b:
            out[i, 0] = np.inf
            out[i, 1] = np.inf
            out[i, 2] = -np.inf
            out[i, 3] = -np.inf
            continue
        x0 = verts[a, 0]
        x1 = x0
        y0 = verts[a, 1]
        y1 = y0
        for k in range(a + 1, b):
            x = verts[k, 0]
            y = verts[k, 1]
            if x < x0:
                x0 = x
            elif x > x1:
                x1 = x
            if y < y0:
                y0 = y
            elif y > y1:
                y1 = y
        out[i, 0] = x0
        out[i, 1] = y0
        out[i, 2] = x1
        out[i, 3] = y1
    return out


@njit(cache=True)
def cell_radii(sx, sy, verts, offs):
    """Max distance from each site to its cell vertices (0 for empty cells)."""
    n = len(sx)
    out = np.zeros(n, dtype=np.float64)
    for i in range(n):
        best = 0.0
        for k in range(offs[i], offs[i + 1]):
            dx = verts[k, 0] - sx[i]
            dy = verts[k, 1] - sy[i]
            d2 = dx * dx + dy * dy
            if d2 > best:
                best = d2
        out[i] = np.sqrt(best)
    return out


@njit(cache=True)
def cells_touch_rect(verts, offs, rx0, ry0, rx1, ry1, eps):
    """Flag cells owning a vertex on the clipping rectangle boundary."""
    n = len(offs) - 1
    out = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        for k in range(offs[i], offs[i + 1]):
            x = verts[k, 0]
            y = verts[k, 1]
            if (x <= rx0 + eps or x >= rx1 - eps
                    or y <= ry0 + eps or y >= ry1 - eps):
                out[i] = True
                break
    return out


@njit(cache=True)
def max_cell_radius(sx, sy, indptr, indices, rx0, ry0, rx1, ry1):
    """Largest empty-circle radius with center in the rectangle.

    The maximum of the nearest-site distance over the rectangle is attained at
    a vertex of some clipped cell (Voronoi vertex, boundary crossing, corner).
    """
    n = len(sx)
    work_a = np.empty((_BUF, 2), dtype=np.float64)
    work_b = np.empty((_BUF, 2), dtype=np.float64)
    best = 0.0
    for i in range(n):
        cur, m = _cell_of_site(i, sx, sy, indptr, indices,
                               rx0, ry0, rx1, ry1, work_a, work_b)
        for t in range(m):
            dx = cur[t, 0] - sx[i]
            dy = cur[t, 1] - sy[i]
            d2 = dx * dx + dy * dy
            if d2 > best:
                best = d2
    return np.sqrt(best)
