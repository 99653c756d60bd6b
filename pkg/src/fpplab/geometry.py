"""Planar geometric predicates and primitives.

The orientation and in-circle predicates return exact signs: a fast floating
point evaluation with a forward error bound decides the common case, and the
rare uncertain case falls back to exact rational arithmetic (floats are dyadic
rationals, so ``Fraction`` conversion is lossless).  Everything downstream of
these two predicates is plain double precision.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

# Geometric noise tolerance used across the package (squared-distance scale).
TAU_GEO = 1e-9

# Shewchuk-style static filter constants for double precision.
_EPS = np.finfo(np.float64).eps / 2.0  # 2^-53
_CCW_ERR = (3.0 + 16.0 * _EPS) * _EPS
_ICC_ERR = (10.0 + 96.0 * _EPS) * _EPS


def orient2d(ax, ay, bx, by, cx, cy) -> int:
    """Sign of the signed area of triangle (a, b, c): +1 ccw, -1 cw, 0 collinear."""
    detleft = (ax - cx) * (by - cy)
    detright = (ay - cy) * (bx - cx)
    det = detleft - detright
    errbound = _CCW_ERR * (abs(detleft) + abs(detright))
    if det > errbound:
        return 1
    if det < -errbound:
        return -1
    return _orient2d_exact(ax, ay, bx, by, cx, cy)


def _orient2d_exact(ax, ay, bx, by, cx, cy) -> int:
    ax, ay, bx, by, cx, cy = (Fraction(v) for v in (ax, ay, bx, by, cx, cy))
    det = (ax - cx) * (by - cy) - (ay - cy) * (bx - cx)
    return (det > 0) - (det < 0)


def incircle(ax, ay, bx, by, cx, cy, dx, dy) -> int:
    """Sign test: +1 if d lies inside the circumcircle of ccw triangle (a, b, c),
    -1 if outside, 0 if the four points are cocircular."""
    adx = ax - dx
    ady = ay - dy
    bdx = bx - dx
    bdy = by - dy
    cdx = cx - dx
    cdy = cy - dy

    bdxcdy = bdx * cdy
    cdxbdy = cdx * bdy
    alift = adx * adx + ady * ady

    cdxady = cdx * ady
    adxcdy = adx * cdy
    blift = bdx * bdx + bdy * bdy

    adxbdy = adx * bdy
    bdxady = bdx * ady
    clift = cdx * cdx + cdy * cdy

    det = (
        alift * (bdxcdy - cdxbdy)
        + blift * (cdxady - adxcdy)
        + clift * (adxbdy - bdxady)
    )
    permanent = (
        (abs(bdxcdy) + abs(cdxbdy)) * alift
        + (abs(cdxady) + abs(adxcdy)) * blift
        + (abs(adxbdy) + abs(bdxady)) * clift
    )
    errbound = _ICC_ERR * permanent
    if det > errbound:
        return 1
    if det < -errbound:
        return -1
    return _incircle_exact(ax, ay, bx, by, cx, cy, dx, dy)


def _incircle_exact(ax, ay, bx, by, cx, cy, dx, dy) -> int:
    ax, ay, bx, by, cx, cy, dx, dy = (
        Fraction(v) for v in (ax, ay, bx, by, cx, cy, dx, dy)
    )
    adx, ady = ax - dx, ay - dy
    bdx, bdy = bx - dx, by - dy
    cdx, cdy = cx - dx, cy - dy
    det = (
        (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
        + (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady)
    )
    return (det > 0) - (det < 0)


def circumcenter(a, b, c):
    """Circumcenter of a nondegenerate triangle, in double precision."""
    ax, ay = a
    bx, by = b
    cx, cy = c
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
          + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
          + (cx * cx + cy * cy) * (bx - ax)) / d
    return np.array([ux, uy])


def point_segment_distance(p, a, b) -> float:
    """Euclidean distance from point p to closed segment [a, b]."""
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.hypot(*(p - a)))
    t = float((p - a) @ ab) / denom
    t = min(1.0, max(0.0, t))
    return float(np.hypot(*(p - (a + t * ab))))


def segment_segment_distance(a, b, c, d) -> float:
    """Euclidean distance between closed segments [a, b] and [c, d]."""
    if _segments_intersect(a, b, c, d):
        return 0.0
    return min(
        point_segment_distance(a, c, d),
        point_segment_distance(b, c, d),
        point_segment_distance(c, a, b),
        point_segment_distance(d, a, b),
    )


def _segments_intersect(a, b, c, d) -> bool:
    o1 = orient2d(a[0], a[1], b[0], b[1], c[0], c[1])
    o2 = orient2d(a[0], a[1], b[0], b[1], d[0], d[1])
    o3 = orient2d(c[0], c[1], d[0], d[1], a[0], a[1])
    o4 = orient2d(c[0], c[1], d[0], d[1], b[0], b[1])
    if o1 != o2 and o3 != o4:
        return True
    # collinear touching cases
    for p, q, r in ((a, b, c), (a, b, d), (c, d, a), (c, d, b)):
        if orient2d(p[0], p[1], q[0], q[1], r[0], r[1]) == 0 and _on_segment(p, q, r):
            return True
    return False


def _on_segment(p, q, r) -> bool:
    return (
        min(p[0], q[0]) <= r[0] <= max(p[0], q[0])
        and min(p[1], q[1]) <= r[1] <= max(p[1], q[1])
    )


def polygon_area(poly) -> float:
    """Signed area of a polygon given as an (n, 2) vertex array (ccw positive)."""
    poly = np.asarray(poly, dtype=float)
    x = poly[:, 0]
    y = poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def clip_halfplane(poly, n, c):
    """Clip a convex polygon to the half-plane {p : n . p <= c}.

    Returns a new (m, 2) array; empty array if the polygon is fully outside.
    """
    poly = np.asarray(poly, dtype=float)
    m = len(poly)
    if m == 0:
        return poly
    vals = poly @ n - c
    out = []
    for i in range(m):
        j = (i + 1) % m
        vi, vj = vals[i], vals[j]
        if vi <= 0.0:
            out.append(poly[i])
        if (vi < 0.0 < vj) or (vj < 0.0 < vi):
            t = vi / (vi - vj)
            out.append(poly[i] + t * (poly[j] - poly[i]))
    return np.array(out) if out else np.empty((0, 2))


def polygon_distance(poly_a, poly_b) -> float:
    """Distance between two convex polygons (0.0 when they touch or overlap)."""
    pa = np.asarray(poly_a, dtype=float)
    pb = np.asarray(poly_b, dtype=float)
    if _point_in_convex(pa[0], pb) or _point_in_convex(pb[0], pa):
        return 0.0
    best = np.inf
    na, nb = len(pa), len(pb)
    for i in range(na):
        a0, a1 = pa[i], pa[(i + 1) % na]
        for j in range(nb):
            b0, b1 = pb[j], pb[(j + 1) % nb]
            d = segment_segment_distance(a0, a1, b0, b1)
            if d < best:
                best = d
    return float(best)


def _point_in_convex(p, poly) -> bool:
    n = len(poly)
    for i in range(n):
        a = poly[i]
        b = poly[(i + 1) % n]
        if orient2d(a[0], a[1], b[0], b[1], p[0], p[1]) < 0:
            return False
    return True
