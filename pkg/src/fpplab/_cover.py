"""Numba kernels for unit-disk coverage feasibility.

The acceptance filter and the saturation test both reduce to one exact
question: does a region (a unit disk or an axis-aligned rectangle) contain a
point at distance >= 1 from every blocker?  Feasibility is decided on the
finite candidate set {region corners / disk center, circle-boundary
intersections, circle-circle intersections}; a candidate passes when its
squared distance to every blocker is >= 1 - TAU (symmetric float guard).

A uniform cell grid caches which cells are already fully covered so that the
streaming acceptance filter can skip the exact test for most late points.
"""

from __future__ import annotations

import numpy as np
from numba import njit

TAU = 1e-9  # squared-distance tolerance, matches geometry.TAU_GEO


@njit(cache=True, inline="always")
def _feasible_point(x, y, bx, by, nb):
    for k in range(nb):
        dx = x - bx[k]
        dy = y - by[k]
        if dx * dx + dy * dy < 1.0 - TAU:
            return False
    return True


@njit(cache=True)
def feas_disk(vx, vy, bx, by, nb):
    """True iff some x with |x - v| <= 1 has |x - u| >= 1 for all blockers u.

    Blockers must be pre-filtered to |u - v| < 2 (others impose no constraint).
    """
    if _feasible_point(vx, vy, bx, by, nb):
        return True
    # candidates on the boundary circle of B_1(v)
    for i in range(nb):
        dx = bx[i] - vx
        dy = by[i] - vy
        d2 = dx * dx + dy * dy
        if d2 >= 4.0 or d2 <= 0.0:
            continue
        d = np.sqrt(d2)
        # intersection of unit circles centered at v and u_i
        mx = vx + 0.5 * dx
        my = vy + 0.5 * dy
        h2 = 1.0 - 0.25 * d2
        if h2 < 0.0:
            continue
        h = np.sqrt(h2)
        ox = -dy / d * h
        oy = dx / d * h
        if _feasible_point(mx + ox, my + oy, bx, by, nb):
            return True
        if _feasible_point(mx - ox, my - oy, bx, by, nb):
            return True
    # interior candidates: pairwise circle intersections inside B_1(v)
    for i in range(nb):
        for j in range(i + 1, nb):
            dx = bx[j] - bx[i]
            dy = by[j] - by[i]
            d2 = dx * dx + dy * dy
            if d2 >= 4.0 or d2 <= 0.0:
                continue
            d = np.sqrt(d2)
            mx = bx[i] + 0.5 * dx
            my = by[i] + 0.5 * dy
            h2 = 1.0 - 0.25 * d2
            if h2 < 0.0:
                continue
            h = np.sqrt(h2)
            ox = -dy / d * h
            oy = dx / d * h
            for s in range(2):
                px = mx + ox if s == 0 else mx - ox
                py = my + oy if s == 0 else my - oy
                ddx = px - vx
                ddy = py - vy
                if ddx * ddx + ddy * ddy <= 1.0 + TAU:
                    if _feasible_point(px, py, bx, by, nb):
                        return True
    return False


@njit(cache=True)
def feas_rect(x0, y0, x1, y1, bx, by, nb):
    """True iff some x in [x0,x1]x[y0,y1] has |x - u| >= 1 for all blockers."""
    if x1 < x0 or y1 < y0:
        return False
    # single-disk domination: a blocker whose disk contains the whole rect
    for k in range(nb):
        fx = max(abs(x0 - bx[k]), abs(x1 - bx[k]))
        fy = max(abs(y0 - by[k]), abs(y1 - by[k]))
        if fx * fx + fy * fy < 1.0 - TAU:
            return False
    # corners
    if _feasible_point(x0, y0, bx, by, nb):
        return True
    if _feasible_point(x1, y0, bx, by, nb):
        return True
    if _feasible_point(x1, y1, bx, by, nb):
        return True
    if _feasible_point(x0, y1, bx, by, nb):
        return True
    # circle-edge intersections
    for k in range(nb):
        cx = bx[k]
        cy = by[k]
        # horizontal edges y = y0, y1
        for ye in (y0, y1):
            h2 = 1.0 - (ye - cy) * (ye - cy)
            if h2 > 0.0:
                h = np.sqrt(h2)
                for px in (cx - h, cx + h):
                    if x0 <= px <= x1 and _feasible_point(px, ye, bx, by, nb):
                        return True
        # vertical edges x = x0, x1
        for xe in (x0, x1):
            h2 = 1.0 - (xe - cx) * (xe - cx)
            if h2 > 0.0:
                h = np.sqrt(h2)
                for py in (cy - h, cy + h):
                    if y0 <= py <= y1 and _feasible_point(xe, py, bx, by, nb):
                        return True
    # circle-circle intersections inside the rect
    for i in range(nb):
        for j in range(i + 1, nb):
            dx = bx[j] - bx[i]
            dy = by[j] - by[i]
            d2 = dx * dx + dy * dy
            if d2 >= 4.0 or d2 <= 0.0:
                continue
            d = np.sqrt(d2)
            mx = bx[i] + 0.5 * dx
            my = by[i] + 0.5 * dy
            h2 = 1.0 - 0.25 * d2
            if h2 < 0.0:
                continue
            h = np.sqrt(h2)
            ox = -dy / d * h
            oy = dx / d * h
            for s in range(2):
                px = mx + ox if s == 0 else mx - ox
                py = my + oy if s == 0 else my - oy
                if x0 <= px <= x1 and y0 <= py <= y1:
                    if _feasible_point(px, py, bx, by, nb):
                        return True
    return False


# ---------------------------------------------------------------- hash grid

@njit(cache=True, inline="always")
def _cell_index(x, y, ox, oy, cs, nx, ny):
    ix = int(np.floor((x - ox) / cs))
    iy = int(np.floor((y - oy) / cs))
    if ix < 0:
        ix = 0
    elif ix >= nx:
        ix = nx - 1
    if iy < 0:
        iy = 0
    elif iy >= ny:
        iy = ny - 1
    return iy * nx + ix


@njit(cache=True)
def _gather(px, py, x, y, radius, ox, oy, cs, nx, ny, head, nxt, out_x, out_y):
    """Collect points within `radius` of (x, y) into out_x/out_y; return count."""
    r2 = radius * radius
    reach = int(np.ceil(radius / cs))
    ix = int(np.floor((x - ox) / cs))
    iy = int(np.floor((y - oy) / cs))
    n = 0
    for cy in range(max(0, iy - reach), min(ny, iy + reach + 1)):
        for cx in range(max(0, ix - reach), min(nx, ix + reach + 1)):
            k = head[cy * nx + cx]
            while k >= 0:
                dx = px[k] - x
                dy = py[k] - y
                if dx * dx + dy * dy < r2:
                    out_x[n] = px[k]
                    out_y[n] = py[k]
                    n += 1
                k = nxt[k]
    return n


@njit(cache=True)
def accept_batch(px, py, start, stop,
                 ox, oy, cs, nx, ny, head, nxt,
                 aox, aoy, acs, anx, any_, alive,
                 accepted):
    """Run the available-space filter on points [start, stop) in time order.

    Each point is tested against all earlier sample points (already hashed plus
    earlier points of this batch), then inserted into the hash grid.  Cells of
    the coverage grid marked dead allow an O(1) rejection.
    """
    buf_x = np.empty(2048, dtype=np.float64)
    buf_y = np.empty(2048, dtype=np.float64)
    for k in range(start, stop):
        x = px[k]
        y = py[k]
        # quick rejection: every coverage cell touching B_1(v) already covered
        ix0 = int(np.floor((x - 1.0 - aox) / acs))
        ix1 = int(np.floor((x + 1.0 - aox) / acs))
        iy0 = int(np.floor((y - 1.0 - aoy) / acs))
        iy1 = int(np.floor((y + 1.0 - aoy) / acs))
        all_dead = True
        for cy in range(max(0, iy0), min(any_, iy1 + 1)):
            for cx in range(max(0, ix0), min(anx, ix1 + 1)):
                if alive[cy * anx + cx]:
                    all_dead = False
                    break
            if not all_dead:
                break
        if all_dead:
            accepted[k] = False
        else:
            nb = _gather(px, py, x, y, 2.0, ox, oy, cs, nx, ny, head, nxt,
                         buf_x, buf_y)
            accepted[k] = feas_disk(x, y, buf_x, buf_y, nb)
        # insert into hash grid (every sample point blocks later ones)
        c = _cell_index(x, y, ox, oy, cs, nx, ny)
        nxt[k] = head[c]
        head[c] = k


@njit(cache=True)
def kill_sweep(px, py, ox, oy, cs, nx, ny, head, nxt,
               aox, aoy, acs, anx, any_, alive):
    """Mark coverage cells dead once their full rectangle is covered."""
    buf_x = np.empty(2048, dtype=np.float64)
    buf_y = np.empty(2048, dtype=np.float64)
    half_diag = 0.5 * acs * np.sqrt(2.0)
    for cy in range(any_):
        for cx in range(anx):
            c = cy * anx + cx
            if not alive[c]:
                continue
            x0 = aox + cx * acs
            y0 = aoy + cy * acs
            x1 = x0 + acs
            y1 = y0 + acs
            nb = _gather(px, py, 0.5 * (x0 + x1), 0.5 * (y0 + y1),
                         1.0 + half_diag + 1e-9,
                         ox, oy, cs, nx, ny, head, nxt, buf_x, buf_y)
            if not feas_rect(x0, y0, x1, y1, buf_x, buf_y, nb):
                alive[c] = 0


@njit(cache=True)
def exists_uncovered(px, py, ox, oy, cs, nx, ny, head, nxt,
                     aox, aoy, acs, anx, any_, alive,
                     rx0, ry0, rx1, ry1):
    """True iff the region [rx0,rx1]x[ry0,ry1] still admits an empty unit disk.

    Only coverage cells still alive are examined; each cell rectangle is
    clipped to the region before the exact feasibility test.
    """
    buf_x = np.empty(2048, dtype=np.float64)
    buf_y = np.empty(2048, dtype=np.float64)
    half_diag = 0.5 * acs * np.sqrt(2.0)
    for cy in range(any_):
        for cx in range(anx):
            c = cy * anx + cx
            if not alive[c]:
                continue
            x0 = max(aox + cx * acs, rx0)
            y0 = max(aoy + cy * acs, ry0)
            x1 = min(aox + (cx + 1) * acs, rx1)
            y1 = min(aoy + (cy + 1) * acs, ry1)
            if x1 < x0 or y1 < y0:
                continue
            nb = _gather(px, py, 0.5 * (x0 + x1), 0.5 * (y0 + y1),
                         1.0 + half_diag + 1e-9,
                         ox, oy, cs, nx, ny, head, nxt, buf_x, buf_y)
            if feas_rect(x0, y0, x1, y1, buf_x, buf_y, nb):
                return True
    return False
