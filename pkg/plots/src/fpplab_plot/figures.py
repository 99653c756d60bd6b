"""Figure builders over fpplab CSV/JSON outputs.

The plotting layer never recomputes simulation statistics: every figure is a
pure function of its input files.  Rendering is pinned for byte-identical
reruns: fixed style, fixed fonts, no timestamps, fixed SVG hash salt.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

_STYLE = {
    "figure.figsize": (6.4, 4.4),
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "fpplab",
    "path.simplify": False,
}


class SchemaError(ValueError):
    """An input file lacks a required column or key."""


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise SchemaError(f"{path}: empty CSV")
    header = rows[0]
    cols = {h: [] for h in header}
    for row in rows[1:]:
        for h, v in zip(header, row):
            cols[h].append(v)
    return {h: np.array([float(v) for v in vs]) for h, vs in cols.items()}


def require(cols: dict, names: list[str], path) -> None:
    missing = [n for n in names if n not in cols]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")


def _save(fig, out_path) -> list[Path]:
    """Write PNG plus an SVG twin, both scrubbed of volatile metadata."""
    out_path = Path(out_path)
    outs = []
    png = out_path if out_path.suffix == ".png" else out_path.with_suffix(".png")
    svg = png.with_suffix(".svg")
    fig.savefig(png, metadata={"Software": "fpplab-plot"})
    fig.savefig(svg, metadata={"Date": None, "Creator": "fpplab-plot"})
    plt.close(fig)
    outs += [png, svg]
    return outs


def _weighted_loglog_fit(r, sigma, stderr):
    x = np.log(r)
    y = np.log(sigma)
    rel = np.where(sigma > 0, stderr / sigma, 0.0)
    floor = max(1e-12, float(np.min(rel[rel > 0], initial=1e-12)))
    w = 1.0 / np.maximum(rel, floor) ** 2
    W = w.sum()
    xb = (w * x).sum() / W
    yb = (w * y).sum() / W
    sxx = (w * (x - xb) ** 2).sum()
    slope = float((w * (x - xb) * (y - yb)).sum() / sxx)
    inter = float(yb - slope * xb)
    dof = len(x) - 2
    if dof > 0:
        resid = y - (inter + slope * x)
        s2 = float((w * resid ** 2).sum() / dof)
        half = 1.96 * math.sqrt(s2 / sxx)
    else:
        half = 0.0
    return slope, half, inter


def plot_sigma(csv_path, out_path) -> list[Path]:
    """Log-log sigma curve with error bars and the fitted slope annotation."""
    cols = read_csv(csv_path)
    require(cols, ["r", "sigma", "sigma_stderr"], csv_path)
    r, sig, err = cols["r"], cols["sigma"], cols["sigma_stderr"]
    slope, half, inter = _weighted_loglog_fit(r, sig, err)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.errorbar(r, sig, yerr=err, fmt="o", ms=4, capsize=3,
                    color="#1f4e8c", label="estimated scale")
        rr = np.geomspace(r.min(), r.max(), 64)
        ax.plot(rr, np.exp(inter) * rr ** slope, "--", color="#c44e52",
                label=f"fit: {slope:.3f} $\\pm$ {half:.3f}")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("r")
        ax.set_ylabel("fluctuation scale")
        ax.legend(loc="upper left")
        return _save(fig, out_path)


_TAIL_KINDS = ("fluctuation", "wandering", "straightness", "density")


def plot_tails(csv_path, out_path, kind: str, c34: float = 1.0) -> list[Path]:
    """Log-probability tails with Wilson bands, one trace per leading r."""
    if kind not in _TAIL_KINDS:
        raise SchemaError(f"unknown tail kind {kind!r}")
    cols = read_csv(csv_path)
    base = ["abscissa", "p", "wilson_lo", "wilson_hi", "p_isotonic"]
    require(cols, base, csv_path)
    groups = {}
    if "r" in cols:
        for i, rv in enumerate(cols["r"]):
            groups.setdefault(float(rv), []).append(i)
    else:
        groups[None] = list(range(len(cols["abscissa"])))
    floor = 1e-4
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        palette = ("#1f4e8c", "#c44e52", "#55a868", "#8172b2", "#937860")
        for ci, (rv, idx) in enumerate(sorted(groups.items(),
                                              key=lambda kv: kv[0] or 0.0)):
            idx = np.array(idx)
            t = cols["abscissa"][idx]
            p = np.maximum(cols["p"][idx], floor)
            lo = np.maximum(cols["wilson_lo"][idx], floor)
            hi = np.maximum(cols["wilson_hi"][idx], floor)
            color = palette[ci % len(palette)]
            label = "tail" if rv is None else f"r = {rv:g}"
            ax.plot(t, p, "o-", ms=4, color=color, label=label)
            ax.fill_between(t, lo, hi, color=color, alpha=0.2, linewidth=0)
            if kind == "wandering" and rv is not None:
                s_star = math.sqrt(max(c34 * math.log(rv), 0.0))
                ax.axvline(s_star, color=color, ls=":", alpha=0.7)
        ax.set_yscale("log")
        ax.set_xlabel({"fluctuation": "t", "wandering": "s",
                       "straightness": "t", "density": "a"}[kind])
        ax.set_ylabel("exceedance probability")
        ax.set_title(f"{kind} tail")
        ax.legend(loc="lower left")
        return _save(fig, out_path)


# ----------------------------------------------------------------- tube map

def _sigma_curve(doc: dict):
    for key in ("r", "sigma"):
        if key not in doc:
            raise SchemaError(f"sigma curve JSON missing {key!r}")
    lr = np.log(np.asarray(doc["r"], dtype=float))
    ls = np.log(np.asarray(doc["sigma"], dtype=float))

    def interp(s):
        s = np.maximum(np.asarray(s, dtype=float), 1e-9)
        return np.exp(np.interp(np.log(s), lr, ls))

    return interp, float(np.exp(lr[0]))


def _d_r_field(xx, yy, r, sigma, c23, chi2, r_samples):
    """Straightness functional on a grid (vectorized evaluation)."""
    def sup_term(s):
        s = np.asarray(s, dtype=float)
        ts = np.concatenate([r_samples, s[s > 0]])
        vals_samples = r_samples ** (1 - chi2) / (sigma(r_samples)
                                                  * np.log(2 + r_samples))
        out = np.zeros_like(s)
        for i, sv in np.ndenumerate(s):
            if sv <= 0:
                out[i] = 0.0
                continue
            keep = r_samples[r_samples <= sv]
            v = vals_samples[: len(keep)]
            self_v = sv ** (1 - chi2) / (sigma(sv) * math.log(2 + sv))
            out[i] = max(float(np.max(v)) if len(v) else 0.0, float(self_v))
        return out

    def phi(s):
        s = np.asarray(s, dtype=float)
        return np.where(s > 0, s ** chi2 * sup_term(s) / c23, 0.0)

    def xi2(s):
        s = np.asarray(s, dtype=float)
        return np.where(s > 0, s * sigma(np.maximum(s, 1e-9)) * np.log(2 + s),
                        0.0)

    u1 = np.where(xx <= r / 2.0, xx, r - xx)
    us = np.abs(yy)
    phi_term = phi(np.maximum(np.abs(u1), us))
    x2 = xi2(np.where(u1 > 0, u1, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        tube = np.where(x2 > 0, us * us / x2, np.where(us == 0, 0.0, np.inf))
    return np.where(u1 < 0, phi_term, np.minimum(tube, phi_term))


def plot_tube(graph_path, geodesic_path, sigma_path, out_path,
              c23: float = 1.5, chi2: float = 0.45,
              levels=(0.25, 0.5, 1.0, 2.0)) -> list[Path]:
    """Level sets of the tube functional with a geodesic overlay."""
    gdoc = json.loads(Path(graph_path).read_text())
    pdoc = json.loads(Path(geodesic_path).read_text())
    sdoc = json.loads(Path(sigma_path).read_text())
    for key in ("sites",):
        if key not in gdoc:
            raise SchemaError(f"{graph_path}: missing {key!r}")
    for key in ("path", "x", "y"):
        if key not in pdoc:
            raise SchemaError(f"{geodesic_path}: missing {key!r}")
    sigma, _ = _sigma_curve(sdoc)
    sites = np.asarray(gdoc["sites"], dtype=float)
    path = np.asarray(pdoc["path"], dtype=int)
    pos = sites[path]
    x0 = np.asarray(pdoc["x"], dtype=float)
    y0 = np.asarray(pdoc["y"], dtype=float)
    r = float(np.hypot(*(y0 - x0)))
    # rotate into the frame where the query segment is the positive x-axis
    d = (y0 - x0) / max(r, 1e-12)
    rot = np.array([[d[0], d[1]], [-d[1], d[0]]])
    rel = (pos - x0) @ rot.T
    r_samples = np.asarray(sdoc["r"], dtype=float)
    pad = max(8.0, 0.15 * r)
    xs = np.linspace(-pad, r + pad, 240)
    ys = np.linspace(-pad * 2.0, pad * 2.0, 200)
    xx, yy = np.meshgrid(xs, ys)
    field = _d_r_field(xx, yy, r, sigma, c23, chi2, r_samples)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(7.5, 4.2))
        cs = ax.contourf(xx, yy, np.minimum(field, levels[-1] * 1.5),
                         levels=[0.0, *levels],
                         colors=["#dce8f5", "#b8cfe8", "#8fb3d9", "#6b97c9"],
                         extend="max")
        ax.contour(xx, yy, field, levels=list(levels), colors="#30557f",
                   linewidths=0.6)
        ax.plot(rel[:, 0], rel[:, 1], "-", color="#c44e52", lw=1.4,
                label="geodesic")
        ax.plot([0, r], [0, 0], ":", color="black", lw=0.8)
        ax.set_xlabel("longitudinal")
        ax.set_ylabel("transverse")
        ax.legend(loc="upper right")
        fig.colorbar(cs, ax=ax, label="tube functional level")
        return _save(fig, out_path)
