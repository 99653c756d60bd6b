"""Reproducible Monte Carlo experiment suites.

Each experiment fans out over independent replicas.  A replica's randomness
is derived from SeedSequence([base_seed, stream, replica]) so any replica can
be reproduced in isolation; results are merged in replica order regardless of
completion order, making every CSV byte-reproducible and independent of the
worker count.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.optimize import isotonic_regression as _isotonic

from .pointproc import Window, sample_space_time, accept, local_density_counts
from .geom import build_graph, cell_of
from .fpp import (sample_speeds, shortest_path_tree, extract_path,
                  passage_time, is_censored, GridMap, DisconnectedError)
from .scaling import (SigmaCurve, estimate_sigma, monotone_envelope, fit_chi,
                      delta_of, StraightnessSpec, straightness_d_r)

CONFIG_SCHEMA = "fpplab-config/1"

STREAM_SAMPLE = 0
STREAM_SPEED = 1
STREAM_PAIRS = 2


class ExcessiveCensoringError(RuntimeError):
    """Raised when boundary censoring exceeds the configured budget."""


def child_seed(base_seed: int, stream: int, replica: int) -> int:
    ss = np.random.SeedSequence([int(base_seed), int(stream), int(replica)])
    return int(ss.generate_state(1, np.uint64)[0])


# ----------------------------------------------------------------- config

_DEFAULT_POLICY = {
    "name": "six_delta",
    "mult": 6.0,
    "log_scale": 10.0,
    "min_half_width": 14.0,
    "length_pad": 10.0,
    "pilot_sigma0": 1.0,
    "pilot_chi": 1.0 / 3.0,
}


@dataclass
class ExperimentConfig:
    kind: str
    base_seed: int = 1
    replicas: int = 50
    speed: str = "exponential:1.0"
    delta_g: float = 0.2
    q: float = 4.5
    r_grid: tuple = (25.0, 50.0, 75.0, 100.0, 150.0, 200.0, 300.0)
    K: float = 1.0
    s_grid: tuple = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
    t_grid: tuple = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0)
    a_grid: tuple = (0.5, 1.0, 1.2, 1.35, 1.5, 1.7, 2.0)
    density_r: tuple = (5.0, 10.0, 20.0)
    epsilon: float = 0.25
    C34: float = 1.0
    C_mu: float = 1.0
    C23: float = 1.5
    chi2: float = 0.45
    pairs_per_replica: int = 64
    monotone_eps: float = 0.2
    censor_budget: float = 0.05
    window_policy: dict = field(default_factory=lambda: dict(_DEFAULT_POLICY))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema"] = CONFIG_SCHEMA
        return d

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        d = dict(d)
        schema = d.pop("schema", CONFIG_SCHEMA)
        if schema != CONFIG_SCHEMA:
            raise ValueError(f"unsupported config schema {schema!r}")
        for key in ("r_grid", "s_grid", "t_grid", "a_grid", "density_r"):
            if key in d:
                d[key] = tuple(d[key])
        cfg = ExperimentConfig(**d)
        if cfg.replicas < 2:
            raise ValueError("need at least 2 replicas")
        for grid in (cfg.r_grid, cfg.s_grid, cfg.t_grid, cfg.a_grid):
            g = np.asarray(grid, dtype=float)
            if len(g) and (np.any(np.diff(g) <= 0)):
                raise ValueError("grids must be strictly increasing")
        return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_bytes()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib  # py311+
        except ModuleNotFoundError:
            import tomli as tomllib
        doc = tomllib.loads(text.decode("utf-8"))
    else:
        doc = json.loads(text.decode("utf-8"))
    return ExperimentConfig.from_dict(doc)


def pilot_delta(cfg: ExperimentConfig, r: float,
                sigma: SigmaCurve | None = None) -> float:
    if sigma is not None:
        return float(delta_of(r, sigma))
    pol = cfg.window_policy
    s = pol.get("pilot_sigma0", 1.0) * r ** pol.get("pilot_chi", 1.0 / 3.0)
    return float(np.sqrt(r * s))


def half_width(cfg: ExperimentConfig, r: float, sigma: SigmaCurve | None = None,
               transverse_need: float = 0.0) -> float:
    """Window half-width for scale r under the configured policy."""
    pol = cfg.window_policy
    d = pilot_delta(cfg, r, sigma)
    name = pol.get("name", "six_delta")
    if name == "six_delta":
        hw = pol.get("mult", 6.0) * d * (1.0 + math.log(r) / pol.get("log_scale", 10.0))
    elif name == "k_delta":
        hw = pol.get("mult", 3.0) * d
    else:
        raise ValueError(f"unknown window policy {name!r}")
    hw = max(hw, transverse_need, pol.get("min_half_width", 14.0))
    return float(np.ceil(hw))


def replica_graph(cfg: ExperimentConfig, r_len: float, hw: float, replica: int):
    """Build (graph, speeds) for one replica; deterministic in (cfg, replica)."""
    pad = float(cfg.window_policy.get("length_pad", 10.0))
    win = Window((-pad, -hw), (r_len + pad, hw), margin=7.0)
    sample = sample_space_time(win, rate=1.0,
                               seed=child_seed(cfg.base_seed, STREAM_SAMPLE, replica))
    acc = accept(sample)
    graph = build_graph(acc, delta_g=cfg.delta_g)
    speeds = sample_speeds(graph, cfg.speed,
                           seed=child_seed(cfg.base_seed, STREAM_SPEED, replica))
    return graph, speeds


# ------------------------------------------------------------- statistics

def wilson_interval(k: int, n: int, z: float = 1.959963984540054):
    if n == 0:
        return (0.0, 1.0)
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def isotonic_nonincreasing(p: np.ndarray) -> np.ndarray:
    if len(p) <= 1:
        return np.asarray(p, dtype=float)
    res = _isotonic(np.asarray(p, dtype=float), increasing=False)
    return np.asarray(res.x, dtype=float)


@dataclass
class TailReport:
    kind: str
    abscissa_name: str
    abscissa: np.ndarray
    n: np.ndarray
    k: np.ndarray
    p: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    p_iso: np.ndarray
    censored: int
    total: int
    meta: dict = field(default_factory=dict)

    @staticmethod
    def from_exceed(kind: str, name: str, grid, flags: np.ndarray,
                    censored: int, total: int, meta=None) -> "TailReport":
        """flags: (n_rep, n_grid) boolean exceedance indicators."""
        grid = np.asarray(grid, dtype=float)
        n = np.full(len(grid), flags.shape[0], dtype=int)
        k = flags.sum(axis=0).astype(int)
        p = np.where(n > 0, k / np.maximum(n, 1), 0.0)
        ci = np.array([wilson_interval(int(kk), int(nn)) for kk, nn in zip(k, n)])
        return TailReport(kind=kind, abscissa_name=name, abscissa=grid,
                          n=n, k=k, p=p, lo=ci[:, 0], hi=ci[:, 1],
                          p_iso=isotonic_nonincreasing(p),
                          censored=censored, total=total, meta=meta or {})

    def monotone_within_bands(self) -> bool:
        """True iff the raw tail never increases beyond Wilson-band overlap."""
        for i in range(len(self.p) - 1):
            if self.lo[i + 1] > self.hi[i] + 1e-12:
                return False
        return True


# ------------------------------------------------------------- CSV output

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header: list[str], rows: list) -> str:
    """Write rows deterministically; returns the sha256 of the bytes."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    data = buf.getvalue().encode("utf-8")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def tail_rows(rep: TailReport, lead: tuple = ()) -> list:
    rows = []
    for i in range(len(rep.abscissa)):
        rows.append(tuple(lead) + (rep.abscissa[i], rep.n[i], rep.k[i],
                                   rep.p[i], rep.lo[i], rep.hi[i], rep.p_iso[i]))
    return rows


TAIL_HEADER = ["abscissa", "n", "k", "p", "wilson_lo", "wilson_hi", "p_isotonic"]


# ------------------------------------------------------------- worker glue

def _run_replicas(worker, arg_list, jobs: int):
    """Execute worker over args; merge results by replica index."""
    if jobs <= 1:
        results = [worker(a) for a in arg_list]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(worker, arg_list, chunksize=1))
    return results


# ------------------------------------------------------------------ h, mu

def _hmu_replica(args):
    cfg_d, replica = args
    cfg = ExperimentConfig.from_dict(cfg_d)
    r_grid = np.asarray(cfg.r_grid, dtype=float)
    r_max = float(r_grid[-1])
    hw = half_width(cfg, r_max)
    graph, speeds = replica_graph(cfg, r_max, hw, replica)
    src = cell_of(graph, (0.0, 0.0))
    dist, pred = shortest_path_tree(graph, speeds, src)
    out = []
    for r in r_grid:
        tgt = cell_of(graph, (r, 0.0))
        if not np.isfinite(dist[tgt]):
            raise DisconnectedError("axis target disconnected")
        path = extract_path(pred, src, tgt)
        pos = graph.vertices[path]
        censored = is_censored(graph, pos)
        wander = float(np.max(np.abs(pos[:, 1]))) if len(pos) else 0.0
        out.append((float(dist[tgt]), bool(censored), wander))
    return replica, out


@dataclass
class HmuResult:
    r: np.ndarray
    n: np.ndarray
    censored: np.ndarray
    h: np.ndarray
    h_stderr: np.ndarray
    sigma_curve: SigmaCurve
    mu_lo: float
    mu_hi: float
    C_mu: float
    nonrandom_error: np.ndarray
    nonrandom_stderr: np.ndarray
    wander_median: np.ndarray
    samples: dict

    def h_at(self, r):
        """Plug-in directional mean at displacement r (linear interpolation,
        anchored at h(0) = 0)."""
        rr = np.concatenate([[0.0], self.r])
        hh = np.concatenate([[0.0], self.h])
        return np.interp(np.asarray(r, dtype=float), rr, hh)


def run_hmu(cfg: ExperimentConfig, jobs: int = 1) -> HmuResult:
    """Estimate h(r) = E T(0, r e1), the sigma curve, and the mu bracket."""
    args = [(cfg.to_dict(), i) for i in range(cfg.replicas)]
    results = sorted(_run_replicas(_hmu_replica, args, jobs))
    r_grid = np.asarray(cfg.r_grid, dtype=float)
    samples = {float(r): [] for r in r_grid}
    wanders = {float(r): [] for r in r_grid}
    cens = np.zeros(len(r_grid), dtype=int)
    for _, rows in results:
        for j, (t_val, censored, wander) in enumerate(rows):
            if censored:
                cens[j] += 1
            else:
                samples[float(r_grid[j])].append(t_val)
                wanders[float(r_grid[j])].append(wander)
    arr = {r: np.asarray(v) for r, v in samples.items()}
    sigma = estimate_sigma(arr, source=f"hmu/base_seed={cfg.base_seed}")
    h = np.array([np.mean(arr[float(r)]) for r in r_grid])
    n = np.array([len(arr[float(r)]) for r in r_grid])
    h_se = np.array([np.std(arr[float(r)], ddof=1) / math.sqrt(len(arr[float(r)]))
                     for r in r_grid])
    r_max = float(r_grid[-1])
    mu_hi = float(h[-1] / r_max)
    mu_lo = float(mu_hi - cfg.C_mu * sigma.sigma[-1] * math.log(r_max) / r_max)
    # plug-in mu = h(r_max)/r_max (the infimum estimator); error curve vs it
    err = h - mu_hi * r_grid
    err_se = np.sqrt(h_se ** 2 + (r_grid / r_max) ** 2 * h_se[-1] ** 2)
    wmed = np.array([np.median(wanders[float(r)]) if wanders[float(r)] else np.nan
                     for r in r_grid])
    return HmuResult(r=r_grid, n=n, censored=cens, h=h, h_stderr=h_se,
                     sigma_curve=sigma, mu_lo=mu_lo, mu_hi=mu_hi,
                     C_mu=cfg.C_mu, nonrandom_error=err,
                     nonrandom_stderr=err_se, wander_median=wmed, samples=arr)


HMU_HEADER = ["r", "n", "censored", "h_mean", "h_stderr", "sigma",
              "sigma_stderr", "delta", "mu_lo", "mu_hi", "nonrandom_error",
              "nonrandom_stderr", "error_over_sigma", "wander_median"]


def hmu_rows(res: HmuResult) -> list:
    rows = []
    for i, r in enumerate(res.r):
        sig = res.sigma_curve.sigma[i]
        rows.append((r, res.n[i], res.censored[i], res.h[i], res.h_stderr[i],
                     sig, res.sigma_curve.stderr[i],
                     math.sqrt(r * sig), res.mu_lo, res.mu_hi,
                     res.nonrandom_error[i], res.nonrandom_stderr[i],
                     res.nonrandom_error[i] / sig, res.wander_median[i]))
    return rows


@dataclass
class MonotoneReport:
    rows: list          # (r, s, h_r, h_s, h_rs, lhs, rhs, slack, ok)
    failures: list


def run_monotone_h(res: HmuResult, eps: float = 0.2) -> MonotoneReport:
    """Check h(r+s) >= h(r) + (1 - eps) h(s) - 3 * stderr on grid pairs."""
    rset = {float(r): i for i, r in enumerate(res.r)}
    rows, failures = [], []
    for r in res.r:
        for s in res.r:
            if s > r or float(r + s) not in rset:
                continue
            i, j, k = rset[float(r)], rset[float(s)], rset[float(r + s)]
            slack = 3.0 * math.sqrt(res.h_stderr[i] ** 2 + res.h_stderr[j] ** 2
                                    + res.h_stderr[k] ** 2)
            lhs = res.h[k]
            rhs = res.h[i] + (1.0 - eps) * res.h[j]
            ok = lhs >= rhs - slack
            rows.append((float(r), float(s), res.h[i], res.h[j], res.h[k],
                         lhs, rhs, slack, ok))
            if not ok:
                failures.append((float(r), float(s), lhs, rhs, slack))
    return MonotoneReport(rows=rows, failures=failures)


MONOTONE_HEADER = ["r", "s", "h_r", "h_s", "h_r_plus_s", "lhs", "rhs",
                   "slack", "pass"]


# ------------------------------------------------------------ fluctuation

def _pair_batch(rng, r, K, delta_r, eps, n_src, n_tgt, short_pairs):
    """Stratified (x, y) pairs in G_r(K); returns (sources, targets, is_long)."""
    sources = []
    targets = []
    longf = []
    for a in range(n_src):
        x1 = (a + rng.random()) / n_src * (1.0 - eps) * r
        x2 = rng.uniform(-K * delta_r, K * delta_r)
        tgts = []
        for b in range(n_tgt):
            lmax = r - x1
            lmin = eps * r
            L = lmin + (b + rng.random()) / n_tgt * (lmax - lmin)
            y2 = rng.uniform(-K * delta_r, K * delta_r)
            tgts.append((x1 + L, y2, True))
        for _ in range(short_pairs):
            L = rng.uniform(2.0, max(2.5, eps * r))
            if x1 + L > r:
                L = r - x1
            y2 = rng.uniform(-K * delta_r, K * delta_r)
            tgts.append((x1 + L, y2, False))
        sources.append((x1, x2))
        targets.append(tgts)
    return sources, targets


def _fluct_replica(args):
    (cfg_d, replica, r, sig_d, h_r, h_v) = args
    cfg = ExperimentConfig.from_dict(cfg_d)
    sigma = SigmaCurve.from_json(sig_d)
    delta_r = float(delta_of(r, sigma))
    sigma_r = float(sigma(r))
    hw = half_width(cfg, r, sigma, transverse_need=(cfg.K + 2.0) * delta_r)
    graph, speeds = replica_graph(cfg, r, hw, replica)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(
        [cfg.base_seed, STREAM_PAIRS, replica])))
    n_src = max(1, int(round(math.sqrt(cfg.pairs_per_replica))))
    n_tgt = max(1, cfg.pairs_per_replica // n_src)
    sources, targets = _pair_batch(rng, r, cfg.K, delta_r, cfg.epsilon,
                                   n_src, n_tgt, short_pairs=2)

    def h_at(rr):
        return float(np.interp(rr, np.concatenate([[0.0], h_r]),
                               np.concatenate([[0.0], h_v])))

    sup_two = 0.0
    sup_one = 0.0
    censored = False
    for (x1, x2), tgts in zip(sources, targets):
        x = np.array([x1, x2])
        src = cell_of(graph, x)
        dist, pred = shortest_path_tree(graph, speeds, src)
        for (y1, y2, is_long) in tgts:
            y = np.array([y1, y2])
            tgt = cell_of(graph, y)
            if not np.isfinite(dist[tgt]):
                raise DisconnectedError("pair disconnected")
            path = extract_path(pred, src, tgt)
            if is_censored(graph, graph.vertices[path]):
                censored = True
                continue
            T = float(dist[tgt])
            if is_long:
                stat = abs(T - h_at(float(np.hypot(y1 - x1, y2 - x2)))) / sigma_r
                sup_two = max(sup_two, stat)
            stat1 = (h_at(abs(y1 - x1)) - T) / sigma_r
            sup_one = max(sup_one, stat1)
    return replica, sup_two, sup_one, censored


def run_fluctuation(cfg: ExperimentConfig, hres: HmuResult, r: float,
                    jobs: int = 1) -> tuple[TailReport, TailReport]:
    """Uniform fluctuation tails over pairs in the cylinder G_r(K)."""
    if cfg.t_grid[0] < 0.05 * cfg.K ** 2:
        print(f"warning: t grid begins below c*K^2 (K={cfg.K})", file=sys.stderr)
    sig_d = hres.sigma_curve.to_json()
    args = [(cfg.to_dict(), i, float(r), sig_d,
             hres.r.tolist(), hres.h.tolist()) for i in range(cfg.replicas)]
    results = sorted(_run_replicas(_fluct_replica, args, jobs))
    t = np.asarray(cfg.t_grid, dtype=float)
    sup2 = np.array([s2 for _, s2, _, c in results if not c])
    sup1 = np.array([s1 for _, _, s1, c in results if not c])
    n_cens = sum(1 for _, _, _, c in results if c)
    flags2 = sup2[:, None] >= t[None, :]
    flags1 = sup1[:, None] >= t[None, :]
    meta = {"r": r, "K": cfg.K, "epsilon": cfg.epsilon}
    rep2 = TailReport.from_exceed("fluctuation_two_sided", "t", t, flags2,
                                  n_cens, cfg.replicas, meta)
    rep1 = TailReport.from_exceed("fluctuation_one_sided", "t", t, flags1,
                                  n_cens, cfg.replicas, meta)
    return rep2, rep1


# -------------------------------------------------------------- wandering

def interval_I_rs(r: float, s: float, sigma_r: float, delta_r: float,
                  C34: float) -> tuple[float, float]:
    """The longitudinal interval I_{r,s} (three-branch extension of [0, r])."""
    if s <= math.sqrt(max(C34 * math.log(r), 0.0)):
        pad = s * s * sigma_r * math.log(r)
    elif s <= r / delta_r:
        pad = s * s * sigma_r
    else:
        pad = s * delta_r
    return (-pad, r + pad)


def in_G_rs(point, r: float, s: float, sigma_r: float, delta_r: float,
            C34: float) -> bool:
    lo, hi = interval_I_rs(r, s, sigma_r, delta_r, C34)
    return bool(lo <= point[0] <= hi and abs(point[1]) <= s * delta_r)


def _wander_replica(args):
    (cfg_d, replica, r, sig_d) = args
    cfg = ExperimentConfig.from_dict(cfg_d)
    sigma = SigmaCurve.from_json(sig_d)
    delta_r = float(delta_of(r, sigma))
    sigma_r = float(sigma(r))
    s_grid = np.asarray(cfg.s_grid, dtype=float)
    need = (max(cfg.K, float(s_grid[-1])) + 1.0) * delta_r + 4.0
    hw = half_width(cfg, r, sigma, transverse_need=need)
    graph, speeds = replica_graph(cfg, r, hw, replica)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(
        [cfg.base_seed, STREAM_PAIRS, replica])))
    n_src = max(1, int(round(math.sqrt(cfg.pairs_per_replica / 4))))
    n_tgt = max(1, (cfg.pairs_per_replica // 4) // n_src)
    exceed = np.zeros(len(s_grid), dtype=bool)
    wanders = []
    censored_any = False
    for a in range(n_src):
        x1 = (a + rng.random()) / n_src * (1.0 - cfg.epsilon) * r
        x2 = rng.uniform(-cfg.K * delta_r, cfg.K * delta_r)
        x = np.array([x1, x2])
        src = cell_of(graph, x)
        dist, pred = shortest_path_tree(graph, speeds, src)
        for b in range(n_tgt):
            lmin = cfg.epsilon * r
            L = lmin + (b + rng.random()) / n_tgt * (r - x1 - lmin)
            y1 = x1 + L
            lo = max(-cfg.K * delta_r, x2 - L)
            hi = min(cfg.K * delta_r, x2 + L)
            y2 = rng.uniform(lo, hi)  # |(y-x)*| <= (y-x)_1
            y = np.array([y1, y2])
            tgt = cell_of(graph, y)
            if not np.isfinite(dist[tgt]):
                raise DisconnectedError("pair disconnected")
            path = extract_path(pred, src, tgt)
            pos = graph.vertices[path]
            if is_censored(graph, pos):
                censored_any = True
                continue
            d = y - x
            nrm = float(np.hypot(*d))
            wanders.append(float(np.max(np.abs(
                (pos[:, 0] - x[0]) * d[1] - (pos[:, 1] - x[1]) * d[0])) / nrm))
            for si, s in enumerate(s_grid):
                if exceed[si]:
                    continue
                lo_i, hi_i = interval_I_rs(r, float(s), sigma_r, delta_r, cfg.C34)
                outside = ((pos[:, 0] < lo_i) | (pos[:, 0] > hi_i)
                           | (np.abs(pos[:, 1]) > s * delta_r))
                if bool(np.any(outside)):
                    exceed[si] = True
    # axis geodesic wandering for the xi fit
    gr = passage_time(graph, speeds, (0.0, 0.0), (r, 0.0))
    axis_w = gr.wandering if not gr.censored else np.nan
    return replica, exceed, wanders, axis_w, censored_any


@dataclass
class WanderResult:
    tails: dict            # r -> TailReport (tail over s)
    stats_rows: list       # per-r wandering stats
    xi_hat: float
    xi_ci: tuple
    meta: dict


def run_wandering(cfg: ExperimentConfig, hres: HmuResult,
                  jobs: int = 1) -> WanderResult:
    """Wandering tails over s and the xi exponent fit across the r grid."""
    sig_d = hres.sigma_curve.to_json()
    tails = {}
    stats_rows = []
    med_w = []
    used_r = []
    for r in cfg.r_grid:
        args = [(cfg.to_dict(), i, float(r), sig_d) for i in range(cfg.replicas)]
        results = sorted(_run_replicas(_wander_replica, args, jobs))
        n_cens = sum(1 for _, _, _, _, c in results if c)
        if n_cens > cfg.censor_budget * cfg.replicas:
            raise ExcessiveCensoringError(
                f"r={r}: {n_cens}/{cfg.replicas} replicas censored; widen the "
                "window policy (increase mult/min_half_width)")
        flags = np.array([e for _, e, _, _, c in results if not c])
        tails[float(r)] = TailReport.from_exceed(
            "wandering", "s", cfg.s_grid, flags, n_cens, cfg.replicas,
            {"r": r, "K": cfg.K, "C34": cfg.C34})
        allw = np.concatenate([np.asarray(w) for _, _, w, _, c in results
                               if not c and len(w)])
        axis = np.array([aw for _, _, _, aw, c in results
                         if not c and np.isfinite(aw)])
        d_r = float(delta_of(r, hres.sigma_curve))
        med = float(np.median(axis)) if len(axis) else np.nan
        stats_rows.append((float(r), len(axis), med, float(np.median(allw)),
                           float(np.quantile(allw, 0.9)), d_r,
                           med / d_r if d_r > 0 else np.nan))
        if np.isfinite(med) and med > 0:
            used_r.append(float(r))
            med_w.append(med)
    # xi fit: slope of log median axis wandering vs log r
    x = np.log(used_r)
    y = np.log(med_w)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res_, rank_, sv_ = np.linalg.lstsq(A, y, rcond=None)
    xi = float(coef[0])
    dof = len(x) - 2
    if dof > 0:
        resid = y - A @ coef
        se = math.sqrt(float(resid @ resid) / dof / float(np.sum((x - x.mean()) ** 2)))
        from scipy import stats as _st
        tq = float(_st.t.ppf(0.975, dof))
        ci = (xi - tq * se, xi + tq * se)
    else:
        ci = (xi, xi)
    return WanderResult(tails=tails, stats_rows=stats_rows, xi_hat=xi,
                        xi_ci=ci, meta={"K": cfg.K, "C34": cfg.C34})


WANDER_STATS_HEADER = ["r", "n", "axis_median_wander", "pair_median_wander",
                       "pair_q90_wander", "delta_r", "axis_median_over_delta"]


# ------------------------------------------------------------ straightness

def _straight_replica(args):
    (cfg_d, replica, r, sig_d) = args
    cfg = ExperimentConfig.from_dict(cfg_d)
    sigma = SigmaCurve.from_json(sig_d)
    spec = StraightnessSpec(curve=monotone_envelope(sigma), C23=cfg.C23,
                            chi2=cfg.chi2)
    delta_r = float(delta_of(r, sigma))
    hw = half_width(cfg, r, sigma, transverse_need=4.0 * delta_r + 6.0)
    graph, speeds = replica_graph(cfg, r, hw, replica)
    tree = graph.kd_tree()
    left = tree.query_ball_point((0.0, 0.0), 1.0)
    right = tree.query_ball_point((r, 0.0), 1.0)
    if not left:
        left = [cell_of(graph, (0.0, 0.0))]
    if not right:
        right = [cell_of(graph, (r, 0.0))]
    sup_d = 0.0
    censored = False
    for src in sorted(left):
        dist, pred = shortest_path_tree(graph, speeds, src)
        for tgt in sorted(right):
            if not np.isfinite(dist[tgt]):
                raise DisconnectedError("ball pair disconnected")
            path = extract_path(pred, src, tgt)
            pos = graph.vertices[path]
            if is_censored(graph, pos):
                censored = True
                continue
            for u in pos:
                sup_d = max(sup_d, straightness_d_r(u, r, spec))
    return replica, sup_d, censored


@dataclass
class StraightResult:
    tails: dict        # r -> TailReport over t
    stats_rows: list   # (r, n, median_sup)


def run_straightness(cfg: ExperimentConfig, hres: HmuResult,
                     jobs: int = 1) -> StraightResult:
    sig_d = hres.sigma_curve.to_json()
    tails = {}
    stats = []
    t = np.asarray(cfg.t_grid, dtype=float)
    for r in cfg.r_grid:
        args = [(cfg.to_dict(), i, float(r), sig_d) for i in range(cfg.replicas)]
        results = sorted(_run_replicas(_straight_replica, args, jobs))
        sups = np.array([s for _, s, c in results if not c])
        n_cens = sum(1 for _, _, c in results if c)
        flags = sups[:, None] >= t[None, :]
        tails[float(r)] = TailReport.from_exceed(
            "straightness", "t", t, flags, n_cens, cfg.replicas,
            {"r": r, "C23": cfg.C23, "chi2": cfg.chi2})
        stats.append((float(r), len(sups), float(np.median(sups))))
    return StraightResult(tails=tails, stats_rows=stats)


STRAIGHT_STATS_HEADER = ["r", "n", "median_sup_D"]


# ----------------------------------------------------------------- density

def _density_replica(args):
    (cfg_d, replica) = args
    cfg = ExperimentConfig.from_dict(cfg_d)
    r_max = max(cfg.density_r)
    half = r_max + 2.0
    win = Window((-half, -half), (half, half), margin=7.0)
    sample = sample_space_time(
        win, rate=1.0, seed=child_seed(cfg.base_seed, STREAM_SAMPLE, replica))
    acc = accept(sample)
    out = []
    for r in cfg.density_r:
        c = local_density_counts(acc, float(r), np.zeros((1, 2)))[0]
        out.append(int(c))
    return replica, out


def run_density(cfg: ExperimentConfig, jobs: int = 1) -> dict:
    """Empirical tails of |V intersect B_r| / r^2 over the a grid."""
    args = [(cfg.to_dict(), i) for i in range(cfg.replicas)]
    results = sorted(_run_replicas(_density_replica, args, jobs))
    a = np.asarray(cfg.a_grid, dtype=float)
    tails = {}
    for j, r in enumerate(cfg.density_r):
        vals = np.array([rows[j] for _, rows in results], dtype=float) / r ** 2
        flags = vals[:, None] >= a[None, :]
        tails[float(r)] = TailReport.from_exceed(
            "density", "a", a, flags, 0, cfg.replicas, {"r": r})
    return tails


# ---------------------------------------------------------------- manifest

def write_manifest(path, cfg: ExperimentConfig, outputs: list[tuple[str, str]],
                   seconds: float, extra: dict | None = None) -> None:
    doc = {
        "schema": "fpplab-manifest/1",
        "tool": "fpplab",
        "version": _tool_version(),
        "config": cfg.to_dict(),
        "outputs": [{"path": str(p), "sha256": h} for p, h in outputs],
        "wall_time_s": seconds,
    }
    if extra:
        doc["summary"] = extra
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _tool_version() -> str:
    from . import __version__
    return __version__


# --------------------------------------------------------------- dispatch

def run_experiment(cfg: ExperimentConfig, out_dir, jobs: int = 1,
                   hres: HmuResult | None = None) -> dict:
    """Run one experiment kind end to end, writing CSVs and a manifest."""
    out = Path(out_dir)
    t0 = time.time()
    outputs = []
    summary: dict = {"kind": cfg.kind}

    def need_h() -> HmuResult:
        nonlocal hres
        if hres is None:
            hcfg = ExperimentConfig.from_dict({**cfg.to_dict(), "kind": "hmu"})
            hres = run_hmu(hcfg, jobs=jobs)
        return hres

    if cfg.kind == "hmu":
        res = run_hmu(cfg, jobs=jobs)
        h = write_csv(out / "hmu.csv", HMU_HEADER, hmu_rows(res))
        outputs.append((out / "hmu.csv", h))
        (out / "sigma.json").write_text(res.sigma_curve.to_json())
        outputs.append((out / "sigma.json",
                        hashlib.sha256(res.sigma_curve.to_json().encode()).hexdigest()))
        mono = run_monotone_h(res, eps=cfg.monotone_eps)
        h2 = write_csv(out / "monotone.csv", MONOTONE_HEADER, mono.rows)
        outputs.append((out / "monotone.csv", h2))
        summary.update({"mu_lo": res.mu_lo, "mu_hi": res.mu_hi,
                        "monotone_failures": len(mono.failures)})
        if len(res.r) >= 4:
            chi = fit_chi(res.sigma_curve)
            summary.update({"chi_hat": chi.chi_hat, "chi_ci": list(chi.ci95)})
    elif cfg.kind == "fluctuation":
        res = need_h()
        rows2, rows1 = [], []
        for r in cfg.r_grid[-1:]:
            rep2, rep1 = run_fluctuation(cfg, res, float(r), jobs=jobs)
            rows2 += tail_rows(rep2, lead=(float(r),))
            rows1 += tail_rows(rep1, lead=(float(r),))
        h1 = write_csv(out / "fluct_two_sided.csv", ["r"] + TAIL_HEADER, rows2)
        h2 = write_csv(out / "fluct_one_sided.csv", ["r"] + TAIL_HEADER, rows1)
        outputs += [(out / "fluct_two_sided.csv", h1),
                    (out / "fluct_one_sided.csv", h2)]
    elif cfg.kind == "wandering":
        res = need_h()
        wres = run_wandering(cfg, res, jobs=jobs)
        rows = []
        for r, rep in sorted(wres.tails.items()):
            rows += tail_rows(rep, lead=(r,))
        h1 = write_csv(out / "wander_tail.csv", ["r"] + TAIL_HEADER, rows)
        h2 = write_csv(out / "wander_stats.csv", WANDER_STATS_HEADER,
                       wres.stats_rows)
        outputs += [(out / "wander_tail.csv", h1), (out / "wander_stats.csv", h2)]
        summary.update({"xi_hat": wres.xi_hat, "xi_ci": list(wres.xi_ci)})
    elif cfg.kind == "straightness":
        res = need_h()
        sres = run_straightness(cfg, res, jobs=jobs)
        rows = []
        for r, rep in sorted(sres.tails.items()):
            rows += tail_rows(rep, lead=(r,))
        h1 = write_csv(out / "straight_tail.csv", ["r"] + TAIL_HEADER, rows)
        h2 = write_csv(out / "straight_stats.csv", STRAIGHT_STATS_HEADER,
                       sres.stats_rows)
        outputs += [(out / "straight_tail.csv", h1),
                    (out / "straight_stats.csv", h2)]
    elif cfg.kind == "density":
        tails = run_density(cfg, jobs=jobs)
        rows = []
        for r, rep in sorted(tails.items()):
            rows += tail_rows(rep, lead=(r,))
        h1 = write_csv(out / "density_tail.csv", ["r"] + TAIL_HEADER, rows)
        outputs.append((out / "density_tail.csv", h1))
    else:
        raise ValueError(f"unknown experiment kind {cfg.kind!r}")

    write_manifest(out / "manifest.json", cfg,
                   [(str(p), h) for p, h in outputs], time.time() - t0, summary)
    return {"outputs": outputs, "summary": summary}
