"""Scaling functionals: sigma curves, exponent fits, powerlike envelopes,
and the straightness functional whose sublevel sets form the tube-and-
cylinders region.

Sigma curves are represented piecewise-linearly in log-log coordinates; all
derived functionals evaluate against that interpolant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _stats

SIGMA_SCHEMA = "fpplab-sigma-curve/1"
ENVELOPE_SCHEMA = "fpplab-envelope/1"


@dataclass(frozen=True)
class SigmaCurve:
    """Estimated fluctuation scale (r, sigma_r) with jackknife errors."""

    r: np.ndarray
    sigma: np.ndarray
    stderr: np.ndarray
    n: np.ndarray
    source: str = ""

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        if len(r) and not np.all(np.diff(r) > 0):
            raise ValueError("r grid must be strictly increasing")
        if np.any(np.asarray(self.sigma) <= 0):
            raise ValueError("sigma values must be positive (degenerate curve)")
        if np.any(np.asarray(self.stderr) < 0):
            raise ValueError("stderr must be nonnegative")

    def __call__(self, r):
        """Log-log piecewise-linear interpolation (end slopes extrapolate)."""
        r = np.asarray(r, dtype=float)
        lr = np.log(self.r)
        ls = np.log(self.sigma)
        out = np.interp(np.log(r), lr, ls)
        # extrapolate with the boundary segment slopes
        if len(lr) >= 2:
            lo = np.log(r) < lr[0]
            hi = np.log(r) > lr[-1]
            if np.any(lo):
                s0 = (ls[1] - ls[0]) / (lr[1] - lr[0])
                out = np.where(lo, ls[0] + s0 * (np.log(r) - lr[0]), out)
            if np.any(hi):
                s1 = (ls[-1] - ls[-2]) / (lr[-1] - lr[-2])
                out = np.where(hi, ls[-1] + s1 * (np.log(r) - lr[-1]), out)
        return np.exp(out)

    def to_json(self) -> str:
        return json.dumps({
            "schema": SIGMA_SCHEMA,
            "source": self.source,
            "r": list(map(float, self.r)),
            "sigma": list(map(float, self.sigma)),
            "stderr": list(map(float, self.stderr)),
            "n": list(map(int, self.n)),
        }, separators=(",", ":"))

    @staticmethod
    def from_json(text: str) -> "SigmaCurve":
        doc = json.loads(text)
        if doc.get("schema") != SIGMA_SCHEMA:
            raise ValueError(f"unsupported sigma schema {doc.get('schema')!r}")
        return SigmaCurve(r=np.array(doc["r"]), sigma=np.array(doc["sigma"]),
                          stderr=np.array(doc["stderr"]),
                          n=np.array(doc["n"], dtype=int),
                          source=doc.get("source", ""))


def _jackknife_sd(values: np.ndarray) -> float:
    """Delete-one jackknife standard error of the sample SD."""
    n = len(values)
    if n < 3:
        return 0.0
    total = np.sum(values)
    total2 = np.sum(values * values)
    loo_mean = (total - values) / (n - 1)
    loo_var = (total2 - values * values - (n - 1) * loo_mean ** 2) / (n - 2)
    loo_sd = np.sqrt(np.maximum(loo_var, 0.0))
    return float(np.sqrt((n - 1) / n * np.sum((loo_sd - loo_sd.mean()) ** 2)))


def estimate_sigma(samples: dict[float, np.ndarray], source: str = "",
                   min_n: int = 20) -> SigmaCurve:
    """Sample-SD curve over r with jackknife standard errors.

    ``samples`` maps r to the uncensored passage-time values at that r.
    """
    rs = sorted(samples)
    sig, err, cnt = [], [], []
    for r in rs:
        v = np.asarray(samples[r], dtype=float)
        if len(v) < min_n:
            raise ValueError(f"need >= {min_n} uncensored samples at r={r}")
        s = float(np.std(v, ddof=1))
        if s <= 0.0:
            raise ValueError(f"degenerate (constant) samples at r={r}")
        sig.append(s)
        err.append(_jackknife_sd(v))
        cnt.append(len(v))
    return SigmaCurve(r=np.array(rs, dtype=float), sigma=np.array(sig),
                      stderr=np.array(err), n=np.array(cnt), source=source)


@dataclass(frozen=True)
class ChiFit:
    chi_hat: float
    ci95: tuple[float, float]
    intercept: float
    stderr: float


def fit_chi(curve: SigmaCurve) -> ChiFit:
    """Weighted log-log slope of the sigma curve (inverse squared relative
    stderr weights); 95% CI from the linear model."""
    if len(curve.r) < 4:
        raise ValueError("need at least 4 distinct r values")
    x = np.log(curve.r)
    y = np.log(curve.sigma)
    rel = np.asarray(curve.stderr) / np.asarray(curve.sigma)
    floor = max(1e-12, np.min(rel[rel > 0], initial=1e-12))
    rel = np.maximum(rel, floor)
    w = 1.0 / rel ** 2
    W = np.sum(w)
    xbar = np.sum(w * x) / W
    ybar = np.sum(w * y) / W
    sxx = np.sum(w * (x - xbar) ** 2)
    slope = float(np.sum(w * (x - xbar) * (y - ybar)) / sxx)
    intercept = float(ybar - slope * xbar)
    resid = y - (intercept + slope * x)
    dof = len(x) - 2
    s2 = float(np.sum(w * resid ** 2) / dof) if dof > 0 else 0.0
    se = float(np.sqrt(s2 / sxx))
    tq = float(_stats.t.ppf(0.975, dof)) if dof > 0 else 0.0
    return ChiFit(chi_hat=slope, ci95=(slope - tq * se, slope + tq * se),
                  intercept=intercept, stderr=se)


def delta_of(r, curve: SigmaCurve):
    """Wandering scale (r * sigma_r)^(1/2)."""
    r = np.asarray(r, dtype=float)
    return np.sqrt(r * curve(r))


def monotone_envelope(curve: SigmaCurve) -> SigmaCurve:
    """Running max, then a <= 1e-9 relative strictly-increasing perturbation.

    Yields a strictly increasing continuous curve without moving any value by
    more than one part in 1e9.
    """
    run = np.maximum.accumulate(curve.sigma)
    n = len(run)
    bump = 1e-9 * np.arange(1, n + 1) / n
    return SigmaCurve(r=curve.r.copy(), sigma=run * (1.0 + bump),
                      stderr=curve.stderr.copy(), n=curve.n.copy(),
                      source=curve.source + "+envelope")


@dataclass(frozen=True)
class PowerlikeParams:
    chi: float
    chi1: float
    chi2: float
    C21: float
    C22: float
    C23: float

    def __post_init__(self):
        if not (0.0 < self.chi1 < self.chi < self.chi2):
            raise ValueError("need 0 < chi1 < chi < chi2")
        if min(self.C21, self.C22, self.C23) <= 0:
            raise ValueError("constants must be positive")


@dataclass(frozen=True)
class PowerlikeReport:
    violations: list
    tight_C22: float
    tight_C23: float
    n_pairs: int


def powerlike_check(curve: SigmaCurve, params: PowerlikeParams) -> PowerlikeReport:
    """Check the two-sided ratio bound on all sampled pairs s >= r >= C21.

    Also reports the tightest constants consistent with the data at the given
    exponents.
    """
    r = curve.r
    s = curve.sigma
    idx = np.nonzero(r >= params.C21)[0]
    violations = []
    tight22 = np.inf
    tight23 = 0.0
    n_pairs = 0
    for ii in range(len(idx)):
        for jj in range(ii, len(idx)):
            i, j = idx[ii], idx[jj]  # r_i <= r_j
            n_pairs += 1
            ratio = s[j] / s[i]
            scale = r[j] / r[i]
            lo = params.C22 * scale ** params.chi1
            hi = params.C23 * scale ** params.chi2
            if ratio < lo - 1e-12 or ratio > hi + 1e-12:
                violations.append((float(r[i]), float(r[j]), float(ratio),
                                   float(lo), float(hi)))
            tight22 = min(tight22, ratio / scale ** params.chi1)
            tight23 = max(tight23, ratio / scale ** params.chi2)
    return PowerlikeReport(violations=violations, tight_C22=float(tight22),
                           tight_C23=float(tight23), n_pairs=n_pairs)


# ------------------------------------------------------- powerlike envelope

@dataclass(frozen=True)
class PowerlikeEnvelope:
    """Sublinearly powerlike majorant built from dyadic block suprema.

    In log coordinates t = log r, f(t) = log rho(e^t) - chi t is majorized by
    a piecewise-linear f_tilde with knots at a_k = 1.5 * 2^(k-1) * M and
    2^k * M, flat below a_1 and beyond the last knot; slopes are bounded by
    epsilon.  rho_tilde(r) = exp(f_tilde(log r) + chi log r).
    """

    sample_r: np.ndarray
    sample_rho: np.ndarray
    M: float
    epsilon: float
    chi: float
    betas: np.ndarray
    knot_t: np.ndarray
    knot_f: np.ndarray
    max_slope: float

    def f_tilde(self, t):
        t = np.asarray(t, dtype=float)
        return np.interp(t, self.knot_t, self.knot_f)

    def rho_tilde(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 1.0):
            raise ValueError("rho_tilde is defined for r > 1")
        lt = np.log(r)
        return np.exp(self.f_tilde(lt) + self.chi * lt)

    def params(self) -> PowerlikeParams:
        eps = max(self.max_slope, 1e-12)
        return PowerlikeParams(chi=self.chi, chi1=self.chi - eps,
                               chi2=self.chi + eps,
                               C21=float(np.min(self.sample_r)),
                               C22=1.0, C23=1.0)

    def to_json(self) -> str:
        return json.dumps({
            "schema": ENVELOPE_SCHEMA,
            "M": self.M, "epsilon": self.epsilon, "chi": self.chi,
            "max_slope": self.max_slope,
            "betas": list(map(float, self.betas)),
            "knot_t": list(map(float, self.knot_t)),
            "knot_f": list(map(float, self.knot_f)),
            "sample_r": list(map(float, self.sample_r)),
            "sample_rho": list(map(float, self.sample_rho)),
        }, separators=(",", ":"))


def _block_construction(t: np.ndarray, f: np.ndarray, M: float):
    """Block suprema and the piecewise-linear knot sequence for base M."""
    kmax = int(np.ceil(np.log2(max(np.max(t) / M, 1.0000001))))
    kmax = max(kmax, 1)
    betas = np.full(kmax, -np.inf)
    for ti, fi in zip(t, f):
        k = int(np.ceil(np.log2(ti / M)))
        k = min(max(k, 1), kmax)
        betas[k - 1] = max(betas[k - 1], fi)
    # carry values across empty blocks (no sample -> no constraint)
    for k in range(kmax):
        if not np.isfinite(betas[k]):
            betas[k] = betas[k - 1] if k > 0 else 0.0
    if not np.isfinite(betas[0]):
        betas[0] = 0.0
    # knots: (a_k, beta_k) and (2^k M, max(beta_k, beta_{k+1})) for each k
    knot_t = []
    knot_f = []
    for k in range(1, kmax + 1):
        a_k = 1.5 * 2.0 ** (k - 1) * M
        knot_t.append(a_k)
        knot_f.append(betas[k - 1])
        if k < kmax:
            knot_t.append(2.0 ** k * M)
            knot_f.append(max(betas[k - 1], betas[k]))
    return betas, np.array(knot_t), np.array(knot_f)


def sublin_majorant(sample_r, sample_rho, chi: float, epsilon: float,
                    M: float | None = None) -> PowerlikeEnvelope:
    """Construct the sublinearly powerlike majorant of sampled (r, rho).

    With M unset, the smallest power of 2 whose block construction has every
    slope <= epsilon / 2 is used.  An explicit M whose slopes exceed epsilon
    raises (the base is too small for the requested flatness).
    """
    sample_r = np.asarray(sample_r, dtype=float)
    sample_rho = np.asarray(sample_rho, dtype=float)
    if np.any(sample_r <= 1.0):
        raise ValueError("all sample r must exceed 1")
    if not (0.0 < chi < 1.0):
        raise ValueError("chi must lie in (0, 1)")
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    t = np.log(sample_r)
    f = np.log(sample_rho) - chi * t

    def slopes_for(base):
        betas, kt, kf = _block_construction(t, f, base)
        if len(kt) >= 2:
            sl = np.abs(np.diff(kf) / np.diff(kt))
            ms = float(np.max(sl)) if len(sl) else 0.0
        else:
            ms = 0.0
        return betas, kt, kf, ms

    if M is None:
        base = 1.0
        for _ in range(48):
            betas, kt, kf, ms = slopes_for(base)
            if ms <= epsilon / 2.0:
                break
            base *= 2.0
        else:
            raise RuntimeError("no block base M reaches the slope bound")
        M = base
    else:
        betas, kt, kf, ms = slopes_for(float(M))
        if ms > epsilon:
            raise ValueError(
                f"max slope {ms:.3g} exceeds epsilon={epsilon}; increase M")
    return PowerlikeEnvelope(sample_r=sample_r, sample_rho=sample_rho,
                             M=float(M), epsilon=float(epsilon), chi=float(chi),
                             betas=betas, knot_t=kt, knot_f=kf,
                             max_slope=float(ms))


# -------------------------------------------------------- straightness D_r

@dataclass(frozen=True)
class StraightnessSpec:
    """Inputs for the straightness functional: a strictly increasing sigma."""

    curve: SigmaCurve
    C23: float
    chi2: float

    def __post_init__(self):
        s = np.asarray(self.curve.sigma)
        if np.any(np.diff(s) <= 0):
            raise ValueError(
                "sigma must be strictly increasing; apply monotone_envelope")
        if self.C23 <= 0 or not (0.0 < self.chi2 < 1.0):
            raise ValueError("need C23 > 0 and chi2 in (0, 1)")

    def sigma(self, s):
        return self.curve(s)

    def _sup_term(self, s: float) -> float:
        """sup_{t <= s} t^(1-chi2) / (sigma_t log(2+t)), discretized over the
        curve samples below s plus the endpoint s itself."""
        ts = self.curve.r[self.curve.r <= s]
        ts = np.append(ts, s) if s > 0 else np.asarray([])
        if len(ts) == 0:
            return 0.0
        vals = ts ** (1.0 - self.chi2) / (self.curve(ts) * np.log(2.0 + ts))
        return float(np.max(vals))

    def sigma_star(self, s: float) -> float:
        if s <= 0:
            return 0.0
        sup = self._sup_term(s)
        return s ** (1.0 - self.chi2) / (np.log(2.0 + s) * sup)

    def phi(self, s: float) -> float:
        """Phi(s) = s / (C23 sigma*(s) log(2+s)), strictly increasing."""
        if s <= 0:
            return 0.0
        return s ** self.chi2 * self._sup_term(s) / self.C23

    def xi(self, s: float) -> float:
        """Xi(s) = (s sigma(s) log(2+s))^(1/2)."""
        if s <= 0:
            return 0.0
        return float(np.sqrt(s * self.curve(s) * np.log(2.0 + s)))


def straightness_d(u, spec: StraightnessSpec) -> float:
    """D(u): transverse-cost functional of a point relative to 0 -> (far, 0)."""
    u1 = float(u[0])
    ustar = abs(float(u[1]))
    phi_term = spec.phi(max(abs(u1), ustar))
    if u1 < 0:
        return phi_term
    xi = spec.xi(u1)
    if xi == 0.0:
        tube = 0.0 if ustar == 0.0 else np.inf
    else:
        tube = (ustar / xi) ** 2
    return float(min(tube, phi_term))


def straightness_d_r(u, r: float, spec: StraightnessSpec) -> float:
    """D_r(u): D reflected about the midplane u1 = r / 2."""
    u = np.asarray(u, dtype=float)
    if u[0] <= 0.5 * r:
        return straightness_d(u, spec)
    return straightness_d((r - u[0], u[1]), spec)


@dataclass(frozen=True)
class ThetaTransform:
    """Isometry taking u to the origin and v to |v - u| e_1."""

    u: np.ndarray
    rot: np.ndarray  # (2, 2)

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        return (p - self.u) @ self.rot.T

    def inverse(self, q):
        q = np.asarray(q, dtype=float)
        return q @ self.rot + self.u


def theta_transform(u, v) -> ThetaTransform:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    d = v - u
    nrm = float(np.hypot(*d))
    if nrm == 0.0:
        raise ValueError("u and v must differ")
    c, s = d / nrm
    rot = np.array([[c, s], [-s, c]])
    return ThetaTransform(u=u, rot=rot)
