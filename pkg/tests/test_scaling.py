import numpy as np
import pytest

from fpplab.scaling import (ChiFit, PowerlikeParams, SigmaCurve,
                            StraightnessSpec, delta_of, estimate_sigma,
                            fit_chi, monotone_envelope, powerlike_check,
                            straightness_d, straightness_d_r, sublin_majorant,
                            theta_transform)


def power_curve(rs, chi=1.0 / 3.0, amp=1.0, stderr_rel=0.02):
    rs = np.asarray(rs, dtype=float)
    sig = amp * rs ** chi
    return SigmaCurve(r=rs, sigma=sig, stderr=stderr_rel * sig,
                      n=np.full(len(rs), 100))


class TestEstimateSigma:
    def test_constant_samples_rejected(self):
        with pytest.raises(ValueError):
            estimate_sigma({10.0: np.full(30, 2.5)})

    def test_two_point_sd(self):
        vals = np.array([0.0, 2.0] * 20)
        curve = estimate_sigma({5.0: vals})
        assert curve.sigma[0] == pytest.approx(
            np.std(vals, ddof=1), rel=1e-12)
        assert curve.stderr[0] >= 0

    def test_recovers_synthetic_scale(self):
        rng = np.random.default_rng(8)
        rs = [10.0, 20.0, 40.0, 80.0]
        samples = {r: rng.normal(0.22 * r, r ** (1 / 3), 400) for r in rs}
        curve = estimate_sigma(samples)
        for i, r in enumerate(rs):
            assert abs(curve.sigma[i] - r ** (1 / 3)) < 3.5 * max(
                curve.stderr[i], 1e-12) + 0.05

    def test_min_samples(self):
        with pytest.raises(ValueError):
            estimate_sigma({3.0: np.arange(5.0)})


class TestFitChi:
    def test_exact_power_law(self):
        curve = power_curve([10, 20, 40, 80, 160], chi=1.0 / 3.0, stderr_rel=0.0)
        fit = fit_chi(curve)
        assert fit.chi_hat == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_amplitude_absorbed(self):
        curve = power_curve([10, 20, 40, 80], chi=0.4, amp=2.0, stderr_rel=0.0)
        fit = fit_chi(curve)
        assert fit.chi_hat == pytest.approx(0.4, abs=1e-12)
        assert np.exp(fit.intercept) == pytest.approx(2.0, rel=1e-9)

    def test_ci_coverage_on_noisy_data(self):
        rng = np.random.default_rng(303)
        rs = np.array([10.0, 20.0, 40.0, 80.0, 160.0])
        hits = 0
        trials = 100
        for _ in range(trials):
            sig = rs ** 0.33 * np.exp(rng.normal(0, 0.03, len(rs)))
            curve = SigmaCurve(r=rs, sigma=sig, stderr=0.03 * sig,
                               n=np.full(len(rs), 50))
            fit = fit_chi(curve)
            if fit.ci95[0] <= 0.33 <= fit.ci95[1]:
                hits += 1
        assert hits >= 90

    def test_needs_four_points(self):
        with pytest.raises(ValueError):
            fit_chi(power_curve([10, 20, 30]))


class TestDelta:
    def test_power_third(self):
        curve = power_curve([10, 50, 100, 200], chi=1.0 / 3.0, stderr_rel=0.0)
        assert delta_of(100.0, curve) == pytest.approx(100.0 ** (2.0 / 3.0),
                                                       rel=1e-9)

    def test_constant_sigma(self):
        rs = np.array([5.0, 10.0, 20.0])
        curve = SigmaCurve(r=rs, sigma=np.full(3, 4.0), stderr=np.zeros(3),
                           n=np.full(3, 30))
        assert delta_of(9.0, curve) == pytest.approx(np.sqrt(4.0 * 9.0))

    def test_interpolation_bracketed(self):
        curve = power_curve([10, 100], chi=0.4, stderr_rel=0.0)
        mid = float(curve(31.62))
        assert curve.sigma[0] <= mid <= curve.sigma[1]


class TestMonotoneEnvelope:
    def test_increasing_input_nearly_unchanged(self):
        curve = power_curve([10, 20, 40], chi=0.3, stderr_rel=0.0)
        env = monotone_envelope(curve)
        assert np.allclose(env.sigma, curve.sigma, rtol=2e-9)
        assert np.all(np.diff(env.sigma) > 0)

    def test_dip_flattened(self):
        rs = np.array([10.0, 20.0, 40.0, 80.0])
        sig = np.array([1.0, 2.0, 1.5, 2.5])
        curve = SigmaCurve(r=rs, sigma=sig, stderr=np.zeros(4), n=np.full(4, 30))
        env = monotone_envelope(curve)
        assert env.sigma[2] >= 2.0
        assert np.all(np.diff(env.sigma) > 0)

    def test_random_inputs_property(self):
        rng = np.random.default_rng(44)
        for _ in range(50):
            k = int(rng.integers(2, 12))
            rs = np.sort(rng.uniform(2, 500, k))
            rs = np.unique(rs)
            sig = rng.uniform(0.5, 5.0, len(rs))
            curve = SigmaCurve(r=rs, sigma=sig, stderr=np.zeros(len(rs)),
                               n=np.full(len(rs), 30))
            env = monotone_envelope(curve)
            assert np.all(env.sigma >= sig - 1e-15)
            assert np.all(np.diff(env.sigma) > 0)


class TestPowerlike:
    def test_exact_power_no_violations(self):
        curve = power_curve(np.geomspace(10, 300, 8), chi=1.0 / 3.0,
                            stderr_rel=0.0)
        params = PowerlikeParams(chi=1.0 / 3.0, chi1=0.2, chi2=0.45,
                                 C21=1.0, C22=1.0, C23=1.0)
        rep = powerlike_check(curve, params)
        assert rep.violations == []
        assert rep.tight_C23 <= 1.0 + 1e-9

    def test_jump_violates(self):
        rs = np.array([10.0, 20.0, 21.0, 40.0])
        sig = np.array([1.0, 1.2, 12.0, 13.0])
        curve = SigmaCurve(r=rs, sigma=sig, stderr=np.zeros(4), n=np.full(4, 30))
        params = PowerlikeParams(chi=1.0 / 3.0, chi1=0.2, chi2=0.45,
                                 C21=1.0, C22=1.0, C23=1.0)
        rep = powerlike_check(curve, params)
        assert len(rep.violations) > 0
        assert rep.tight_C23 > 5.0


class TestSublinMajorant:
    def test_exact_power_is_fixed_point(self):
        rs = np.geomspace(3.0, 4000.0, 60)
        rho = rs ** 0.4
        env = sublin_majorant(rs, rho, chi=0.4, epsilon=0.05)
        assert np.max(np.abs(env.betas)) < 1e-12
        assert np.allclose(env.rho_tilde(rs), rho, rtol=1e-12)

    def test_bump_majorized_everywhere(self):
        rs = np.geomspace(3.0, 5000.0, 400)
        chi = 1.0 / 3.0
        bump = np.where((rs > 50) & (rs < 120), 1.6, 1.0)
        rho = bump * rs ** chi
        env = sublin_majorant(rs, rho, chi=chi, epsilon=0.2)
        assert np.all(env.rho_tilde(rs) >= rho * (1 - 1e-12))
        # flat-tops the bump's block: strictly above the clean power there
        assert env.rho_tilde(80.0) >= 1.6 * 80.0 ** chi * (1 - 1e-12)

    def test_slope_bound_certified(self):
        rng = np.random.default_rng(5)
        rs = np.geomspace(2.0, 3000.0, 200)
        for _ in range(5):
            noise = np.exp(rng.normal(0.0, 0.15, len(rs)))
            rho = noise * rs ** 0.3
            env = sublin_majorant(rs, rho, chi=0.3, epsilon=0.1)
            assert env.max_slope <= 0.05 + 1e-12  # chosen M targets eps/2
            # pairwise log-ratio slopes beyond a_1
            a1 = 1.5 * env.M
            grid = rs[np.log(rs) > a1]
            vals = env.rho_tilde(grid)
            lv, lg = np.log(vals), np.log(grid)
            for i in range(0, len(grid) - 1, 7):
                for j in range(i + 1, len(grid), 11):
                    slope = (lv[j] - lv[i]) / (lg[j] - lg[i])
                    assert 0.3 - 0.1 <= slope <= 0.3 + 0.1

    def test_explicit_M_too_small(self):
        rs = np.geomspace(2.0, 3000.0, 80)
        rho = np.where(rs > 50, 10.0, 1.0) * rs ** 0.3
        with pytest.raises(ValueError):
            sublin_majorant(rs, rho, chi=0.3, epsilon=1e-4, M=1.0)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            sublin_majorant([0.5, 2.0], [1.0, 1.0], chi=0.3, epsilon=0.1)
        with pytest.raises(ValueError):
            sublin_majorant([2.0, 4.0], [1.0, 1.0], chi=1.5, epsilon=0.1)


def straight_spec(chi=1.0 / 3.0, C23=1.5, chi2=0.45):
    # the curve starts at the powerlike threshold (C21 scale); below it the
    # sup in sigma* may be dominated by small-r terms and the paper's
    # two-sided bracket need not hold
    curve = power_curve(np.geomspace(10.0, 600.0, 40), chi=chi, stderr_rel=0.0)
    return StraightnessSpec(curve=monotone_envelope(curve), C23=C23, chi2=chi2)


class TestStraightness:
    def test_sigma_star_bracket(self):
        spec = straight_spec()
        for s in (5.0, 20.0, 100.0, 400.0):
            star = spec.sigma_star(s)
            sig = float(spec.curve(s))
            assert sig / spec.C23 - 1e-9 <= star <= sig * (1 + 1e-9)

    def test_phi_strictly_increasing(self):
        spec = straight_spec()
        ss = np.geomspace(0.5, 500.0, 60)
        vals = [spec.phi(float(s)) for s in ss]
        assert np.all(np.diff(vals) > 0)

    def test_on_axis_zero(self):
        spec = straight_spec()
        assert straightness_d_r((25.0, 0.0), 100.0, spec) == 0.0

    def test_negative_u1_phi_branch(self):
        spec = straight_spec()
        u = (-5.0, 3.0)
        want = spec.phi(max(5.0, 3.0))
        assert straightness_d(u, spec) == pytest.approx(want, rel=1e-12)

    def test_large_transverse_phi_branch(self):
        # |u*| >= u1 >= 0 selects the Phi branch for large |u|
        spec = straight_spec()
        u = (30.0, 200.0)
        want = spec.phi(200.0)
        assert straightness_d(u, spec) == pytest.approx(want, rel=1e-9)

    def test_reflection_symmetry(self):
        spec = straight_spec()
        rng = np.random.default_rng(31)
        r = 120.0
        for _ in range(300):
            u = rng.uniform((-20, -40), (r + 20, 40))
            a = straightness_d_r(u, r, spec)
            b = straightness_d_r((r - u[0], u[1]), r, spec)
            assert a == pytest.approx(b, rel=1e-12, abs=1e-15)

    def test_nonnegative(self):
        spec = straight_spec()
        rng = np.random.default_rng(32)
        for _ in range(200):
            u = rng.uniform((-50, -50), (150, 50))
            assert straightness_d_r(u, 100.0, spec) >= 0.0

    def test_requires_monotone_sigma(self):
        rs = np.array([10.0, 20.0, 40.0])
        sig = np.array([2.0, 1.0, 3.0])
        curve = SigmaCurve(r=rs, sigma=sig, stderr=np.zeros(3), n=np.full(3, 30))
        with pytest.raises(ValueError):
            StraightnessSpec(curve=curve, C23=1.5, chi2=0.45)


class TestTheta:
    def test_axis_cases(self):
        th = theta_transform((0.0, 0.0), (3.0, 0.0))
        assert np.allclose(th((3.0, 0.0)), (3.0, 0.0))
        th2 = theta_transform((1.0, 1.0), (1.0, 5.0))
        assert np.allclose(th2((1.0, 5.0)), (4.0, 0.0))
        assert np.allclose(th2((1.0, 1.0)), (0.0, 0.0))

    def test_isometry(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            u, v = rng.uniform(-10, 10, (2, 2))
            if np.allclose(u, v):
                continue
            th = theta_transform(u, v)
            a, b = rng.uniform(-20, 20, (2, 2))
            d1 = np.hypot(*(a - b))
            d2 = np.hypot(*(th(a) - th(b)))
            assert d1 == pytest.approx(d2, abs=1e-12, rel=1e-12)
            # inverse round-trip
            assert np.allclose(th.inverse(th(a)), a, atol=1e-12)

    def test_degenerate(self):
        with pytest.raises(ValueError):
            theta_transform((1.0, 1.0), (1.0, 1.0))
