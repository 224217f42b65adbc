"""Barrier family: profile algebra, collision values, scaling threshold."""

import numpy as np
import pytest
from scipy.integrate import quad

from kfplab.cutoffs import (
    CutoffReport,
    build_cutoff_family,
    check_properties,
    epsilon0,
    level_cutoff,
    psi_collision,
    scaling_gap,
)
from kfplab.kernel import Kernel, apply_L
from kfplab.phase import make_grid

# junction coefficients solve p(1)=1, p'(1)=u, p''(1)=u(u-1) with u=s/2
JUNCTION_S04 = (9.12, -13.44, 5.32)
JUNCTION_S03 = (9.33625, -13.8225, 5.48625)

# collision values of psi_theta for the unit homogeneous kernel, s=0.3,
# frozen from a split-interval quadrature oracle (near field with junction
# breakpoints, analytic-power far field)
L_PSI_V0 = {1 / 8: 1.586374135086, 1 / 16: 1.171538806789, 1 / 32: 0.861137262498}
L_PSI_V2 = {1 / 8: 1.617346206707, 1 / 16: 1.177339695320, 1 / 32: 0.862217741753}
LADDER_EXPONENT = 0.4714

# largest contraction ratio passing the doubling bound on [1, 1e5]
EPS0_S03_T8 = 0.00049838
EPS0_S03_T16 = 0.00065513
EPS0_S045_T8 = 0.01018684

# sup |L F| for the blunt well, s=0.3, homogeneous unit kernel
SUP_LF_S03_NV256 = 4.0387


@pytest.fixture(scope="module")
def fam03():
    return build_cutoff_family(0.3, 1)


@pytest.fixture(scope="module")
def fam04():
    return build_cutoff_family(0.4, 1)


@pytest.fixture(scope="module")
def hom03():
    return Kernel(n=1, s=0.3, kappa=2.0, family="homogeneous", c=1.0)


def solve_junction(s):
    u = s / 2.0
    A = np.array([[1.0, 1.0, 1.0], [3.0, 4.0, 5.0], [6.0, 12.0, 20.0]])
    return np.linalg.solve(A, np.array([1.0, u, u * (u - 1.0)]))


class TestProfile:
    def test_build_rejects_bad_order(self):
        with pytest.raises(ValueError):
            build_cutoff_family(0.0, 1)
        with pytest.raises(ValueError):
            build_cutoff_family(1.0, 1)
        with pytest.raises(ValueError):
            build_cutoff_family(0.6, 1)

    def test_junction_closed_form_matches_solve(self, fam03, fam04):
        np.testing.assert_allclose(fam04.junction, JUNCTION_S04, rtol=1e-12)
        np.testing.assert_allclose(fam03.junction, JUNCTION_S03, rtol=1e-12)
        for s in (0.27, 0.4, 0.85):
            fam = build_cutoff_family(s, 2 if s < 0.5 else 3)
            np.testing.assert_allclose(fam.junction, solve_junction(s), rtol=1e-12)

    def test_g_branches(self, fam04):
        assert fam04.g(-2.0) == 0.0
        assert fam04.g(0.0) == 0.0
        np.testing.assert_allclose(fam04.g(1.0), 1.0, rtol=1e-12)
        np.testing.assert_allclose(fam04.g(4.0), 4.0**0.2, rtol=1e-12)
        x = np.linspace(-1.0, 5.0, 6001)
        gx = fam04.g(x)
        assert np.all(np.diff(gx) >= -1e-14)
        pos = x > 0
        assert np.all(gx[pos] <= x[pos] ** 0.2 + 1e-12)

    def test_g_is_twice_differentiable_at_junctions(self, fam03):
        # second differences stay bounded and continuous across 0 and 1
        h = 1e-4
        for x0 in (0.0, 1.0):
            left = (fam03.g(x0 - h) - 2 * fam03.g(x0 - h / 2) + fam03.g(x0)) / (h / 2) ** 2
            right = (fam03.g(x0) - 2 * fam03.g(x0 + h / 2) + fam03.g(x0 + h)) / (h / 2) ** 2
            assert abs(left - right) < 0.05

    def test_shifted_profile_decreases_in_shift(self, fam03):
        x = np.linspace(0.0, 50.0, 501)
        a = fam03.g_r(x, 2.0)
        b = fam03.g_r(x, 5.0)
        assert np.all(b <= a + 1e-14)

    def test_psi_theta_support_radius(self, fam04):
        v = np.linspace(-6.0, 6.0, 4001)
        p = fam04.psi_theta(v, 0.25)
        assert np.all(p[np.abs(v) <= 4.0] == 0.0)
        assert fam04.psi_theta(4.5, 0.25) > 0.0
        with pytest.raises(ValueError):
            fam04.psi_theta(v, 0.0)

    def test_power_inversion_is_exact(self, fam04):
        # g(32) = 32^(s/2) = 2 exactly at s = 0.4, so the barrier at
        # radius 1/theta + 32 hits the value 2 on the nose
        np.testing.assert_allclose(fam04.psi_theta(36.0, 0.25), 2.0, rtol=1e-13)

    def test_reference_barrier_constant(self, fam03, fam04):
        np.testing.assert_allclose(fam03.C1, 2.1, rtol=1e-9)
        np.testing.assert_allclose(fam04.C1, 2.1, rtol=1e-9)
        v = np.linspace(-9.0, 9.0, 2001)
        np.testing.assert_allclose(fam03.psi1(v), 2.1 * fam03.g(np.abs(v) - 1.0), rtol=0, atol=1e-14)

    def test_headroom_beyond_radius_two(self, fam03):
        v = np.linspace(2.0, 400.0, 20001)
        for th in (0.05, 0.2, 0.5, 0.9, 0.999):
            gap = fam03.psi1(v) - 1.0 - fam03.psi_theta(v, th)
            assert gap.min() >= -1e-12


class TestCollision:
    def test_frozen_values_at_origin(self, fam03, hom03):
        for th, want in L_PSI_V0.items():
            got = psi_collision(hom03, fam03, th, 0.0)
            np.testing.assert_allclose(got, want, rtol=1e-6)

    def test_frozen_values_off_center(self, fam03, hom03):
        for th, want in L_PSI_V2.items():
            got = psi_collision(hom03, fam03, th, 2.0)
            np.testing.assert_allclose(got, want, rtol=1e-6)

    def test_evenness(self, fam03, hom03):
        a = psi_collision(hom03, fam03, 1 / 8, -2.0)
        b = psi_collision(hom03, fam03, 1 / 8, 2.0)
        np.testing.assert_allclose(a, b, rtol=1e-9)

    def test_closed_route_at_origin(self, fam03, hom03):
        # at v=0 the symmetrized integral collapses to 2 int K g(h - r)
        s, r = 0.3, 16.0
        near, _ = quad(lambda y: (y + r) ** (-1 - 2 * s) * fam03.g(y), 0.0, 1.0)
        far, _ = quad(lambda y: (y + r) ** (-1 - 2 * s) * y ** (s / 2), 1.0, np.inf)
        want = 2.0 * (near + far)
        got = psi_collision(hom03, fam03, 1 / 16, 0.0)
        np.testing.assert_allclose(got, want, rtol=1e-8)

    def test_truncated_kernel_sees_less(self, fam03):
        trunc = Kernel(n=1, s=0.3, kappa=2.0, family="truncated", c=1.0)
        hom = Kernel(n=1, s=0.3, kappa=2.0, family="homogeneous", c=1.0)
        # the band |h| <= 6 cannot reach the barrier from deep inside
        # its dead zone, so the truncated value at the origin is zero
        assert psi_collision(trunc, fam03, 1 / 8, 0.0) == 0.0
        a = psi_collision(trunc, fam03, 1 / 8, 4.0)
        b = psi_collision(hom, fam03, 1 / 8, 4.0)
        assert 0.0 < a < b

    def test_modulated_kernel_runs(self, fam03):
        mod = Kernel(n=1, s=0.3, kappa=2.0, family="modulated", c=1.0)
        val = psi_collision(mod, fam03, 1 / 8, 1.0, t=0.3, x=0.7)
        assert np.isfinite(val) and val > 0.0

    def test_two_dimensional_rejected(self, fam03):
        k2 = Kernel(n=2, s=0.3, kappa=2.0, family="homogeneous", c=1.0)
        with pytest.raises(NotImplementedError):
            psi_collision(k2, fam03, 1 / 8, 0.0)


class TestReport:
    def test_ladder_report(self, fam03, hom03):
        rep = check_properties(fam03, hom03, [1 / 8, 1 / 16, 1 / 32])
        assert isinstance(rep, CutoffReport)
        assert rep.passed and not rep.failures
        assert rep.exponent_floor == pytest.approx(0.30)
        assert rep.theta_exponent >= rep.exponent_floor
        assert rep.theta_exponent == pytest.approx(LADDER_EXPONENT, abs=0.05)
        sups = [rep.sup_core[th] for th in sorted(rep.sup_core)]
        assert sups == sorted(sups)
        assert 0.0 < rep.c_psi < 20.0
        assert rep.c_global >= max(sups)

    def test_report_rejects_bad_kernel(self, fam03):
        class Overscaled:
            n, s, kappa = 1, 0.3, 2.0
            family = "homogeneous"

            def evaluate(self, t, x, v, w):
                h = np.abs(np.asarray(w) - np.asarray(v))
                return 1.2 * self.kappa * h ** (-1 - 2 * self.s)

        with pytest.raises(ValueError):
            check_properties(fam03, Overscaled(), [1 / 8, 1 / 16])

    def test_report_needs_a_ladder(self, fam03, hom03):
        with pytest.raises(ValueError):
            check_properties(fam03, hom03, [1 / 8])


class TestScalingThreshold:
    def test_frozen_thresholds(self, fam03):
        res = epsilon0(fam03, 1 / 8)
        np.testing.assert_allclose(res.epsilon0, EPS0_S03_T8, rtol=1e-3)
        res16 = epsilon0(fam03, 1 / 16)
        np.testing.assert_allclose(res16.epsilon0, EPS0_S03_T16, rtol=1e-3)
        fam045 = build_cutoff_family(0.45, 1)
        res45 = epsilon0(fam045, 1 / 8)
        np.testing.assert_allclose(res45.epsilon0, EPS0_S045_T8, rtol=1e-3)

    def test_threshold_is_sharp(self, fam03):
        res = epsilon0(fam03, 1 / 8)
        assert scaling_gap(fam03, 1 / 8, 0.5 * res.epsilon0) >= 0.0
        assert scaling_gap(fam03, 1 / 8, 1.05 * res.epsilon0) < 0.0
        assert res.worst_gap >= 0.0
        assert 0.0 < res.epsilon0 <= 0.5

    def test_interior_radius_binds(self, fam03):
        # the pure-power analysis at |v| = 1 alone would allow a much
        # larger ratio; the binding radius sits well inside the sample
        analytic = 1.0 / (8.0 + 2.0 ** (2.0 / 0.3))
        res = epsilon0(fam03, 1 / 8)
        assert res.epsilon0 < 0.2 * analytic

    def test_invalid_theta(self, fam03):
        with pytest.raises(ValueError):
            epsilon0(fam03, 1.0)


class TestLevels:
    def test_level_zero_is_reference(self, fam03):
        v = np.linspace(-5.0, 5.0, 101)
        np.testing.assert_allclose(level_cutoff(fam03, 0)(v), fam03.psi1(v), rtol=0, atol=0)

    def test_increments_halve(self, fam03):
        v = np.linspace(-5.0, 5.0, 101)
        for k in range(1, 8):
            step = level_cutoff(fam03, k)(v) - level_cutoff(fam03, k - 1)(v)
            np.testing.assert_allclose(step, 2.0 ** (-k - 1), rtol=1e-12)

    def test_deep_levels_approach_half(self, fam03):
        v = np.linspace(-5.0, 5.0, 101)
        gap = fam03.psi1(v) + 0.5 - level_cutoff(fam03, 25)(v)
        assert np.all(np.abs(gap - 2.0**-26) < 1e-15)

    def test_negative_level_rejected(self, fam03):
        with pytest.raises(ValueError):
            level_cutoff(fam03, -1)

    def test_indicator_bound(self, fam03):
        # wherever f exceeds level k, the excess over level k-1 is at
        # least the level gap, so 2^(k+1) (f - psi_{k-1})_+ >= 1 there
        rng = np.random.default_rng(7)
        v = np.linspace(-6.0, 6.0, 2001)
        base = fam03.psi1(v)
        for k in range(1, 7):
            f = base + 0.5 - 2.0 ** (-k - 1) + rng.uniform(-0.1, 0.1, v.size)
            above_k = (f - level_cutoff(fam03, k)(v) > 0).astype(float)
            excess = np.maximum(f - level_cutoff(fam03, k - 1)(v), 0.0)
            assert np.all(above_k <= 2.0 ** (k + 1) * excess + 1e-12)


class TestBluntWell:
    def test_values_and_support(self, fam03):
        v = np.linspace(-8.0, 8.0, 4001)
        F = fam03.F_profile(v)
        assert np.all(F[np.abs(v) <= 2.0] == -1.0)
        assert np.all(F[np.abs(v) >= 3.0] == 0.0)
        assert np.all(F >= -1.0) and np.all(F <= 0.0)
        radial = F[v >= 0]
        assert np.all(np.diff(radial) >= -1e-14)

    def test_ramp_is_twice_differentiable(self, fam03):
        h = 1e-4
        for x0 in (2.0, 3.0):
            left = (fam03.F_profile(x0 - h) - 2 * fam03.F_profile(x0 - h / 2) + fam03.F_profile(x0)) / (h / 2) ** 2
            right = (fam03.F_profile(x0) - 2 * fam03.F_profile(x0 + h / 2) + fam03.F_profile(x0 + h)) / (h / 2) ** 2
            assert abs(left - right) < 0.05

    def test_collision_sup_is_refinement_stable(self, fam03, hom03):
        sups = {}
        for nv in (256, 512):
            grid = make_grid(1, 2 * np.pi, 8.0, 4, nv, 0.0, 0.0, 1)
            F = fam03.F_profile(grid.v_coords)
            res = apply_L(hom03, grid, F)
            sups[nv] = float(np.max(np.abs(res.values)))
        np.testing.assert_allclose(sups[256], SUP_LF_S03_NV256, rtol=2e-2)
        assert 0.95 <= sups[512] / sups[256] <= 1.05
