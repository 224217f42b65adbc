import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from conftest import gaussian_bump, smooth_bump
from kfplab.fracops import apply_multiplier, lambda_pow
from kfplab.kernel import (
    ApplyLResult,
    Kernel,
    apply_L,
    bilinear_B,
    collision_generator,
    cross_term,
    spectral_constant,
    validate_bounds,
)
from kfplab.phase import gagliardo_seminorm, make_grid

# closed-form Fourier normalizations, cross-checked by an in-test quadrature
SPECTRAL_1_020 = 6.0239091859
SPECTRAL_1_030 = 4.3460048902
SPECTRAL_1_045 = 3.3072010833
SPECTRAL_2_030 = 9.99271610

# adaptive double integral of K f+ f- for the bump pair below (s=0.3, c=1)
CROSS_VALUE_S03 = 0.036843654204
# band-floor constant for the same pair at kappa = 1.5
CROSS_LOWER_S03 = 0.0074751616

# adaptive quadrature of the collision integral at v=0 for
# f(v) = v^2 smooth_bump(v; radius 3), truncated family, s=0.3, c=1
QUADRATIC_AT_ZERO = 1.2458700649


def windowed_wave(v, xi0, radius=3.0):
    u = np.clip(np.abs(v) / radius, 0.0, 1.0)
    win = np.where(u < 1.0, np.exp(1.0 - 1.0 / np.clip(1.0 - u**2, 1e-300, None)), 0.0)
    return np.cos(xi0 * v) * win


def padded_multiplier_reference(grid, f, s, c=1.0, pad=8):
    """Zero-extension spectral route: embed in a pad-times-wider box."""
    big = make_grid(grid.n, grid.x_period, pad * grid.v_halfwidth, 4, pad * grid.nv, 0.0, 0.0, 1)
    assert abs(big.dv - grid.dv) < 1e-14
    i0 = (big.nv - grid.nv) // 2
    if grid.n == 1:
        fp = np.zeros(big.nv)
        fp[i0 : i0 + grid.nv] = f
    else:
        fp = np.zeros(big.vshape)
        fp[i0 : i0 + grid.nv, i0 : i0 + grid.nv] = f
    out = -c * spectral_constant(grid.n, s) * apply_multiplier(lambda_pow(big, 2 * s), fp)
    if grid.n == 1:
        return out[i0 : i0 + grid.nv]
    return out[i0 : i0 + grid.nv, i0 : i0 + grid.nv]


def rel_l2(a, b):
    return float(np.sqrt(np.sum((a - b) ** 2) / np.sum(b**2)))


# -- construction and pointwise evaluation ------------------------------------


def test_kernel_validation():
    with pytest.raises(ValueError):
        Kernel(3, 0.3, 2.0)
    with pytest.raises(ValueError):
        Kernel(1, 0.0, 2.0)
    with pytest.raises(ValueError):
        Kernel(1, 1.0, 2.0)
    # order constraint 2s < n
    with pytest.raises(ValueError):
        Kernel(1, 0.6, 2.0)
    with pytest.raises(ValueError):
        Kernel(1, 0.3, 1.0)
    with pytest.raises(ValueError):
        Kernel(1, 0.3, 2.0, family="gaussian")
    with pytest.raises(ValueError):
        Kernel(1, 0.3, 2.0, c=2.5)
    with pytest.raises(ValueError):
        Kernel(1, 0.3, 2.0, c=0.4)
    # modulated narrows the admissible c range to kappa^{+-0.1}
    Kernel(1, 0.3, 2.0, family="modulated", c=1.05)
    with pytest.raises(ValueError):
        Kernel(1, 0.3, 2.0, family="modulated", c=1.3)
    with pytest.raises(ValueError):
        Kernel(1, 0.3, 2.0, family="modulated", mod_amplitude=-0.1)
    with pytest.raises(ValueError):
        Kernel(1, 0.3, 2.0, family="modulated", mod_frequency=0.0)
    # 2s < 2 never binds for n = 2
    Kernel(2, 0.8, 2.0)


def test_kernel_is_hashable_value_object():
    a = Kernel(1, 0.3, 2.0, family="truncated")
    b = Kernel(1, 0.3, 2.0, family="truncated")
    assert a == b and hash(a) == hash(b)


def test_evaluate_symmetries():
    rng = np.random.default_rng(7)
    for family in ("homogeneous", "truncated", "modulated"):
        k = Kernel(1, 0.3, 2.0, family=family, mod_amplitude=0.6)
        v = rng.uniform(-6, 6, 50)
        h = rng.uniform(0.05, 4.0, 50)
        k1 = k.evaluate(-1.0, 0.4, v, v + h)
        k2 = k.evaluate(-1.0, 0.4, v + h, v)
        k3 = k.evaluate(-1.0, 0.4, v, v - h)
        assert np.allclose(k1, k2, rtol=1e-12)
        assert np.allclose(k1, k3, rtol=1e-12)
        assert np.all(k1 > 0)


def test_evaluate_truncation_band():
    k = Kernel(1, 0.2, 1.5, family="truncated", c=1.1)
    assert k.evaluate(0.0, 0.0, 0.0, 5.999) > 0
    assert k.evaluate(0.0, 0.0, 0.0, 6.001) == 0.0
    # inside the band the kernel is exactly the scaled power law
    r = 2.37
    assert k.evaluate(0.0, 0.0, 1.0, 1.0 + r) == pytest.approx(1.1 * r ** (-1.4), rel=1e-13)


def test_evaluate_modulation_stays_in_clip_band():
    k = Kernel(1, 0.25, 2.0, family="modulated", mod_amplitude=5.0, mod_frequency=3.0)
    rng = np.random.default_rng(3)
    r = rng.uniform(0.1, 10.0, 200)
    m = k.modulation(-2.0, 1.0, r)
    assert np.all(m >= 2.0**-0.9 - 1e-12)
    assert np.all(m <= 2.0**0.9 + 1e-12)
    # large amplitude actually reaches the clip rails
    assert m.min() == pytest.approx(2.0**-0.9, rel=1e-9)
    assert m.max() == pytest.approx(2.0**0.9, rel=1e-9)


def test_evaluate_two_dimensional_points():
    k = Kernel(2, 0.3, 2.0)
    v = np.array([0.5, -0.25])
    w = np.array([1.5, 0.75])
    r = np.linalg.norm(w - v)
    assert k.evaluate(0.0, (0.0, 0.0), v, w) == pytest.approx(r ** (-2.6), rel=1e-13)


# -- spectral normalization ----------------------------------------------------


def test_spectral_constant_frozen_values():
    assert spectral_constant(1, 0.2) == pytest.approx(SPECTRAL_1_020, rel=1e-9)
    assert spectral_constant(1, 0.3) == pytest.approx(SPECTRAL_1_030, rel=1e-9)
    assert spectral_constant(1, 0.45) == pytest.approx(SPECTRAL_1_045, rel=1e-9)
    assert spectral_constant(2, 0.3) == pytest.approx(SPECTRAL_2_030, rel=1e-8)


def test_spectral_constant_matches_cosine_integral():
    # int over R of (1 - cos h) |h|^{-1-2s} dh, oscillatory tail replaced by
    # its mean; the neglected remainder is O(A^{-1-2s})
    s = 0.3
    A = 200.0
    val = 2.0 * quad(lambda h: (1 - np.cos(h)) * h ** (-1 - 2 * s), 0, A, limit=2000)[0]
    val += A ** (-2 * s) / s
    assert spectral_constant(1, s) == pytest.approx(val, rel=1e-3)

    with pytest.raises(ValueError):
        spectral_constant(1, 1.2)
    with pytest.raises(ValueError):
        spectral_constant(0, 0.3)


# -- bound certification --------------------------------------------------------


def test_validate_bounds_builtin_families_pass():
    for family in ("homogeneous", "truncated", "modulated"):
        k = Kernel(1, 0.3, 2.0, family=family, mod_amplitude=0.5)
        cert = validate_bounds(k, sample_count=2000, seed=1)
        assert cert.passed
        assert cert.samples_checked == 2000
        assert cert.band_ratio_min >= 1.0 / 2.0 - 1e-12
        assert cert.ratio_max <= 2.0 + 1e-12


def test_validate_bounds_rejects_small_samples():
    with pytest.raises(ValueError):
        validate_bounds(Kernel(1, 0.3, 2.0), sample_count=999)


class _OverScaledKernel:
    """Duck-typed kernel exceeding the upper power bound by 20 percent."""

    n, s, kappa = 1, 0.3, 2.0

    def evaluate(self, t, x, v, w):
        r = np.abs(np.asarray(w, dtype=float) - np.asarray(v, dtype=float))
        return 1.2 * self.kappa * r ** (-1.6)


class _BandGapKernel:
    """Duck-typed kernel that dies on 1 < r < 2, violating the band floor."""

    n, s, kappa = 1, 0.3, 2.0

    def evaluate(self, t, x, v, w):
        r = np.abs(np.asarray(w, dtype=float) - np.asarray(v, dtype=float))
        return np.where((r > 1.0) & (r < 2.0), 0.0, r ** (-1.6))


def test_validate_bounds_flags_violations():
    hot = validate_bounds(_OverScaledKernel(), sample_count=1000, seed=2)
    assert not hot.passed
    assert {v[0] for v in hot.violations} == {"upper-bound"}
    assert len(hot.violations) <= 20

    gap = validate_bounds(_BandGapKernel(), sample_count=1000, seed=2)
    assert not gap.passed
    assert "lower-bound" in {v[0] for v in gap.violations}


def test_validate_bounds_deterministic():
    a = validate_bounds(Kernel(1, 0.25, 1.8), sample_count=1500, seed=9)
    b = validate_bounds(Kernel(1, 0.25, 1.8), sample_count=1500, seed=9)
    assert a == b


# -- collision operator ----------------------------------------------------------


def test_apply_L_input_contracts(vgrid):
    k = Kernel(1, 0.3, 2.0)
    with pytest.raises(ValueError):
        apply_L(k, vgrid, np.zeros(5))
    # support reaching the boundary band is rejected outright
    with pytest.raises(ValueError):
        apply_L(k, vgrid, np.ones(vgrid.nv))
    with pytest.raises(ValueError):
        apply_L(k, vgrid, gaussian_bump(vgrid.v_coords, 6.5, 0.5))
    g2 = make_grid(2, 2 * np.pi, 8.0, 4, 32, 0.0, 0.0, 1)
    km = Kernel(2, 0.3, 2.0, family="modulated")
    with pytest.raises(NotImplementedError):
        apply_L(km, g2, np.zeros(g2.vshape))
    # dimension mismatch between kernel and grid
    with pytest.raises(ValueError):
        apply_L(Kernel(2, 0.3, 2.0), vgrid, np.zeros(vgrid.nv))


def test_apply_L_zero_slice(vgrid):
    res = apply_L(Kernel(1, 0.3, 2.0), vgrid, np.zeros(vgrid.nv))
    assert isinstance(res, ApplyLResult)
    assert np.all(res.values == 0.0)
    assert res.tail_error == 0.0


def test_apply_L_quadratic_window_oracle(vgrid):
    """Frozen adaptive-quadrature value of the collision integral at v = 0."""
    v = vgrid.v_coords
    f = v**2 * smooth_bump(v, 0.0, 3.0)
    i0 = vgrid.nv // 2
    assert v[i0] == 0.0
    for family in ("truncated", "homogeneous"):
        res = apply_L(Kernel(1, 0.3, 2.0, family=family), vgrid, f)
        assert res.values[i0] == pytest.approx(QUADRATIC_AT_ZERO, rel=1e-2)


def test_apply_L_spectral_agreement(vgrid):
    """Zero-extension operator vs the Fourier multiplier route, all s."""
    v = vgrid.v_coords
    for s in (0.2, 0.3, 0.45):
        k = Kernel(1, s, 2.0)
        worst = 0.0
        for xi0 in (np.pi / 2, np.pi, 1.5 * np.pi, 2 * np.pi, 2.5 * np.pi):
            f = windowed_wave(v, xi0)
            ref = padded_multiplier_reference(vgrid, f, s)
            worst = max(worst, rel_l2(apply_L(k, vgrid, f).values, ref))
        for sig in (0.3, 0.5, 0.8):
            f = gaussian_bump(v, 0.0, sig)
            ref = padded_multiplier_reference(vgrid, f, s)
            worst = max(worst, rel_l2(apply_L(k, vgrid, f).values, ref))
        assert worst < 0.02, f"s={s}: worst relative L2 error {worst:.4f}"


def test_apply_L_scales_linearly_in_c(vgrid):
    v = vgrid.v_coords
    f = smooth_bump(v, 0.5, 2.0)
    base = apply_L(Kernel(1, 0.3, 2.0, c=1.0), vgrid, f).values
    scaled = apply_L(Kernel(1, 0.3, 2.0, c=1.7), vgrid, f).values
    assert np.allclose(scaled, 1.7 * base, rtol=1e-12, atol=1e-13)


def test_apply_L_self_adjoint(vgrid):
    v = vgrid.v_coords
    f = smooth_bump(v, -1.2, 1.5)
    g = smooth_bump(v, 0.8, 2.0) * np.cos(2 * v)
    for family in ("homogeneous", "truncated"):
        k = Kernel(1, 0.35, 2.0, family=family)
        lhs = float(np.sum(g * apply_L(k, vgrid, f).values)) * vgrid.dv
        rhs = float(np.sum(f * apply_L(k, vgrid, g).values)) * vgrid.dv
        assert lhs == pytest.approx(rhs, rel=1e-8)


def test_apply_L_max_principle(vgrid):
    # at an interior nonnegative maximum every pair difference is <= 0 and
    # the complement term only subtracts, so L f must be nonpositive there
    v = vgrid.v_coords
    f = smooth_bump(v, 0.9, 2.2)
    imax = int(np.argmax(f))
    for family in ("homogeneous", "truncated"):
        for s in (0.2, 0.45):
            res = apply_L(Kernel(1, s, 2.0, family=family), vgrid, f)
            assert res.values[imax] <= 1e-9 * f[imax]


def test_apply_L_tail_error_reporting(vgrid):
    v = vgrid.v_coords
    f = smooth_bump(v, 0.0, 2.0)
    # truncated family: once the margin clears the band radius nothing is missed
    res_t = apply_L(Kernel(1, 0.3, 2.0, family="truncated"), vgrid, f)
    assert res_t.tail_error == 0.0
    # homogeneous: two-sided power tail beyond the support margin
    res_h = apply_L(Kernel(1, 0.3, 2.0), vgrid, f)
    margin = 6.0  # support radius 2 inside the half-width-8 box
    expected = 2.0 * 2.0 * f.max() * 2.0 * margin ** (-0.6) / 0.6
    assert res_h.tail_error == pytest.approx(expected, rel=0.05)
    # a tighter support leaves more margin, so the reported bound shrinks
    res_small = apply_L(Kernel(1, 0.3, 2.0), vgrid, smooth_bump(v, 0.0, 1.0))
    assert res_small.tail_error < res_h.tail_error
    # and the bound scales with the sup norm
    res_big = apply_L(Kernel(1, 0.3, 2.0), vgrid, 3.0 * f)
    assert res_big.tail_error == pytest.approx(3.0 * res_h.tail_error, rel=1e-12)


def test_apply_L_modulated_duality(vgrid):
    """Modulated family: operator and energy form stay exact duals."""
    v = vgrid.v_coords
    f = smooth_bump(v, -1.0, 1.5)
    g = smooth_bump(v, 0.5, 2.0) * np.sin(3 * v)
    k = Kernel(1, 0.3, 2.0, family="modulated", mod_amplitude=0.6, mod_frequency=2.0)
    lhs = float(np.sum(g * apply_L(k, vgrid, f, t=-1.0, x=0.7).values)) * vgrid.dv
    B = bilinear_B(k, vgrid, f, g, t=-1.0, x=0.7)
    assert lhs == pytest.approx(-B, rel=1e-11)
    # modulation actually changes the answer relative to homogeneous
    hom = float(np.sum(g * apply_L(Kernel(1, 0.3, 2.0), vgrid, f).values)) * vgrid.dv
    assert abs(lhs - hom) > 1e-3 * abs(hom)


# -- in-box generator -------------------------------------------------------------


def test_collision_generator_structure(vgrid):
    rng = np.random.default_rng(11)
    k = Kernel(1, 0.3, 2.0, family="truncated")
    gen = collision_generator(k, vgrid)
    # constants are annihilated exactly (zero row sums by construction)
    const = gen.apply(np.ones(vgrid.nv))
    assert np.abs(const).max() <= 1e-12
    # the cell sum (total mass) is conserved for arbitrary data
    f = rng.standard_normal(vgrid.nv)
    Mf = gen.apply(f)
    assert abs(np.sum(Mf)) <= 1e-11 * np.sum(np.abs(Mf))
    # symmetry of the pair form
    g = rng.standard_normal(vgrid.nv)
    assert float(f @ gen.apply(g)) == pytest.approx(float(g @ gen.apply(f)), rel=1e-11)
    # dissipativity and the spectral-radius bound
    assert float(f @ Mf) <= 1e-12 * float(f @ f)
    assert gen.gershgorin > 0
    assert np.linalg.norm(Mf) <= gen.gershgorin * np.linalg.norm(f) * (1 + 1e-12)


def test_collision_generator_matches_apply_L_on_interior(vgrid):
    # for compact slices the two operators differ exactly by f * complement,
    # which vanishes wherever f does and equals the complement drag elsewhere
    v = vgrid.v_coords
    f = smooth_bump(v, 0.0, 2.0)
    k = Kernel(1, 0.3, 2.0)
    box = collision_generator(k, vgrid).apply(f)
    full = apply_L(k, vgrid, f).values
    diff = box - full
    outside = np.abs(v) > 2.5
    assert np.abs(diff[outside]).max() <= 1e-13
    inside = np.abs(v) < 1.5
    assert np.all(diff[inside] > 0)


# -- quadratic forms ---------------------------------------------------------------


def test_bilinear_box_form_kills_constants(vgrid):
    g = gaussian_bump(vgrid.v_coords, 0.5, 1.0)
    val = bilinear_B(Kernel(1, 0.3, 2.0), vgrid, np.ones(vgrid.nv), g, boundary="box")
    assert abs(val) <= 1e-12
    # zero-extension form refuses slices touching the boundary band
    with pytest.raises(ValueError):
        bilinear_B(Kernel(1, 0.3, 2.0), vgrid, np.ones(vgrid.nv), g)
    with pytest.raises(ValueError):
        bilinear_B(Kernel(1, 0.3, 2.0), vgrid, g, g, boundary="corner")


def test_bilinear_duality_with_operator(vgrid):
    """<g, L f> = -B(f, g): independent summation paths must agree."""
    v = vgrid.v_coords
    f = smooth_bump(v, 1.2, 1.5)
    g = smooth_bump(v, -0.8, 2.0) * np.cos(2 * v)
    for family in ("homogeneous", "truncated"):
        k = Kernel(1, 0.3, 2.0, family=family)
        lhs = float(np.sum(g * apply_L(k, vgrid, f).values)) * vgrid.dv
        assert lhs == pytest.approx(-bilinear_B(k, vgrid, f, g), rel=1e-12)


def test_bilinear_symmetric_nonnegative(vgrid):
    v = vgrid.v_coords
    f = smooth_bump(v, -0.5, 1.8)
    g = smooth_bump(v, 1.0, 1.2) * np.sin(v)
    k = Kernel(1, 0.4, 1.5, c=0.9)
    assert bilinear_B(k, vgrid, f, g) == pytest.approx(bilinear_B(k, vgrid, g, f), rel=1e-12)
    for boundary in ("zero-extension", "box"):
        assert bilinear_B(k, vgrid, f, f, boundary=boundary) >= 0.0
    # zero-extension energy exceeds the box energy by the complement mass
    assert bilinear_B(k, vgrid, f, f) > bilinear_B(k, vgrid, f, f, boundary="box")


def test_bilinear_matches_gagliardo_route(vgrid):
    """B(f, f) against (c/2) x the independent double-sum seminorm."""
    v = vgrid.v_coords
    f = smooth_bump(v, 0.0, 2.5) * np.cos(1.7 * v)
    for s in (0.25, 0.45):
        k = Kernel(1, s, 2.0, c=1.3)
        B = bilinear_B(k, vgrid, f, f)
        gag = gagliardo_seminorm(vgrid, f, s)
        assert B == pytest.approx(0.5 * 1.3 * gag**2, rel=5e-2)


def test_coercivity_constant_stable_under_refinement():
    """min B(f,f)/|Lambda^s f|^2 over a test family, stable across nv."""
    mins = {}
    for nv in (256, 512):
        g = make_grid(1, 2 * np.pi, 8.0, 4, nv, 0.0, 0.0, 1)
        v = g.v_coords
        k = Kernel(1, 0.3, 2.0, family="truncated", c=0.8)
        ratios = []
        for ctr, wid, freq in ((0, 2.0, 1.0), (1.0, 1.5, 3.0), (-0.5, 2.5, 0.5), (0.3, 1.0, 5.0)):
            f = smooth_bump(v, ctr, wid) * np.cos(freq * v)
            lam = apply_multiplier(lambda_pow(g, 0.3), f)
            ratios.append(bilinear_B(k, g, f, f) / (float(np.sum(lam**2)) * g.dv))
        mins[nv] = min(ratios)
        assert mins[nv] > 0
    assert 0.5 <= mins[512] / mins[256] <= 2.0


# -- cross term --------------------------------------------------------------------


def test_cross_term_frozen_oracle(vgrid):
    v = vgrid.v_coords
    fp = smooth_bump(v, -1.5, 1.0)
    fm = smooth_bump(v, 1.5, 1.0)
    res = cross_term(Kernel(1, 0.3, 1.5), vgrid, fp, fm)
    assert res.value == pytest.approx(CROSS_VALUE_S03, rel=1e-3)
    assert res.bound_applicable
    assert res.lower_bound == pytest.approx(CROSS_LOWER_S03, rel=1e-3)
    assert res.value >= res.lower_bound


def test_cross_term_input_contracts(vgrid):
    v = vgrid.v_coords
    fp = smooth_bump(v, -1.0, 1.2)
    with pytest.raises(ValueError):
        cross_term(Kernel(1, 0.3, 2.0), vgrid, fp, smooth_bump(v, -0.5, 1.0))
    with pytest.raises(ValueError):
        cross_term(Kernel(1, 0.3, 2.0), vgrid, -fp, smooth_bump(v, 2.0, 0.5))


def test_cross_term_vanishing_part(vgrid):
    fp = smooth_bump(vgrid.v_coords, -1.0, 1.0)
    res = cross_term(Kernel(1, 0.3, 2.0), vgrid, fp, np.zeros(vgrid.nv))
    assert res.value == 0.0
    assert res.lower_bound == 0.0
    assert not res.bound_applicable


def test_cross_term_bound_needs_small_supports(vgrid):
    v = vgrid.v_coords
    res = cross_term(
        Kernel(1, 0.3, 2.0), vgrid, smooth_bump(v, -4.0, 1.0), smooth_bump(v, 4.0, 1.0)
    )
    assert not res.bound_applicable
    assert res.lower_bound == 0.0
    assert res.value > 0.0


@settings(max_examples=30, deadline=None)
@given(
    c1=st.floats(-2.4, -0.4),
    c2=st.floats(0.4, 2.4),
    r1=st.floats(0.15, 1.0),
    r2=st.floats(0.15, 1.0),
)
def test_cross_term_band_floor_property(c1, c2, r1, r2):
    """Any disjoint nonnegative pair inside the radius-3 ball clears the floor."""
    g = make_grid(1, 2 * np.pi, 8.0, 4, 256, 0.0, 0.0, 1)
    v = g.v_coords
    r1 = min(r1, 2.9 - abs(c1), abs(c1) - 0.05)
    r2 = min(r2, 2.9 - abs(c2), abs(c2) - 0.05)
    fp = smooth_bump(v, c1, r1)
    fm = smooth_bump(v, c2, r2)
    res = cross_term(Kernel(1, 0.3, 1.5), g, fp, fm)
    assert res.bound_applicable
    assert res.value >= 0.0
    assert res.value >= res.lower_bound - 1e-9


# -- two dimensions -----------------------------------------------------------------


@pytest.fixture(scope="module")
def vgrid2():
    return make_grid(2, 2 * np.pi, 8.0, 4, 128, 0.0, 0.0, 1)


def test_apply_L_two_dimensional(vgrid2):
    V1, V2 = np.meshgrid(vgrid2.v_coords, vgrid2.v_coords, indexing="ij")
    R = np.sqrt(V1**2 + V2**2)
    f = gaussian_bump(R, 0.0, 0.8)
    k = Kernel(2, 0.3, 2.0)
    res = apply_L(k, vgrid2, f)
    ref = padded_multiplier_reference(vgrid2, f, 0.3, pad=4)
    assert rel_l2(res.values, ref) < 0.01
    # maximum principle at the central peak
    imax = np.unravel_index(np.argmax(f), f.shape)
    assert res.values[imax] < 0
    assert res.tail_error > 0


def test_generator_and_forms_two_dimensional(vgrid2):
    rng = np.random.default_rng(5)
    k = Kernel(2, 0.6, 2.0, family="truncated")
    gen = collision_generator(k, vgrid2)
    assert np.abs(gen.apply(np.ones(vgrid2.vshape))).max() <= 1e-12
    f = rng.standard_normal(vgrid2.vshape)
    assert abs(np.sum(gen.apply(f))) <= 1e-10 * np.sum(np.abs(gen.apply(f)))
    # duality in two dimensions goes through the convolution identity
    V1, V2 = np.meshgrid(vgrid2.v_coords, vgrid2.v_coords, indexing="ij")
    R = np.sqrt(V1**2 + V2**2)
    fb = gaussian_bump(R, 0.0, 0.8)
    gb = gaussian_bump(np.sqrt((V1 - 0.8) ** 2 + V2**2), 0.0, 0.75)
    k2 = Kernel(2, 0.3, 2.0)
    lhs = float(np.sum(gb * apply_L(k2, vgrid2, fb).values)) * vgrid2.cell_v
    assert lhs == pytest.approx(-bilinear_B(k2, vgrid2, fb, gb), rel=1e-10)
