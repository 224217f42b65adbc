"""Inequality diagnostics evaluated along recorded trajectories.

Five instruments, all pure functions of immutable field data:

* an exponent calculator tying the interpolation, averaging, and recursion
  exponents to the inputs (n, s, r);
* a localized energy-balance report comparing the dissipation quadratic
  form of the positive part against its volume, operator, and source terms;
* a level-set energy ladder with a geometric fit of the nonlinear recursion;
* level-set measures over staggered space-time cylinders with a
  pass/fail/vacuous verdict for the intermediate-measure implication;
* a velocity-averaging gain check comparing fractional space-time
  regularity of weighted v-averages against transport data.

Every report embeds the config hash of the trajectory it judged (or a
content digest when judging a bare field) and serializes to JSON; tabular
reports also write CSV.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field as _field
from pathlib import Path
from typing import Callable

import numpy as np

from kfplab.cutoffs import CutoffFamily, build_cutoff_family, level_cutoff
from kfplab.fracops import bessel_pow
from kfplab.kernel import Kernel, collision_generator
from kfplab.phase import (
    Field,
    PhaseGrid,
    Region,
    level_set_measure,
    lp_norm,
    velocity_average,
)
from kfplab.solver import Trajectory


# ---------------------------------------------------------------------------
# exponent calculus


@dataclass(frozen=True)
class ExponentTable:
    """Derived exponents for dimension n, order s, source exponent r."""

    n: int
    s: float
    r: float
    r0: float
    p1: float
    p2: float
    theta_star: float
    q: float
    beta: float
    alpha_dg2: float
    recursion_gamma: float

    def as_dict(self) -> dict:
        return asdict(self)


def exponents(n: int, s: float, r: float) -> ExponentTable:
    """Exponent table from the three inputs; every entry is closed-form.

    theta_star balances the mixed-norm interpolation
    theta/2 + (1-theta)/p1 = theta/p2 + (1-theta), which is linear in
    theta; q is the common value of either side inverted.
    """
    if not 0 < s < 1:
        raise ValueError("need 0 < s < 1")
    if not 2 * s < n:
        raise ValueError("need 2s < n")
    if not r > 2:
        raise ValueError("need r > 2")
    inv_p1 = 0.5 - 1.0 / (2.0 * (1.0 + s) * (n + 1))
    inv_p2 = 0.5 - s / n
    theta = (1.0 - inv_p1) / (1.5 - inv_p1 - inv_p2)
    inv_q = 0.5 * theta + (1.0 - theta) * inv_p1
    r0 = (n * (1.0 + s) * (n + 1) / s) * (2.0 * s / n + 0.5 + n / (2.0 * s))
    return ExponentTable(
        n=n,
        s=float(s),
        r=float(r),
        r0=r0,
        p1=1.0 / inv_p1,
        p2=1.0 / inv_p2,
        theta_star=theta,
        q=1.0 / inv_q,
        beta=1.0 / (2.0 * (1.0 + s)),
        alpha_dg2=1.0 / (2.0 * (s + 0.5 * n)),
        recursion_gamma=(0.5 / inv_q) * (1.0 - 2.0 / r + theta / r),
    )


def gamma_crossing(n: int, s: float, lo: float = 2.0 + 1e-9, hi: float = 1e9) -> float:
    """The source exponent where recursion_gamma crosses 1, by bisection.

    recursion_gamma is strictly increasing in r (the 1/r coefficient is
    theta_star - 2 < 0), so the crossing is unique when it exists.
    """
    if exponents(n, s, lo).recursion_gamma >= 1.0:
        return lo
    if exponents(n, s, hi).recursion_gamma <= 1.0:
        raise ValueError("recursion exponent never exceeds 1 on the bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if exponents(n, s, mid).recursion_gamma < 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class UniversalConstants:
    """Calibration parameters for the measure-theoretic verdicts.

    The defaults come from ensemble calibration; all verdicts are relative
    to the calibration they were computed with.
    """

    delta0: float = 1e-3
    gamma0: float = 0.01
    theta0: float = 0.2
    lam: float = 0.75

    def __post_init__(self):
        for name in ("delta0", "gamma0", "theta0", "lam"):
            val = getattr(self, name)
            if not 0.0 < val < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {val}")
        if not self.theta0 < 1.0 / 3.0:
            raise ValueError("theta0 must be below 1/3")

    def as_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# shared plumbing


def _as_field(trajectory) -> Field:
    return trajectory.fields if isinstance(trajectory, Trajectory) else trajectory


def _judged_hash(trajectory) -> str:
    """Config hash for solver output, content digest for bare fields."""
    if isinstance(trajectory, Trajectory):
        h = trajectory.meta.get("config_hash")
        if h:
            return h
    f = _as_field(trajectory)
    return hashlib.sha256(np.ascontiguousarray(f.data).tobytes()).hexdigest()


def save_json(report, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report.as_dict(), indent=2, sort_keys=True, default=str))
    return path


def reports_csv(reports, path) -> Path:
    """One CSV row per report, scalar fields only, columns sorted by name."""
    path = Path(path)
    rows = [r.as_dict() for r in reports]
    keys = sorted(
        k for k, v in rows[0].items() if np.isscalar(v) or isinstance(v, (bool, str))
    )
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for row in rows:
            w.writerow([row[k] for k in keys])
    return path


def _torus_center_distance(a, b, period: float) -> float:
    d2 = 0.0
    for ca, cb in zip(a, b):
        d = abs(ca - cb) % period
        d2 += min(d, period - d) ** 2
    return float(np.sqrt(d2))


# ---------------------------------------------------------------------------
# localized energy balance


@dataclass(frozen=True)
class EnergyReport:
    """Dissipation of the positive part vs its bulk, operator, source terms.

    ``rhs_terms`` are the three right-hand contributions (radius * L2 mass,
    barrier-curvature sup * L1 mass, source pairing), each already divided
    by the separation delta; ``fitted_C`` is the constant that makes the
    inequality lhs <= C * sum(rhs) an equality.
    """

    lhs_B: float
    lhs_cross: float
    rhs_terms: tuple[float, float, float]
    delta: float
    fitted_C: float
    config_hash: str

    def as_dict(self) -> dict:
        d = asdict(self)
        d["rhs_terms"] = list(self.rhs_terms)
        return d


def energy_report(
    trajectory,
    kernel: Kernel,
    psi: Callable,
    Q: Region,
    Qbar: Region,
    source=None,
    source_r: float = 2.0,
) -> EnergyReport:
    """Evaluate the localized energy balance of (f - psi)_+ on Qbar vs Q.

    ``psi`` is a radial velocity barrier evaluated on |v|; ``Q`` must carry
    a v_radius R, and f <= psi is required at every grid point of Q with
    |v| >= R (checked, with a witness on failure).  ``Qbar`` must be
    compactly inside Q in time-past and in space; delta is the smaller of
    the two separations.  The quadratic forms use the in-box pair operator
    through generator duality, consistent with the dynamics that produced
    the trajectory.
    """
    f = _as_field(trajectory)
    g = f.grid
    if kernel.n != g.n:
        raise ValueError("kernel and grid dimensions differ")
    if Q.v_radius is None:
        raise ValueError("Q must carry the velocity radius R as v_radius")
    Q.validate(g)
    Qbar.validate(g)
    R = float(Q.v_radius)

    t_lo_q, t_hi_q = Q.t_interval
    t_lo_b, t_hi_b = Qbar.t_interval
    delta_t = t_lo_b - t_lo_q
    gap_x = Q.x_radius - Qbar.x_radius - _torus_center_distance(
        Q.x_center, Qbar.x_center, g.x_period
    )
    if delta_t <= 0 or gap_x <= 0 or t_hi_b > t_hi_q + 1e-12:
        raise ValueError("Qbar must sit compactly inside Q (later start, smaller ball)")
    delta = float(min(delta_t, gap_x))

    psi_vals = np.broadcast_to(np.asarray(psi(g.v_abs), dtype=np.float64), g.vshape)
    tm_q, xm_q = Q.t_mask(g), Q.x_mask(g)
    tm_b, xm_b = Qbar.t_mask(g), Qbar.x_mask(g)
    if not (tm_q.any() and xm_q.any()):
        raise ValueError("Q contains no grid cells")

    outside = g.v_abs >= R
    times = g.times
    t_idx_q = np.flatnonzero(tm_q)
    x_idx_q = np.flatnonzero(xm_q.reshape(-1))
    data_q = f.data[tm_q][:, xm_q]  # (T, X) + vshape
    over = data_q[..., outside] > psi_vals[outside]
    if over.any():
        it, ix, iv = np.unravel_index(np.argmax(over), over.shape)
        vpt = g.v_abs[outside].reshape(-1)[iv]
        raise ValueError(
            "barrier precondition fails: f > psi at "
            f"t={times[t_idx_q[it]]:.6g}, x-cell {x_idx_q[ix]}, |v|={vpt:.6g} "
            f"(f={data_q[..., outside][it, ix, iv]:.6g}, "
            f"psi={psi_vals[outside].reshape(-1)[iv]:.6g})"
        )

    fplus = np.maximum(data_q - psi_vals, 0.0)
    fminus = np.maximum(psi_vals - data_q, 0.0)
    cell = g.t_slab * g.cell_x

    # quadratic forms on the Qbar sub-block, via <g, M f> = -B(f, g)
    gen = collision_generator(kernel, g)
    in_bar = np.ix_(tm_b[tm_q], xm_b.reshape(-1)[xm_q.reshape(-1)])
    lhs_B = 0.0
    lhs_cross = 0.0
    for fp, fm in zip(fplus[in_bar].reshape((-1,) + g.vshape),
                      fminus[in_bar].reshape((-1,) + g.vshape)):
        Mfp = gen.apply(fp)
        lhs_B += -float((fp * Mfp).sum()) * g.cell_v * cell
        lhs_cross += float((fm * Mfp).sum()) * g.cell_v * cell

    int_sq = float((fplus**2).sum()) * g.cell_v * cell
    int_abs = float(fplus.sum()) * g.cell_v * cell
    rstar = source_r / (source_r - 1.0)
    norm_fplus = (float((fplus**rstar).sum()) * g.cell_v * cell) ** (1.0 / rstar)
    if source is None:
        norm_a = 0.0
    else:
        acc = 0.0
        for it in t_idx_q:
            a = np.asarray(source(times[it]), dtype=np.float64)
            acc += float((np.abs(a[xm_q]) ** source_r).sum())
        norm_a = (acc * g.cell_v * cell) ** (1.0 / source_r)

    inside = g.v_abs < R
    if not inside.any():
        raise ValueError("no velocity grid points inside |v| < R")
    sup_L_psi = float(np.abs(gen.apply(np.ascontiguousarray(psi_vals)))[inside].max())

    rhs = (
        R * int_sq / delta,
        sup_L_psi * int_abs / delta,
        norm_a * norm_fplus / delta,
    )
    total = sum(rhs)
    lhs = lhs_B + lhs_cross
    fitted = lhs / total if total > 0 else 0.0
    return EnergyReport(
        lhs_B=lhs_B,
        lhs_cross=lhs_cross,
        rhs_terms=rhs,
        delta=delta,
        fitted_C=fitted,
        config_hash=_judged_hash(trajectory),
    )


# ---------------------------------------------------------------------------
# level-set energy ladder


@dataclass(frozen=True)
class LevelReport:
    """Ladder energies E_k with the geometric-recursion fit.

    ``indicator_margin`` is the smallest value of 2^(k+1) * (f - psi_{k-1})_+
    over all points where f exceeds psi_k; the pointwise indicator bound
    holds exactly when it is >= 1.
    """

    energies: tuple[float, ...]
    indicator_ok: bool
    indicator_margin: float
    fitted_C: float
    fitted_gamma: float
    usable_fit_points: int
    config_hash: str

    def as_dict(self) -> dict:
        d = asdict(self)
        d["energies"] = list(self.energies)
        return d

    def save_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("k", "t_start", "x_radius", "energy"))
            for k, e in enumerate(self.energies):
                w.writerow((k, -1.0 - 2.0**-k, 1.0 + 2.0**-k, e))
        return path


def degiorgi_levels(trajectory, family: CutoffFamily, k_max: int, x_center=None) -> LevelReport:
    """Ladder energies over shrinking cylinders against rising barriers.

    Level k uses the time window [-1 - 2^-k, 0], the x-ball of radius
    1 + 2^-k, and the barrier psi_k = psi_1 + 1/2 - 2^-(k+1); energies are
    cell sums of (f - psi_k)_+^2, so they are non-increasing in k by
    construction.  The fit solves log E_k = k log C + gamma log E_{k-3}
    by least squares over the strictly positive entries.
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    f = _as_field(trajectory)
    g = f.grid
    eps = 1e-9
    if g.t0 > -2.0 + eps or g.t1 < -eps:
        raise ValueError("trajectory must cover the time window [-2, 0]")
    if g.x_period < 4.0:
        raise ValueError("spatial period too small for the radius-2 ball")
    if x_center is None:
        x_center = (0.5 * g.x_period,) * g.n

    psi_ladder = [
        np.broadcast_to(
            np.asarray(level_cutoff(family, k)(g.v_abs), dtype=np.float64), g.vshape
        )
        for k in range(k_max + 1)
    ]
    cell = g.t_slab * g.cell_x * g.cell_v

    energies = []
    margin = np.inf
    for k in range(k_max + 1):
        region = Region(
            t_interval=(-1.0 - 2.0**-k, 0.0), x_center=x_center, x_radius=1.0 + 2.0**-k
        )
        tm, xm = region.t_mask(g), region.x_mask(g)
        block = f.data[tm][:, xm]
        excess = np.maximum(block - psi_ladder[k], 0.0)
        energies.append(float((excess**2).sum()) * cell)
        if k >= 1:
            above = block > psi_ladder[k]
            if above.any():
                prev = np.broadcast_to(psi_ladder[k - 1], block.shape)
                m = 2.0 ** (k + 1) * (block[above] - prev[above])
                margin = min(margin, float(m.min()))

    ks, logs_e, logs_prev = [], [], []
    for k in range(3, k_max + 1):
        if energies[k] > 0.0 and energies[k - 3] > 0.0:
            ks.append(k)
            logs_e.append(np.log(energies[k]))
            logs_prev.append(np.log(energies[k - 3]))
    if len(ks) >= 2:
        A = np.column_stack([ks, logs_prev])
        coef, *_ = np.linalg.lstsq(A, np.asarray(logs_e), rcond=None)
        fitted_C, fitted_gamma = float(np.exp(coef[0])), float(coef[1])
    else:
        fitted_C, fitted_gamma = float("nan"), float("nan")

    return LevelReport(
        energies=tuple(energies),
        indicator_ok=bool(margin >= 1.0 or np.isinf(margin)),
        indicator_margin=float(margin),
        fitted_C=fitted_C,
        fitted_gamma=fitted_gamma,
        usable_fit_points=len(ks),
        config_hash=_judged_hash(trajectory),
    )


# ---------------------------------------------------------------------------
# staggered-cylinder measures


def _ball_volume(n: int, radius: float) -> float:
    if n == 1:
        return 2.0 * radius
    if n == 2:
        return float(np.pi) * radius**2
    raise NotImplementedError("ball volume implemented for n in {1, 2}")


@dataclass(frozen=True)
class DG2Report:
    """Level-set masses over early/late/intermediate cylinders.

    The verdict evaluates the implication "enough early mass below 0 and
    enough late mass above 1 - theta0 force intermediate mass >= gamma0":
    pass/fail when the hypotheses hold, vacuous otherwise.
    """

    measure_early: float
    measure_late: float
    measure_intermediate: float
    early_threshold: float
    late_threshold: float
    intermediate_threshold: float
    source_norm: float
    hypotheses_hold: bool
    verdict: str
    constants: UniversalConstants
    config_hash: str

    def as_dict(self) -> dict:
        d = asdict(self)
        d["constants"] = self.constants.as_dict()
        return d


def dg2_measures(trajectory, constants: UniversalConstants, x_center=None) -> DG2Report:
    """Measure the three staggered level sets and judge the implication.

    Needs the trajectory to cover times [-6, 0], an x-ball of radius 3,
    and the bound |f| <= 1 + psi_theta0 everywhere on that cylinder
    (checked; violation reported with a witness).  The barrier order s is
    read from the field metadata.
    """
    f = _as_field(trajectory)
    g = f.grid
    eps = 1e-9
    if g.t0 > -6.0 + eps or g.t1 < -eps:
        raise ValueError("trajectory must cover the time window [-6, 0]")
    if g.x_period < 6.0:
        raise ValueError("spatial period too small for the radius-3 ball")
    if g.v_halfwidth < 3.0:
        raise ValueError("velocity box too small for the radius-3 ball")
    s = f.meta.get("s")
    if s is None:
        raise ValueError("field metadata lacks the kernel order 's'")
    if x_center is None:
        x_center = (0.5 * g.x_period,) * g.n
    th0 = constants.theta0

    family = build_cutoff_family(float(s), g.n)
    bound = 1.0 + np.broadcast_to(
        np.asarray(family.psi_theta(g.v_abs, th0), dtype=np.float64), g.vshape
    )
    ext = Region(t_interval=(-6.0, 0.0), x_center=x_center, x_radius=3.0)
    tm, xm = ext.t_mask(g), ext.x_mask(g)
    block = f.data[tm][:, xm]
    flat = np.abs(block.reshape(block.shape[:2] + (-1,)))
    over = flat > bound.reshape(-1)
    if over.any():
        it, ix, iv = np.unravel_index(np.argmax(over), over.shape)
        raise ValueError(
            "a-priori bound fails: |f| > 1 + psi_theta0 at "
            f"t={g.times[np.flatnonzero(tm)[it]]:.6g}, "
            f"x-cell {np.flatnonzero(xm.reshape(-1))[ix]:d}, "
            f"|v|={np.broadcast_to(g.v_abs, g.vshape).reshape(-1)[iv]:.6g} "
            f"(|f|={flat[it, ix, iv]:.6g})"
        )

    vc = (0.0,) * g.n
    early = Region((-5.0, -4.0), x_center, 2.0, vc, 2.0)
    late = Region((-2.0, 0.0), x_center, 2.0, vc, 2.0)
    inter = Region((-5.0, 0.0), x_center, 2.0, vc, 3.0)
    m_early = level_set_measure(f, "le", 0.0, early)
    m_late = level_set_measure(f, "ge", 1.0 - th0, late)
    m_inter = level_set_measure(f, "between", (0.0, 1.0 - th0), inter)

    early_threshold = 0.5 * 1.0 * _ball_volume(g.n, 2.0) * _ball_volume(g.n, 2.0)
    source_norm = 0.0
    if isinstance(trajectory, Trajectory):
        source_norm = float(trajectory.meta.get("source_lr_norm", 0.0))
    hyps = (
        m_early >= early_threshold
        and m_late >= constants.delta0
        and source_norm <= th0
    )
    if not hyps:
        verdict = "vacuous"
    else:
        verdict = "pass" if m_inter >= constants.gamma0 else "fail"
    return DG2Report(
        measure_early=m_early,
        measure_late=m_late,
        measure_intermediate=m_inter,
        early_threshold=early_threshold,
        late_threshold=constants.delta0,
        intermediate_threshold=constants.gamma0,
        source_norm=source_norm,
        hypotheses_hold=hyps,
        verdict=verdict,
        constants=constants,
        config_hash=_judged_hash(trajectory),
    )


# ---------------------------------------------------------------------------
# velocity-averaging gain


def transport_apply(f: Field) -> Field:
    """(d_t + v . grad_x) f with centered time differences and spectral x."""
    g = f.grid
    if g.nt < 3:
        raise ValueError("need at least three time slices for the time derivative")
    out = np.gradient(f.data, g.times, axis=0, edge_order=2)
    for i in range(g.n):
        axis = 1 + i
        kshape = [1] * (1 + 2 * g.n)
        kshape[axis] = g.nx
        vshape = [1] * (1 + 2 * g.n)
        vshape[1 + g.n + i] = g.nv
        khat = np.fft.fft(f.data, axis=axis)
        khat *= 1j * g.x_freqs.reshape(kshape)
        out = out + np.fft.ifft(khat, axis=axis).real * g.v_coords.reshape(vshape)
    return Field(g, out, dict(f.meta))


def _smooth_step(y: np.ndarray) -> np.ndarray:
    """1 for y <= 0, 0 for y >= 1, C-infinity monotone join between."""
    y = np.clip(y, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(y < 1.0, np.exp(-1.0 / np.maximum(1.0 - y, 1e-300)), 0.0)
        b = np.where(y > 0.0, np.exp(-1.0 / np.maximum(y, 1e-300)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class AveragingReport:
    """Fractional space-time regularity of a v-average vs transport data.

    ``lhs`` is an upper-bound surrogate for the localized fractional norm:
    the average is multiplied by a smooth plateau window (1 on the inner
    region, 0 outside the outer one) before the Fourier weight, which
    dominates the extension infimum.
    """

    lhs: float
    rhs_f: float
    rhs_g: float
    ratio: float
    alpha: float
    m: float
    transport_residual: float
    vacuous: bool
    config_hash: str

    def as_dict(self) -> dict:
        return asdict(self)


def averaging_check(
    f: Field,
    g: Field,
    eta,
    m: float,
    inner_region: Region,
    outer_region: Region,
    tol: float = 1e-6,
) -> AveragingReport:
    """Compare ||window * avg_eta(f)||_{H^alpha(t,x)} to ||f|| + ||lift g||.

    Requires (d_t + v.grad_x) f = g on the grid to relative tolerance
    ``tol`` (g may have been produced by :func:`transport_apply`), and the
    inner region strictly inside the outer one, itself strictly inside the
    time span.  alpha = 1/(2(1+m)); the g-term is damped by the velocity
    multiplier (1 + |xi|^2)^(-m/2) before its L2 norm.
    """
    if m <= 0:
        raise ValueError("m must be positive")
    grid = f.grid
    if g.grid is not grid and g.grid != grid:
        raise ValueError("f and g live on different grids")
    inner_region.validate(grid)
    outer_region.validate(grid)
    t_in, t_out = inner_region.t_interval, outer_region.t_interval
    gap_t = min(t_in[0] - t_out[0], t_out[1] - t_in[1])
    gap_x = (
        outer_region.x_radius
        - inner_region.x_radius
        - _torus_center_distance(
            inner_region.x_center, outer_region.x_center, grid.x_period
        )
    )
    if gap_t <= 0 or gap_x <= 0:
        raise ValueError("inner region must sit strictly inside the outer one")
    if t_out[0] <= grid.t0 + 1e-12 or t_out[1] >= grid.t1 - 1e-12:
        raise ValueError("outer region must sit strictly inside the time span")

    resid = transport_apply(f).data - g.data
    scale = lp_norm(f, 2, outer_region) + lp_norm(g, 2, outer_region)
    rnorm = lp_norm(Field(grid, np.ascontiguousarray(resid)), 2, outer_region)
    if rnorm > tol * max(scale, 1e-300):
        raise ValueError(
            f"transport identity fails: residual {rnorm:.3e} vs scale {scale:.3e}"
        )

    rho = velocity_average(f, eta)  # (nt,) + xshape

    # plateau window, 1 on inner, 0 outside outer
    wt = np.ones(grid.nt)
    below = grid.times < t_in[0]
    wt[below] = _smooth_step(
        (t_in[0] - grid.times[below]) / max(t_in[0] - t_out[0], 1e-300)
    )
    above = grid.times > t_in[1]
    wt[above] = _smooth_step(
        (grid.times[above] - t_in[1]) / max(t_out[1] - t_in[1], 1e-300)
    )
    wt[(grid.times < t_out[0]) | (grid.times > t_out[1])] = 0.0
    d2 = np.zeros(grid.xshape)
    for i, c in enumerate(grid.x_broadcast()):
        dd = np.abs(np.mod(c - inner_region.x_center[i] + 0.5 * grid.x_period,
                           grid.x_period) - 0.5 * grid.x_period)
        d2 = d2 + dd**2
    dist = np.sqrt(d2)
    r_out_eff = outer_region.x_radius - _torus_center_distance(
        inner_region.x_center, outer_region.x_center, grid.x_period
    )
    wx = _smooth_step((dist - inner_region.x_radius) / (r_out_eff - inner_region.x_radius))
    windowed = rho * wt.reshape((-1,) + (1,) * grid.n) * wx[None]

    alpha = 1.0 / (2.0 * (1.0 + m))
    what = np.fft.fftn(windowed)
    omega = 2.0 * np.pi * np.fft.fftfreq(grid.nt, d=grid.t_slab)
    zeta2 = omega.reshape((-1,) + (1,) * grid.n) ** 2
    for i in range(grid.n):
        kshape = [1] * (1 + grid.n)
        kshape[1 + i] = grid.nx
        zeta2 = zeta2 + grid.x_freqs.reshape(kshape) ** 2
    weight = grid.t_slab * grid.cell_x / windowed.size
    lhs = float(np.sqrt(((1.0 + zeta2) ** alpha * np.abs(what) ** 2).sum() * weight))

    rhs_f = lp_norm(f, 2, outer_region)
    sym = bessel_pow(grid, -m).symbol
    vaxes = tuple(range(1 + grid.n, 1 + 2 * grid.n))
    lifted = np.fft.ifftn(sym * np.fft.fftn(g.data, axes=vaxes), axes=vaxes).real
    rhs_g = lp_norm(Field(grid, np.ascontiguousarray(lifted)), 2, outer_region)
    rhs = rhs_f + rhs_g

    vacuous = rhs == 0.0
    ratio = 0.0 if vacuous else lhs / rhs
    return AveragingReport(
        lhs=lhs,
        rhs_f=rhs_f,
        rhs_g=rhs_g,
        ratio=ratio,
        alpha=alpha,
        m=float(m),
        transport_residual=rnorm,
        vacuous=vacuous,
        config_hash=_judged_hash(f),
    )
