"""Symmetry transforms of the kinetic equation and a local regularity probe.

The equation is invariant under the anisotropic dilation

    (t, x, v)  ->  (eps^(2s) t, eps^(1+2s) x, eps v)

with the kernel renormalized by eps^(n+2s) and the source by eps^(2s),
and under Galilean translation (t, x, v) -> (t0 + t, x0 + x + v0 t,
v0 + v).  This module implements both transforms by cubic resampling
(periodic in x, zero beyond the velocity box), the matching kernel and
source rules, the slanted cylinders those symmetries carve out, and an
oscillation-decay estimator that fits a Hölder exponent from the sup-inf
profile of a field over a geometric ladder of shrinking cylinders.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import map_coordinates

from kfplab.kernel import Kernel
from kfplab.phase import Field, PhaseGrid, _support_margin, make_grid
from kfplab.solver import Trajectory

_EPS = 1e-9


@dataclass(frozen=True)
class ScalingParams:
    """Dilation scale, kernel order, and source integrability exponent."""

    epsilon: float
    s: float
    r: float

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        if not self.r >= 1.0:
            raise ValueError(f"r must be >= 1, got {self.r}")

    def source_norm_factor(self, n: int) -> float:
        """Exact L^r-norm ratio of the rescaled source in dimension n."""
        expo = 2.0 * self.s * (1.0 - (n + 1.0 + n / self.s) / self.r)
        return self.epsilon**expo

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class KineticCylinder:
    """Slanted space-time cylinder respecting the kinetic scaling.

    Extent around the center (t0, x0, v0):

        |t - t0| <= rho^(2s),
        |x - x0 - (t - t0) v0| <= rho^(1+2s),
        |v - v0| <= rho.

    Nesting in rho is automatic since every extent is increasing in rho.
    """

    t0: float
    x0: tuple[float, ...]
    v0: tuple[float, ...]
    rho: float
    s: float

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        if len(self.x0) != len(self.v0):
            raise ValueError("x0 and v0 must have the same dimension")

    @property
    def t_extent(self) -> float:
        return self.rho ** (2.0 * self.s)

    @property
    def x_extent(self) -> float:
        return self.rho ** (1.0 + 2.0 * self.s)

    def with_radius(self, rho: float) -> "KineticCylinder":
        return KineticCylinder(self.t0, self.x0, self.v0, rho, self.s)

    def contains(self, t, x, v, x_period: float | None = None):
        """Pointwise membership; x is a (..., n) stack (or plain when n=1).

        ``x_period`` switches the spatial distance to the torus metric.
        """
        t = np.asarray(t, dtype=np.float64)
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        v = np.atleast_1d(np.asarray(v, dtype=np.float64))
        n = len(self.x0)
        if n == 1 and x.shape[-1:] != (1,):
            x = x[..., None]
            v = v[..., None]
        shift = x - np.asarray(self.x0) - (t[..., None] - self.t0) * np.asarray(self.v0)
        if x_period is not None:
            shift = np.mod(shift + 0.5 * x_period, x_period) - 0.5 * x_period
        ok_t = np.abs(t - self.t0) <= self.t_extent + _EPS
        ok_x = np.sqrt((shift**2).sum(axis=-1)) <= self.x_extent + _EPS
        dv = v - np.asarray(self.v0)
        ok_v = np.sqrt((dv**2).sum(axis=-1)) <= self.rho + _EPS
        return ok_t & ok_x & ok_v

    def mask(self, grid: PhaseGrid) -> np.ndarray:
        """Boolean membership of every grid cell, torus metric in x."""
        n = grid.n
        if len(self.x0) != n:
            raise ValueError("cylinder dimension does not match the grid")
        tm = np.abs(grid.times - self.t0) <= self.t_extent + _EPS
        d2x = np.zeros((grid.nt,) + grid.xshape)
        for i, c in enumerate(grid.x_broadcast()):
            centers = self.x0[i] + (grid.times - self.t0) * self.v0[i]
            d = c[None] - centers.reshape((-1,) + (1,) * n)
            d = np.mod(d + 0.5 * grid.x_period, grid.x_period) - 0.5 * grid.x_period
            d2x = d2x + d**2
        xm = d2x <= (self.x_extent + _EPS) ** 2
        d2v = np.zeros(grid.vshape)
        for i, c in enumerate(grid.v_broadcast()):
            d2v = d2v + (c - self.v0[i]) ** 2
        vm = d2v <= (self.rho + _EPS) ** 2
        out = tm.reshape((-1,) + (1,) * (2 * n))
        out = out & xm.reshape(xm.shape + (1,) * n)
        return out & vm.reshape((1,) * (1 + n) + grid.vshape)


# ---------------------------------------------------------------------------
# resampling core


def _cubic_sample(field: Field, t_pts, x_pts: list, v_pts: list) -> np.ndarray:
    """Cubic spline samples of the field at broadcastable coordinate arrays.

    x is periodic; t must stay inside the recorded span; velocity samples
    beyond the box continue the (near-zero) edge data, so callers must keep
    supports clear of the box edge for the zero-extension convention to hold.
    """
    g = field.grid
    arrs = [np.asarray(t_pts, dtype=np.float64)]
    pad_t = 0 if g.nt == 1 else min(4, g.nt - 1)
    if g.nt == 1:
        if np.any(np.abs(arrs[0] - g.t0) > _EPS * max(1.0, abs(g.t0))):
            raise ValueError("out-of-range sampling in t: single recorded slice")
        arrs[0] = np.zeros_like(arrs[0])
    else:
        t_step = (g.t1 - g.t0) / (g.nt - 1)
        idx = (arrs[0] - g.t0) / t_step
        span_eps = _EPS * max(1.0, abs(g.t0), abs(g.t1)) / t_step
        if idx.min() < -span_eps or idx.max() > g.nt - 1 + span_eps:
            bad = float(arrs[0].reshape(-1)[np.argmax((idx < -span_eps) | (idx > g.nt - 1 + span_eps))])
            raise ValueError(
                f"out-of-range sampling in t: {bad:.6g} outside [{g.t0:.6g}, {g.t1:.6g}]"
            )
        arrs[0] = np.clip(idx, 0.0, g.nt - 1.0) + pad_t
    pad_x = min(12, g.nx)
    pad_v = 4
    for xp in x_pts:
        arrs.append(np.mod(np.asarray(xp, dtype=np.float64), g.x_period) / g.dx + pad_x)
    for vp in v_pts:
        arrs.append((np.asarray(vp, dtype=np.float64) + g.v_halfwidth) / g.dv + pad_v)
    # Periodic continuation in x.  In t and v, odd reflection about the edge
    # values keeps the spline prefilter from bending interior samples toward
    # phantom zeros beyond the recorded span (it continues the edge slope,
    # and maps near-zero box-boundary data to near-zero ghost cells).
    widths = [(0, 0)] + [(pad_x, pad_x)] * g.n + [(0, 0)] * g.n
    padded = np.pad(field.data, widths, mode="wrap")
    widths = [(pad_t, pad_t)] + [(0, 0)] * g.n + [(pad_v, pad_v)] * g.n
    padded = np.pad(padded, widths, mode="reflect", reflect_type="odd")
    out_shape = np.broadcast_shapes(*(a.shape for a in arrs))
    coords = [np.broadcast_to(a, out_shape).ravel() for a in arrs]
    vals = map_coordinates(padded, coords, order=3, mode="nearest")
    return vals.reshape(out_shape)


# ---------------------------------------------------------------------------
# the two symmetry transforms


def scale_field(field: Field, epsilon: float, s: float | None = None) -> Field:
    """Resample f at (eps^(2s) t, eps^(1+2s) x, eps v) on the same grid.

    The order s comes from the field metadata unless given explicitly.
    Scaled times must stay inside the recorded span, which holds whenever
    the span contains 0 (the dilation contracts toward the origin).
    """
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    if s is None:
        s = field.meta.get("s")
        if s is None:
            raise ValueError("field metadata lacks the kernel order 's'")
    g = field.grid
    nd = 1 + 2 * g.n
    tt = epsilon ** (2.0 * s) * g.times.reshape((-1,) + (1,) * (nd - 1))
    xs, vs = [], []
    for i in range(g.n):
        shp = [1] * nd
        shp[1 + i] = g.nx
        xs.append(epsilon ** (1.0 + 2.0 * s) * g.x_coords.reshape(shp))
        shp = [1] * nd
        shp[1 + g.n + i] = g.nv
        vs.append(epsilon * g.v_coords.reshape(shp))
    data = _cubic_sample(field, tt, xs, vs)
    meta = dict(field.meta)
    meta["scale_epsilon"] = float(epsilon) * float(meta.get("scale_epsilon", 1.0))
    return Field(g, data, meta)


def translate_field(field: Field, z0) -> Field:
    """Galilean shift: samples of f(t0 + t, x0 + x + v0 t, v0 + v).

    The time axis is relabeled (the output grid spans [t0' - t0, t1' - t0])
    so time needs no interpolation; x wraps on the torus; the velocity
    shift must not push the data's support outside the box, checked
    against the support margin with a two-cell cushion for the spline
    stencil.
    """
    t0, x0, v0 = z0
    g = field.grid
    x0 = tuple(np.atleast_1d(np.asarray(x0, dtype=np.float64)))
    v0 = tuple(np.atleast_1d(np.asarray(v0, dtype=np.float64)))
    if len(x0) != g.n or len(v0) != g.n:
        raise ValueError("translation center dimension does not match the grid")
    vmax = max(abs(c) for c in v0)
    if vmax > 0.0:
        profile = np.abs(field.data).max(axis=tuple(range(1 + g.n)))
        margin = _support_margin(g, profile)
        if vmax + 2.0 * g.dv > margin + _EPS:
            raise ValueError(
                f"out-of-range sampling in v: shift {vmax:.6g} exceeds the "
                f"data's box margin {margin:.6g} minus the stencil cushion"
            )
    new_grid = make_grid(
        g.n, g.x_period, g.v_halfwidth, g.nx, g.nv,
        g.t0 - float(t0), g.t1 - float(t0), g.nt,
    )
    nd = 1 + 2 * g.n
    tt = g.times.reshape((-1,) + (1,) * (nd - 1))  # source times, exact slices
    new_times = new_grid.times.reshape((-1,) + (1,) * (nd - 1))
    xs, vs = [], []
    for i in range(g.n):
        shp = [1] * nd
        shp[1 + i] = g.nx
        xs.append(x0[i] + g.x_coords.reshape(shp) + v0[i] * new_times)
        shp = [1] * nd
        shp[1 + g.n + i] = g.nv
        vs.append(v0[i] + g.v_coords.reshape(shp))
    data = _cubic_sample(field, tt, xs, vs)
    return Field(new_grid, data, dict(field.meta))


@dataclass(frozen=True)
class ScaledKernel:
    """Kernel renormalized by the dilation: eps^(n+2s) K(scaled arguments).

    Duck-type compatible with :class:`kfplab.kernel.Kernel` consumers that
    need only (n, s, kappa, evaluate); satisfies the same two-sided power
    bounds with the same kappa for every base family, and coincides with
    the base kernel exactly when the base is homogeneous.
    """

    base: Kernel
    epsilon: float

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def s(self) -> float:
        return self.base.s

    @property
    def kappa(self) -> float:
        return self.base.kappa

    @property
    def power(self) -> float:
        return self.base.power

    def evaluate(self, t, x, v, w):
        e = self.epsilon
        ts = e ** (2.0 * self.s) * float(t)
        xs = e ** (1.0 + 2.0 * self.s) * np.asarray(x, dtype=np.float64)
        return e**self.power * self.base.evaluate(
            ts, xs, e * np.asarray(v, dtype=np.float64), e * np.asarray(w, dtype=np.float64)
        )


def scale_kernel(kernel: Kernel, epsilon: float):
    """The dilation-companion kernel; the homogeneous family maps to itself.

    For a homogeneous base the renormalization cancels the power law
    exactly, so the original Kernel object is returned unchanged; other
    families come back as a :class:`ScaledKernel` evaluator.
    """
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    if kernel.family == "homogeneous":
        return kernel
    return ScaledKernel(kernel, epsilon)


def scale_source(fn, epsilon: float, s: float):
    """Wrap an analytic source fn(t, x..., v...) into its dilation companion.

    The companion is eps^(2s) fn(eps^(2s) t, eps^(1+2s) x, eps v); its
    whole-space L^r norm is the original's times
    eps^(2s (1 - (n+1+n/s)/r)) exactly, by change of variables.
    """
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    amp = epsilon ** (2.0 * s)
    space = epsilon ** (1.0 + 2.0 * s)

    def scaled(t, *coords):
        n = len(coords) // 2
        xs = [space * c for c in coords[:n]]
        vs = [epsilon * c for c in coords[n:]]
        return amp * fn(amp * t, *xs, *vs)

    return scaled


# ---------------------------------------------------------------------------
# oscillation ladder


@dataclass(frozen=True)
class OscillationProfile:
    """sup-inf of a field over a geometric ladder of kinetic cylinders.

    ``oscillations[j]`` belongs to radius lam^j; NaN marks scales the grid
    cannot resolve.  ``fitted_alpha`` is the slope of log osc against
    log radius (infinite when every resolved oscillation is zero);
    ``lambda_eff`` is the largest value making osc_{j+1} <= (1 -
    lambda_eff/2) osc_j hold at every resolved consecutive pair.
    """

    t0: float
    x0: tuple[float, ...]
    v0: tuple[float, ...]
    lam: float
    s: float
    radii: tuple[float, ...]
    oscillations: tuple[float, ...]
    usable_scales: int
    fitted_alpha: float
    lambda_eff: float
    decay_holds: bool
    saturated: bool
    config_hash: str

    def as_dict(self) -> dict:
        d = asdict(self)
        d["x0"] = list(self.x0)
        d["v0"] = list(self.v0)
        d["radii"] = list(self.radii)
        d["oscillations"] = list(self.oscillations)
        return d

    def save_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("j", "rho", "osc", "usable", "ratio_to_prev"))
            prev = None
            for j, (rho, osc) in enumerate(zip(self.radii, self.oscillations)):
                usable = not math.isnan(osc)
                ratio = ""
                if usable and prev not in (None, 0.0):
                    ratio = osc / prev
                w.writerow((j, rho, osc, usable, ratio))
                prev = osc if usable else None
        return path


def _field_hash(trajectory) -> str:
    import hashlib

    if isinstance(trajectory, Trajectory):
        h = trajectory.meta.get("config_hash")
        if h:
            return h
    f = trajectory.fields if isinstance(trajectory, Trajectory) else trajectory
    return hashlib.sha256(np.ascontiguousarray(f.data).tobytes()).hexdigest()


def oscillation_profile(trajectory, z0, lam: float, J: int) -> OscillationProfile:
    """Oscillation ladder at center z0 over radii lam^j, j = 0..J.

    The base (radius-1) cylinder plus a four-cell parabolic margin must
    sit inside the recorded domain.  A scale is usable when its cylinder
    captures at least one grid cell and its radius spans at least two
    velocity cells; the exponent fit needs four usable scales with
    positive oscillation unless the field is flat on all of them (then
    the profile saturates at alpha = inf).
    """
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lam must lie in (0, 1), got {lam}")
    if J < 3:
        raise ValueError("need J >= 3 ladder steps")
    f = trajectory.fields if isinstance(trajectory, Trajectory) else trajectory
    g = f.grid
    s = f.meta.get("s")
    if s is None:
        raise ValueError("field metadata lacks the kernel order 's'")
    t0, x0, v0 = z0
    x0 = tuple(np.atleast_1d(np.asarray(x0, dtype=np.float64)))
    v0 = tuple(np.atleast_1d(np.asarray(v0, dtype=np.float64)))
    base = KineticCylinder(float(t0), x0, v0, 1.0, float(s))

    t_margin = 4.0 * (g.t1 - g.t0) / max(g.nt - 1, 1)
    if t0 - base.t_extent - t_margin < g.t0 or t0 + base.t_extent + t_margin > g.t1:
        raise ValueError("base cylinder too close to the time boundary")
    vreach = float(np.sqrt(sum(c**2 for c in v0))) + base.rho
    if vreach + 4.0 * g.dv > g.v_halfwidth:
        raise ValueError("base cylinder too close to the velocity box boundary")
    if base.x_extent > 0.5 * g.x_period:
        raise ValueError("base cylinder wider than half the spatial period")

    radii, oscs = [], []
    for j in range(J + 1):
        rho = lam**j
        radii.append(rho)
        cyl = base.with_radius(rho)
        if rho < 2.0 * g.dv:
            oscs.append(float("nan"))
            continue
        m = cyl.mask(g)
        if not m.any():
            oscs.append(float("nan"))
            continue
        vals = f.data[m]
        oscs.append(float(vals.max() - vals.min()))

    usable = [(j, o) for j, o in enumerate(oscs) if not math.isnan(o)]
    positive = [(j, o) for j, o in usable if o > 0.0]
    if usable and not positive:
        alpha, lam_eff, saturated = float("inf"), 1.0, True
    else:
        if len(positive) < 4:
            raise ValueError(
                f"fewer than 4 usable scales ({len(positive)} positive of "
                f"{len(usable)} resolved); enlarge the grid or raise lam"
            )
        js = np.array([j for j, _ in positive], dtype=np.float64)
        ys = np.log(np.array([o for _, o in positive]))
        slope, _ = np.polyfit(js * np.log(lam), ys, 1)
        alpha = float(slope)
        ratios = []
        by_j = dict(usable)
        for j, o in positive:
            nxt = by_j.get(j + 1)
            if nxt is not None and not math.isnan(nxt):
                ratios.append(nxt / o)
        lam_eff = 2.0 * (1.0 - max(ratios)) if ratios else 0.0
        saturated = False
    return OscillationProfile(
        t0=float(t0),
        x0=x0,
        v0=v0,
        lam=float(lam),
        s=float(s),
        radii=tuple(radii),
        oscillations=tuple(oscs),
        usable_scales=len(usable),
        fitted_alpha=alpha,
        lambda_eff=float(lam_eff),
        decay_holds=bool(lam_eff > 0.0),
        saturated=saturated,
        config_hash=_field_hash(trajectory),
    )


def oscillation_profiles(trajectory, centers, lam: float, J: int) -> list[OscillationProfile]:
    """Profiles at many centers; pure and independent, so trivially parallel."""
    return [oscillation_profile(trajectory, z0, lam, J) for z0 in centers]
