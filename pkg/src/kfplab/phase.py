"""Phase-space grids, sampled fields, and measure-theoretic primitives.

The domain is a kinetic slab [t0, t1] x T^n_x x [-V, V]^n_v: x lives on a
torus of period ``x_period``, v on a box that stands in for R^n (fields are
read as extended by zero outside it), t on a uniform ladder of ``nt`` slices.

Quadrature conventions, used consistently by every downstream module:

* integrals (``lp_norm``, inner products) use trapezoid weights in t and
  uniform cell weights dx^n, dv^n in x and v;
* set measures (``level_set_measure``) count cells with a uniform time slab
  (t1 - t0)/nt per stored slice, so measures are exactly monotone in the
  threshold and in the region.

Fourier lattices follow the convention xi = 2*pi*k/period, and ``hs_norm_v``
is Plancherel-normalized so that s = 0 reproduces ``lp_norm(.., p=2)`` on the
v-box exactly.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field as _field
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = [
    "PhaseGrid",
    "Field",
    "Region",
    "make_grid",
    "sample_field",
    "lp_norm",
    "hs_norm_v",
    "gagliardo_seminorm",
    "level_set_measure",
    "velocity_average",
    "save_field",
    "load_field",
]


def _is_pow2(m: int) -> bool:
    return m >= 2 and (m & (m - 1)) == 0


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform kinetic grid. Use :func:`make_grid` to build a validated one."""

    n: int
    x_period: float
    v_halfwidth: float
    nx: int
    nv: int
    t0: float
    t1: float
    nt: int

    # -- lattices ---------------------------------------------------------

    @property
    def dx(self) -> float:
        return self.x_period / self.nx

    @property
    def dv(self) -> float:
        return 2.0 * self.v_halfwidth / self.nv

    @cached_property
    def times(self) -> np.ndarray:
        if self.nt == 1:
            return np.array([self.t0])
        return np.linspace(self.t0, self.t1, self.nt)

    @cached_property
    def x_coords(self) -> np.ndarray:
        return self.dx * np.arange(self.nx)

    @cached_property
    def v_coords(self) -> np.ndarray:
        return -self.v_halfwidth + self.dv * np.arange(self.nv)

    @cached_property
    def x_freqs(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.nx, d=self.dx)

    @cached_property
    def v_freqs(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.nv, d=self.dv)

    # -- shapes and weights -----------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nt,) + (self.nx,) * self.n + (self.nv,) * self.n

    @property
    def vshape(self) -> tuple[int, ...]:
        return (self.nv,) * self.n

    @property
    def xshape(self) -> tuple[int, ...]:
        return (self.nx,) * self.n

    @property
    def cell_x(self) -> float:
        return self.dx**self.n

    @property
    def cell_v(self) -> float:
        return self.dv**self.n

    @cached_property
    def t_weights(self) -> np.ndarray:
        """Trapezoid weights for time integrals; a lone slice has weight 1."""
        if self.nt == 1:
            return np.array([1.0])
        w = np.full(self.nt, (self.t1 - self.t0) / (self.nt - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    @property
    def t_slab(self) -> float:
        """Uniform per-slice weight for set measures."""
        if self.nt == 1 or self.t1 <= self.t0:
            return 1.0
        return (self.t1 - self.t0) / self.nt

    # -- broadcastable coordinate arrays ----------------------------------

    def v_broadcast(self) -> list[np.ndarray]:
        """n arrays, each shaped to broadcast over the v-axes."""
        out = []
        for i in range(self.n):
            shp = [1] * self.n
            shp[i] = self.nv
            out.append(self.v_coords.reshape(shp))
        return out

    def x_broadcast(self) -> list[np.ndarray]:
        out = []
        for i in range(self.n):
            shp = [1] * self.n
            shp[i] = self.nx
            out.append(self.x_coords.reshape(shp))
        return out

    @cached_property
    def v_abs(self) -> np.ndarray:
        """|v| over the v-axes, shape ``vshape``."""
        comps = self.v_broadcast()
        return np.sqrt(sum(c**2 for c in comps))

    @cached_property
    def v_points(self) -> np.ndarray:
        """All v lattice points, shape (nv^n, n)."""
        mesh = np.meshgrid(*([self.v_coords] * self.n), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def field_coords(self) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
        """(t, [x_i...], [v_i...]) arrays broadcastable to ``shape``."""
        nd = 1 + 2 * self.n
        t = self.times.reshape((self.nt,) + (1,) * (nd - 1))
        xs, vs = [], []
        for i in range(self.n):
            shp = [1] * nd
            shp[1 + i] = self.nx
            xs.append(self.x_coords.reshape(shp))
            shp = [1] * nd
            shp[1 + self.n + i] = self.nv
            vs.append(self.v_coords.reshape(shp))
        return t, xs, vs

    def check_order(self, s: float) -> None:
        if not 0.0 < s < 1.0:
            raise ValueError(f"s must lie in (0, 1), got {s}")
        if not 2.0 * s < self.n:
            raise ValueError(f"need 2s < n; got s={s}, n={self.n}")


def make_grid(
    n: int,
    x_period: float,
    v_halfwidth: float,
    nx: int,
    nv: int,
    t0: float,
    t1: float,
    nt: int,
) -> PhaseGrid:
    """Validated grid constructor.

    nx, nv must be powers of two (FFT paths assume it); v_halfwidth >= 8 so
    the radius-3 balls and the kernel's radius-6 interaction band fit with
    margin; nt >= 1 stored slices with t0 < t1 unless nt == 1.
    """
    if n not in (1, 2):
        raise ValueError(f"n must be 1 or 2, got {n}")
    if not (_is_pow2(nx) and _is_pow2(nv)):
        raise ValueError(f"nx and nv must be powers of two, got {nx}, {nv}")
    if x_period <= 0:
        raise ValueError("x_period must be positive")
    if v_halfwidth < 8:
        raise ValueError(f"v_halfwidth must be >= 8, got {v_halfwidth}")
    if nt < 1:
        raise ValueError("nt must be >= 1")
    if nt == 1:
        if t1 < t0:
            raise ValueError("t1 < t0")
    elif not t1 > t0:
        raise ValueError("need t0 < t1 when nt > 1")
    return PhaseGrid(n, float(x_period), float(v_halfwidth), nx, nv, float(t0), float(t1), nt)


@dataclass
class Field:
    """Real samples on a PhaseGrid, indexed [t][x...][v...]."""

    grid: PhaseGrid
    data: np.ndarray
    meta: dict = _field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.shape != self.grid.shape:
            raise ValueError(
                f"data shape {self.data.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("field contains non-finite samples")

    def vslice(self, it: int, ix) -> np.ndarray:
        """The v-profile at time index ``it`` and x index ``ix``."""
        if self.grid.n == 1:
            return self.data[it, ix]
        return self.data[(it,) + tuple(ix)]

    def copy(self) -> "Field":
        return Field(self.grid, self.data.copy(), dict(self.meta))


def sample_field(grid: PhaseGrid, fn, meta: dict | None = None) -> Field:
    """Sample ``fn(t, x..., v...)`` (broadcasting arrays) on the grid."""
    t, xs, vs = grid.field_coords()
    data = np.broadcast_to(fn(t, *xs, *vs), grid.shape).astype(np.float64).copy()
    return Field(grid, data, meta or {})


# ---------------------------------------------------------------------------
# regions


def _torus_dist2(coords: np.ndarray, center: float, period: float) -> np.ndarray:
    d = np.mod(coords - center + 0.5 * period, period) - 0.5 * period
    return d**2


@dataclass(frozen=True)
class Region:
    """Product region [a,b] x ball(x_center, x_radius) x optional v-ball."""

    t_interval: tuple[float, float]
    x_center: tuple[float, ...]
    x_radius: float
    v_center: tuple[float, ...] | None = None
    v_radius: float | None = None

    def validate(self, grid: PhaseGrid) -> None:
        a, b = self.t_interval
        if b < a:
            raise ValueError("empty time interval")
        if len(self.x_center) != grid.n:
            raise ValueError("x_center dimension mismatch")
        if self.x_radius <= 0 or self.x_radius > 0.5 * grid.x_period:
            raise ValueError("x ball must fit inside one period")
        if (self.v_center is None) != (self.v_radius is None):
            raise ValueError("v_center and v_radius must be given together")
        if self.v_center is not None:
            if len(self.v_center) != grid.n:
                raise ValueError("v_center dimension mismatch")
            reach = max(abs(c) for c in self.v_center) + self.v_radius
            if reach > grid.v_halfwidth:
                raise ValueError("v ball exceeds the velocity box")

    def t_mask(self, grid: PhaseGrid) -> np.ndarray:
        a, b = self.t_interval
        eps = 1e-12 * max(1.0, abs(a), abs(b))
        return (grid.times >= a - eps) & (grid.times <= b + eps)

    def x_mask(self, grid: PhaseGrid) -> np.ndarray:
        d2 = np.zeros(grid.xshape)
        for i, c in enumerate(grid.x_broadcast()):
            d2 = d2 + _torus_dist2(c, self.x_center[i], grid.x_period)
        return d2 <= self.x_radius**2

    def v_mask(self, grid: PhaseGrid) -> np.ndarray:
        if self.v_center is None:
            return np.ones(grid.vshape, dtype=bool)
        d2 = np.zeros(grid.vshape)
        for i, c in enumerate(grid.v_broadcast()):
            d2 = d2 + (c - self.v_center[i]) ** 2
        return d2 <= self.v_radius**2


def _region_masks(grid: PhaseGrid, region: Region | None):
    if region is None:
        return (
            np.ones(grid.nt, dtype=bool),
            np.ones(grid.xshape, dtype=bool),
            np.ones(grid.vshape, dtype=bool),
        )
    region.validate(grid)
    return region.t_mask(grid), region.x_mask(grid), region.v_mask(grid)


# ---------------------------------------------------------------------------
# norms and measures


def lp_norm(field: Field, p: float, region: Region | None = None) -> float:
    """L^p norm over a region (whole domain when region is None). p=inf -> sup."""
    g = field.grid
    tm, xm, vm = _region_masks(g, region)
    if not (tm.any() and xm.any() and vm.any()):
        return 0.0
    sub = field.data[tm][:, xm][..., vm]  # (T, X, V)
    if np.isinf(p):
        return float(np.abs(sub).max())
    if p <= 0:
        raise ValueError("p must be positive or inf")
    wt = g.t_weights[tm]
    s = np.abs(sub) ** p
    s = s.sum(axis=2) * g.cell_v
    s = s.sum(axis=1) * g.cell_x
    return float((s @ wt) ** (1.0 / p))


def _plancherel_weight(grid: PhaseGrid) -> float:
    # sum_j |f_j|^2 dv^n == sum_k |fhat_k|^2 * (dv^n / nv^n)
    return grid.cell_v / grid.nv**grid.n


def hs_norm_v(grid: PhaseGrid, vslice: np.ndarray, s: float) -> float:
    """Sobolev H^s norm in v via the (1 + |xi|^2)^s Fourier weight.

    At s = 0 this equals the L^2(v-box) norm to roundoff (Plancherel).
    """
    vslice = np.asarray(vslice, dtype=np.float64)
    if vslice.shape != grid.vshape:
        raise ValueError("vslice shape mismatch")
    fhat = np.fft.fftn(vslice)
    xi2 = np.zeros(grid.vshape)
    for i in range(grid.n):
        shp = [1] * grid.n
        shp[i] = grid.nv
        xi2 = xi2 + grid.v_freqs.reshape(shp) ** 2
    val = np.sum((1.0 + xi2) ** s * np.abs(fhat) ** 2) * _plancherel_weight(grid)
    return float(np.sqrt(val))


def _support_margin(grid: PhaseGrid, vslice: np.ndarray, rel: float = 1e-12) -> float:
    """Distance from the essential support of vslice to the v-box boundary."""
    amax = np.abs(vslice).max()
    if amax == 0.0:
        return float(grid.v_halfwidth)
    live = np.abs(vslice) > rel * amax
    if not live.any():
        return float(grid.v_halfwidth)
    # component-wise margin is what matters for the box
    m = grid.v_halfwidth
    for c in grid.v_broadcast():
        cc = np.broadcast_to(np.abs(c), grid.vshape)
        m = min(m, grid.v_halfwidth - cc[live].max())
    return float(m)


def box_complement_integral(grid: PhaseGrid, s: float) -> np.ndarray:
    """int over {w outside the v-box} of |v - w|^{-(n+2s)} dw, per lattice v.

    Closed form in one dimension; angular midpoint quadrature against the
    exact ray-to-boundary distance in two.
    """
    V = grid.v_halfwidth
    if grid.n == 1:
        v = grid.v_coords
        dm = np.maximum(V - v, 0.5 * grid.dv)
        dp = np.maximum(V + v, 0.5 * grid.dv)
        return (dm ** (-2 * s) + dp ** (-2 * s)) / (2 * s)
    # n == 2: R(phi; v) = distance from v to the square boundary along phi
    nphi = 256
    phi = (np.arange(nphi) + 0.5) * (2 * np.pi / nphi)
    d = np.stack([np.cos(phi), np.sin(phi)])  # (2, nphi)
    pts = grid.v_points  # (P, 2)
    with np.errstate(divide="ignore"):
        tx = np.where(d[0] != 0, (np.sign(d[0]) * V - pts[:, :1]) / d[0], np.inf)
        ty = np.where(d[1] != 0, (np.sign(d[1]) * V - pts[:, 1:2]) / d[1], np.inf)
    R = np.minimum(tx, ty)
    R = np.maximum(R, 0.5 * grid.dv)
    out = np.sum(R ** (-2 * s), axis=1) * (2 * np.pi / nphi) / (2 * s)
    return out.reshape(grid.vshape)


def gagliardo_seminorm(grid: PhaseGrid, vslice: np.ndarray, s: float) -> float:
    """Double-sum Gagliardo H^s seminorm in v of the zero-extended slice.

    Cell pairs inside the box enter a symmetrized midpoint double sum with
    the diagonal cell excluded; pairs with one point outside the box reduce
    to f(v)^2 times the exact kernel integral over the box complement
    (:func:`box_complement_integral`), which keeps the seminorm consistent
    with the whole-space seminorm of the zero extension.

    The slice must be compactly supported inside the v-box; a slice whose
    support reaches within distance 1 of the boundary triggers a warning.
    """
    vslice = np.asarray(vslice, dtype=np.float64)
    if vslice.shape != grid.vshape:
        raise ValueError("vslice shape mismatch")
    if _support_margin(grid, vslice) < 1.0:
        warnings.warn("gagliardo_seminorm: support touches the v-box boundary band")
    f = vslice.ravel()
    pts = grid.v_points
    total = 0.0
    power = grid.n + 2.0 * s
    # row blocks bound the pairwise-distance temporaries
    block = max(1, int(2**22 // max(len(f), 1)))
    for lo in range(0, len(f), block):
        hi = min(lo + block, len(f))
        diff = pts[lo:hi, None, :] - pts[None, :, :]
        r = np.sqrt(np.sum(diff**2, axis=-1))
        sub = (f[lo:hi, None] - f[None, :]) ** 2
        with np.errstate(divide="ignore"):
            w = r ** (-power)
        # diagonal cells excluded from the pair sum
        for i in range(lo, hi):
            w[i - lo, i] = 0.0
        total += float(np.sum(sub * w))
    total *= grid.cell_v**2
    # ordered pairs with exactly one point outside the box
    comp = box_complement_integral(grid, s).ravel()
    total += 2.0 * float(np.sum(f**2 * comp)) * grid.cell_v
    return float(np.sqrt(total))


def level_set_measure(field: Field, comparator: str, threshold, region: Region | None = None) -> float:
    """Measure of {f <= a} / {f >= a} / {a < f < b} inside a region (cell counting)."""
    g = field.grid
    tm, xm, vm = _region_masks(g, region)
    sub = field.data[tm][:, xm][..., vm]
    if comparator == "le":
        pred = sub <= threshold
    elif comparator == "ge":
        pred = sub >= threshold
    elif comparator == "between":
        lo, hi = threshold
        if not lo < hi:
            raise ValueError("need lo < hi for 'between'")
        pred = (sub > lo) & (sub < hi)
    else:
        raise ValueError(f"unknown comparator {comparator!r}")
    count = pred.sum()
    return float(count * g.t_slab * g.cell_x * g.cell_v)


def velocity_average(field: Field, weight) -> np.ndarray:
    """rho(t, x) = integral of weight(v) * f(t, x, v) dv, midpoint rule.

    ``weight`` is either samples on the v-lattice (shape (nv,)*n) or a
    callable of the n velocity coordinate arrays.
    """
    g = field.grid
    if callable(weight):
        w = np.broadcast_to(weight(*g.v_broadcast()), g.vshape)
    else:
        w = np.asarray(weight, dtype=np.float64)
        if w.shape != g.vshape:
            raise ValueError("weight shape mismatch")
    axes = tuple(range(1 + g.n, 1 + 2 * g.n))
    return np.tensordot(field.data, w, axes=(axes, tuple(range(g.n)))) * g.cell_v


# ---------------------------------------------------------------------------
# dump format: raw little-endian float64 + JSON sidecar


def save_field(field: Field, path) -> tuple[Path, Path]:
    """Write ``<path>.bin`` (little-endian float64, row-major [t][x][v]) and
    ``<path>.json`` (grid metadata sidecar)."""
    path = Path(path)
    bin_path = path.with_suffix(".bin")
    json_path = path.with_suffix(".json")
    g = field.grid
    field.data.astype("<f8").tofile(bin_path)
    sidecar = {
        "n": g.n,
        "nx": g.nx,
        "nv": g.nv,
        "nt": g.nt,
        "x_period": g.x_period,
        "v_halfwidth": g.v_halfwidth,
        "t0": g.t0,
        "t1": g.t1,
        "s": field.meta.get("s"),
        "kappa": field.meta.get("kappa"),
    }
    json_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return bin_path, json_path


def load_field(path) -> Field:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(".json").read_text())
    grid = make_grid(
        sidecar["n"],
        sidecar["x_period"],
        sidecar["v_halfwidth"],
        sidecar["nx"],
        sidecar["nv"],
        sidecar["t0"],
        sidecar["t1"],
        sidecar["nt"],
    )
    data = np.fromfile(path.with_suffix(".bin"), dtype="<f8").reshape(grid.shape)
    meta = {k: sidecar[k] for k in ("s", "kappa") if sidecar.get(k) is not None}
    return Field(grid, data, meta)
