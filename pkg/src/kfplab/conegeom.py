"""Exact ray geometry and Monte Carlo measure for propagation cones.

A cone runs from a vertex in an early time window to a base set made of
axis-aligned space-time boxes in a late window.  Membership is decided
by exact ray/box algebra, so the only randomness is in the sampling:
the space-time measure of the cone's intersection with an indicator set
S, and the cross-sectional areas, are Monte Carlo estimates with stated
standard errors.  The headline inequality checked here is

    |cone cap S| >= |B| mu^2 / 80

whenever every vertex-to-base segment meets S in length at least mu.
"""

from __future__ import annotations

import base64
import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

_EPS = 1e-9

VERTEX_T_WINDOW = (-5.0, -4.0)
BASE_T_WINDOW = (-2.0, 0.0)
SPATIAL_RADIUS = 2.0
MIN_SAMPLES = 100_000


# ---------------------------------------------------------------------------
# geometry primitives


@dataclass(frozen=True)
class SpaceTimeBox:
    """Axis-aligned box in (t, x) coordinates, time first."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or len(self.lo) < 2:
            raise ValueError("lo and hi must both list t plus at least one x coordinate")
        if not all(l < h for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"box must have positive extent on every axis: {self.lo} .. {self.hi}")

    @property
    def n(self) -> int:
        return len(self.lo) - 1

    @property
    def volume(self) -> float:
        return float(np.prod(np.asarray(self.hi) - np.asarray(self.lo)))

    def corners(self) -> np.ndarray:
        d = len(self.lo)
        out = np.empty((2**d, d))
        for j in range(2**d):
            for i in range(d):
                out[j, i] = self.hi[i] if (j >> i) & 1 else self.lo[i]
        return out

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(count, len(self.lo)))

    def contains(self, pts) -> np.ndarray:
        p = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        return np.all((p >= self.lo) & (p <= self.hi), axis=1)


@dataclass(frozen=True)
class IndicatorGrid:
    """Boolean indicator sampled on a rectilinear space-time grid.

    A point belongs to the set when the cell containing it is marked;
    points outside the covered block never belong.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    values: np.ndarray

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or self.values.ndim != len(self.lo):
            raise ValueError("grid bounds and value array dimensions disagree")
        if not all(l < h for l, h in zip(self.lo, self.hi)):
            raise ValueError("grid must have positive extent on every axis")
        object.__setattr__(self, "values", np.ascontiguousarray(self.values, dtype=bool))

    @property
    def n(self) -> int:
        return self.values.ndim - 1

    @classmethod
    def from_function(cls, lo, hi, shape, fn) -> "IndicatorGrid":
        """Mark cells by evaluating fn at their centers; fn gets (t, x...)."""
        lo = tuple(float(c) for c in lo)
        hi = tuple(float(c) for c in hi)
        axes = [
            l + (np.arange(m) + 0.5) * (h - l) / m for l, h, m in zip(lo, hi, shape)
        ]
        grids = np.meshgrid(*axes, indexing="ij")
        return cls(lo, hi, np.asarray(fn(*grids), dtype=bool))

    def lookup(self, pts) -> np.ndarray:
        p = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        shape = np.asarray(self.values.shape)
        idx = np.floor((p - lo) / (hi - lo) * shape).astype(np.int64)
        inside = np.all((idx >= 0) & (idx < shape), axis=1)
        out = np.zeros(len(p), dtype=bool)
        if inside.any():
            sel = idx[inside]
            out[inside] = self.values[tuple(sel.T)]
        return out

    def true_fraction(self) -> float:
        return float(self.values.mean())


def _in_spatial_ball(x) -> bool:
    return float(np.sqrt(np.sum(np.asarray(x, dtype=np.float64) ** 2))) <= SPATIAL_RADIUS + _EPS


@dataclass(frozen=True)
class ConeProblem:
    """Vertex, box-union base, indicator set, and per-segment length bound.

    The vertex sits in the early window [-5, -4] x B_2, every base box in
    the late window [-2, 0] x B_2; boxes must have disjoint interiors so
    the base volume is the plain sum.  ``mu`` is the promised lower bound
    on the length of segment-with-indicator intersections.
    """

    vertex: tuple[float, ...]
    boxes: tuple[SpaceTimeBox, ...]
    indicator: IndicatorGrid
    mu: float

    def __post_init__(self):
        vertex = tuple(float(c) for c in self.vertex)
        object.__setattr__(self, "vertex", vertex)
        object.__setattr__(self, "boxes", tuple(self.boxes))
        n = len(vertex) - 1
        if n not in (1, 2):
            raise ValueError(f"only 1 or 2 spatial dimensions supported, got {n}")
        t0 = vertex[0]
        if not VERTEX_T_WINDOW[0] - _EPS <= t0 <= VERTEX_T_WINDOW[1] + _EPS:
            raise ValueError(f"vertex time {t0} outside {VERTEX_T_WINDOW}")
        if not _in_spatial_ball(vertex[1:]):
            raise ValueError("vertex position outside the radius-2 ball")
        if not self.boxes:
            raise ValueError("base needs at least one box")
        for b in self.boxes:
            if b.n != n:
                raise ValueError("box dimension does not match the vertex")
            if b.lo[0] < BASE_T_WINDOW[0] - _EPS or b.hi[0] > BASE_T_WINDOW[1] + _EPS:
                raise ValueError(f"box time range {b.lo[0]}..{b.hi[0]} outside {BASE_T_WINDOW}")
            if not all(_in_spatial_ball(c[1:]) for c in b.corners()):
                raise ValueError("box has a corner outside the radius-2 ball")
        for i, a in enumerate(self.boxes):
            for b in self.boxes[i + 1 :]:
                overlap = all(
                    max(la, lb) < min(ha, hb) - _EPS
                    for la, ha, lb, hb in zip(a.lo, a.hi, b.lo, b.hi)
                )
                if overlap:
                    raise ValueError("base boxes must have disjoint interiors")
        if self.indicator.n != n:
            raise ValueError("indicator dimension does not match the vertex")
        if not self.mu >= 0.0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")

    @property
    def n(self) -> int:
        return len(self.vertex) - 1

    @property
    def base_volume(self) -> float:
        return float(sum(b.volume for b in self.boxes))

    def content_hash(self) -> str:
        h = hashlib.sha256()
        head = {
            "vertex": list(self.vertex),
            "boxes": [[list(b.lo), list(b.hi)] for b in self.boxes],
            "mu": self.mu,
            "grid": [list(self.indicator.lo), list(self.indicator.hi), list(self.indicator.values.shape)],
        }
        h.update(json.dumps(head, sort_keys=True).encode())
        h.update(np.packbits(self.indicator.values).tobytes())
        return h.hexdigest()

    def as_dict(self) -> dict:
        bits = base64.b64encode(np.packbits(self.indicator.values).tobytes()).decode()
        return {
            "vertex": list(self.vertex),
            "boxes": [[list(b.lo), list(b.hi)] for b in self.boxes],
            "mu": self.mu,
            "indicator": {
                "lo": list(self.indicator.lo),
                "hi": list(self.indicator.hi),
                "shape": list(self.indicator.values.shape),
                "packed_values": bits,
            },
        }


def load_problem(d: dict) -> ConeProblem:
    """Inverse of :meth:`ConeProblem.as_dict`."""
    ind = d["indicator"]
    shape = tuple(ind["shape"])
    count = int(np.prod(shape))
    bits = np.unpackbits(
        np.frombuffer(base64.b64decode(ind["packed_values"]), dtype=np.uint8),
        count=count,
    )
    grid = IndicatorGrid(tuple(ind["lo"]), tuple(ind["hi"]), bits.reshape(shape).astype(bool))
    boxes = tuple(SpaceTimeBox(tuple(lo), tuple(hi)) for lo, hi in d["boxes"])
    return ConeProblem(tuple(d["vertex"]), boxes, grid, float(d["mu"]))


# ---------------------------------------------------------------------------
# exact ray algebra


def ray_hits_base(vertex, boxes, pts) -> np.ndarray:
    """True where the ray from the vertex through the point reaches a box.

    The ray r(lam) = vertex + lam (p - vertex) is intersected with every
    box by axis-slab interval arithmetic; a hit at parameter lam >= 1
    puts p between the vertex and the base, i.e. inside the cone.
    """
    v = np.asarray(vertex, dtype=np.float64)
    p = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    d = p - v
    hit = np.zeros(len(p), dtype=bool)
    for box in boxes:
        lam_lo = np.full(len(p), 1.0)
        lam_hi = np.full(len(p), np.inf)
        ok = np.ones(len(p), dtype=bool)
        for i in range(p.shape[1]):
            di = d[:, i]
            lo = box.lo[i] - v[i]
            hi = box.hi[i] - v[i]
            moving = di != 0.0
            with np.errstate(divide="ignore", invalid="ignore"):
                a = np.where(moving, lo / di, 0.0)
                b = np.where(moving, hi / di, 0.0)
            lo_i = np.minimum(a, b)
            hi_i = np.maximum(a, b)
            lam_lo = np.where(moving, np.maximum(lam_lo, lo_i), lam_lo)
            lam_hi = np.where(moving, np.minimum(lam_hi, hi_i), lam_hi)
            # a ray parallel to this axis must already sit inside the slab
            ok &= moving | ((lo <= 0.0) & (0.0 <= hi))
        hit |= ok & (lam_lo <= lam_hi)
        if hit.all():
            break
    return hit


def cone_bounds(vertex, boxes) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned bounding box of the cone (hull of vertex and base corners)."""
    pts = [np.asarray(vertex, dtype=np.float64)[None]]
    pts.extend(b.corners() for b in boxes)
    stacked = np.vstack(pts)
    return stacked.min(axis=0), stacked.max(axis=0)


def segment_measure(vertex, b, indicator: IndicatorGrid, param_samples: int = 4096) -> float:
    """Length of the vertex-to-b segment inside the indicator set.

    Midpoint sampling in time with the arc-length weight
    sqrt(1 + |vbar|^2), vbar = (x1 - x0)/(t1 - t0); the geometry windows
    force |vbar| <= 2, which is re-checked here.
    """
    v = np.asarray(vertex, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if v.shape != b.shape:
        raise ValueError("vertex and endpoint dimensions disagree")
    t0, x0 = v[0], v[1:]
    t1, x1 = b[0], b[1:]
    if not VERTEX_T_WINDOW[0] - _EPS <= t0 <= VERTEX_T_WINDOW[1] + _EPS or not _in_spatial_ball(x0):
        raise ValueError("vertex outside the early window")
    if not BASE_T_WINDOW[0] - _EPS <= t1 <= BASE_T_WINDOW[1] + _EPS or not _in_spatial_ball(x1):
        raise ValueError("segment endpoint outside the late window")
    # the windows are disjoint in time, so t1 - t0 >= 2 here
    vbar = (x1 - x0) / (t1 - t0)
    speed = float(np.sqrt(np.sum(vbar**2)))
    if speed > 2.0 + 1e-6:
        raise ValueError(f"segment slope {speed:.6g} exceeds 2")
    ts = t0 + (np.arange(param_samples) + 0.5) * (t1 - t0) / param_samples
    pts = np.empty((param_samples, len(v)))
    pts[:, 0] = ts
    pts[:, 1:] = x0 + np.outer(ts - t0, vbar)
    inside = indicator.lookup(pts)
    arc = math.sqrt(1.0 + speed**2)
    return float(inside.sum()) * abs(t1 - t0) / param_samples * arc


# ---------------------------------------------------------------------------
# Monte Carlo estimates


def certify_segments(
    problem: ConeProblem,
    per_box: int = 32,
    param_samples: int = 4096,
    seed: int = 0,
) -> tuple[bool, float]:
    """Check the per-segment hypothesis on box corners plus random points.

    Returns (all segments reached mu, smallest measure seen).
    """
    worst = math.inf
    for k, box in enumerate(problem.boxes):
        rng = np.random.default_rng([seed, 1000 + k])
        targets = np.vstack([box.corners(), box.sample(rng, per_box)])
        for b in targets:
            m = segment_measure(problem.vertex, b, problem.indicator, param_samples)
            worst = min(worst, m)
    return bool(worst >= problem.mu - _EPS), float(worst)


def cross_section_area(
    problem: ConeProblem, t: float, samples: int = 100_000, seed: int = 0
) -> tuple[float, float]:
    """Monte Carlo area of the cone's time slice, with its standard error."""
    lo, hi = cone_bounds(problem.vertex, problem.boxes)
    rng = np.random.default_rng([seed, 1])
    pts = np.empty((samples, len(problem.vertex)))
    pts[:, 0] = t
    pts[:, 1:] = rng.uniform(lo[1:], hi[1:], size=(samples, problem.n))
    frac = ray_hits_base(problem.vertex, problem.boxes, pts).mean()
    vol = float(np.prod(hi[1:] - lo[1:]))
    se = vol * math.sqrt(max(frac * (1.0 - frac), 0.0) / samples)
    return vol * float(frac), se


def cross_section_profile(
    problem: ConeProblem, times, samples: int = 100_000, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Slice areas at several times (independent estimates, shared seed root)."""
    areas, ses = [], []
    for j, t in enumerate(times):
        a, se = cross_section_area(problem, float(t), samples, seed=seed + 101 * j)
        areas.append(a)
        ses.append(se)
    return np.array(areas), np.array(ses)


def line_fit_r2(xs, ys) -> tuple[float, float, float]:
    """Least-squares line through (xs, ys): slope, intercept, R^2."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    total = ys - ys.mean()
    denom = float(total @ total)
    r2 = 1.0 - float(resid @ resid) / denom if denom > 0 else 1.0
    return float(slope), float(intercept), float(r2)


@dataclass(frozen=True)
class ConeReport:
    """Monte Carlo verdict on the cone-intersection lower bound."""

    measure: float
    standard_error: float
    bound: float
    verdict: str
    slack: float
    base_volume: float
    mu: float
    min_segment_measure: float
    area_minus2: float
    area_minus2_se: float
    area_bound: float
    samples: int
    problem_hash: str

    def as_dict(self) -> dict:
        return asdict(self)


def cone_measure_check(
    problem: ConeProblem,
    samples: int = 200_000,
    seed: int = 0,
    cert_per_box: int = 32,
    param_samples: int = 4096,
) -> ConeReport:
    """Estimate |cone cap S| and compare against |B| mu^2 / 80.

    The per-segment hypothesis is certified first on sampled segments;
    if it fails the verdict is "vacuous".  Otherwise "pass" means the
    estimate clears the bound minus three standard errors.
    """
    if samples < MIN_SAMPLES:
        raise ValueError(f"sample budget {samples} below the minimum {MIN_SAMPLES}")
    certified, worst = certify_segments(problem, cert_per_box, param_samples, seed)
    lo, hi = cone_bounds(problem.vertex, problem.boxes)
    rng = np.random.default_rng([seed, 0])
    pts = rng.uniform(lo, hi, size=(samples, len(problem.vertex)))
    inside = ray_hits_base(problem.vertex, problem.boxes, pts)
    inside &= problem.indicator.lookup(pts)
    frac = float(inside.mean())
    vol = float(np.prod(hi - lo))
    measure = vol * frac
    se = vol * math.sqrt(max(frac * (1.0 - frac), 0.0) / samples)
    bound = problem.base_volume * problem.mu**2 / 80.0
    area, area_se = cross_section_area(problem, -2.0, max(samples // 2, MIN_SAMPLES // 2), seed)
    if not certified:
        verdict = "vacuous"
    elif measure >= bound - 3.0 * se:
        verdict = "pass"
    else:
        verdict = "fail"
    return ConeReport(
        measure=measure,
        standard_error=se,
        bound=bound,
        verdict=verdict,
        slack=measure / bound if bound > 0 else math.inf,
        base_volume=problem.base_volume,
        mu=problem.mu,
        min_segment_measure=worst,
        area_minus2=area,
        area_minus2_se=area_se,
        area_bound=problem.base_volume / 4.0,
        samples=samples,
        problem_hash=problem.content_hash(),
    )


def reports_to_csv(reports, path) -> Path:
    """One row per cone report, scalar columns sorted by name."""
    path = Path(path)
    rows = [r.as_dict() for r in reports]
    keys = sorted(rows[0])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for row in rows:
            w.writerow([row[k] for k in keys])
    return path


# ---------------------------------------------------------------------------
# randomized admissible instances


def random_cone_instance(seed: int, n: int = 1) -> ConeProblem:
    """Seeded random (vertex, base, indicator, mu) satisfying the hypothesis.

    The indicator is a full time slab strictly between the vertex window
    and the base window, aligned to the grid so its thickness is exact;
    every vertex-to-base segment then crosses it completely, giving each
    segment measure at least the slab thickness.  mu is set to 0.9 of
    that, so the hypothesis holds with margin while the tested bound
    stays within a factor of itself.
    """
    if n not in (1, 2):
        raise ValueError(f"only 1 or 2 spatial dimensions supported, got {n}")
    rng = np.random.default_rng([seed, 7])
    t0 = rng.uniform(-5.0, -4.0)
    # vertex position inside the ball with headroom
    while True:
        x0 = rng.uniform(-1.8, 1.8, size=n)
        if np.sqrt((x0**2).sum()) <= 1.8:
            break
    k = int(rng.integers(1, 4))
    slots = np.linspace(-2.0, 0.0, k + 1)
    boxes = []
    for j in range(k):
        width = slots[j + 1] - slots[j]
        a = rng.uniform(slots[j] + 0.02 * width, slots[j] + 0.4 * width)
        b = rng.uniform(a + 0.3 * width, slots[j + 1] - 0.02 * width)
        # spatial box with all corners inside the ball: |center|_inf + half <= 2/sqrt(n)
        reach = SPATIAL_RADIUS / math.sqrt(n)
        half = rng.uniform(0.25, 0.6, size=n)
        center = rng.uniform(-(reach - half - 0.05), reach - half - 0.05)
        boxes.append(
            SpaceTimeBox(
                (a, *(center - half)),
                (b, *(center + half)),
            )
        )
    # grid-aligned slab in the gap between the two windows
    cells_t = 200
    dt = 5.0 / cells_t
    thickness = dt * int(rng.integers(12, 21))  # 0.3 .. 0.5
    start = -5.0 + dt * int(rng.integers(int((-3.8 + 5.0) / dt), int((-2.6 - thickness + 5.0) / dt)))
    pad = SPATIAL_RADIUS + 0.2
    shape = (cells_t,) + (32,) * n

    def slab(t, *xs):
        return (t >= start) & (t <= start + thickness)

    grid = IndicatorGrid.from_function(
        (-5.0,) + (-pad,) * n, (0.0,) + (pad,) * n, shape, slab
    )
    mu = 0.9 * thickness
    return ConeProblem(tuple((t0, *x0)), tuple(boxes), grid, mu)
