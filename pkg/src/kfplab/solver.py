"""Time integration on the spatial torus with nonlocal velocity diffusion.

The equation is linear with a stiff singular part, so every stepper keeps
the same outer structure: Strang splitting with exact transport halves
(the free-streaming factor is diagonal in the x-Fourier basis, so that
piece costs one FFT and is error-free) around a collision-plus-source
step of the configured flavor:

* ``spectral-exponential`` advances the collision generator by its exact
  exponential, computed once from the symmetric generator's spectral
  decomposition (homogeneous kernels, n = 1);
* ``imex`` integrates the homogeneous minorant (coefficient 1/kappa)
  exactly the same way and the remainder explicitly, lifting the
  step-size ceiling of a fully explicit method (n = 1);
* ``explicit-rk2`` is Heun's method on the generator (any n).

Every stepper discretizes the same generator; they differ only in how
the stiff part is integrated in time, so trajectories from different
steppers converge to one another as dt shrinks.

Collision steps act slice-by-slice in v; the batch helpers convolve all
x-slices at once, which is the data-parallel layout the operator allows
(each slice's collision term depends on that slice alone).

A weak-form residual verifier closes the loop: it integrates the
recorded trajectory against a compactly supported test function and
reports how far the triple (field, kernel, source) is from satisfying
the equation in the integrated-by-parts sense.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field as _field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.signal import fftconvolve

from kfplab.kernel import Kernel, collision_generator, _tail_bound
from kfplab.phase import Field, PhaseGrid, _support_margin, save_field

__all__ = [
    "RunConfig",
    "SolverState",
    "Trajectory",
    "LOG_COLUMNS",
    "config_hash",
    "plan_config",
    "stability_limit",
    "step",
    "run",
    "weak_residual",
    "write_stepper_log",
]

STEPPERS = ("spectral-exponential", "imex", "explicit-rk2")
LOG_COLUMNS = ("step", "time", "cfl_margin", "tail_error", "mass", "l2")


def config_hash(payload: dict) -> str:
    """sha256 of the canonical JSON serialization of a config dict."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def stability_limit(kernel: Kernel | None, grid: PhaseGrid, stepper: str, c_stab: float = 0.25) -> float:
    """Largest admissible dt for the chosen stepper.

    Explicit stepping obeys both the configured c_stab * dv^(2s) / kappa
    rule and the Gershgorin bound 2/rho of the generator; the imex
    remainder is judged by its own (much smaller) Gershgorin radius; the
    pure spectral exponential is unconditionally stable.
    """
    if stepper not in STEPPERS:
        raise ValueError(f"unknown stepper {stepper!r}; choose from {STEPPERS}")
    if kernel is None or stepper == "spectral-exponential":
        return np.inf
    gen = collision_generator(kernel, grid)
    if stepper == "explicit-rk2":
        rule = c_stab * grid.dv ** (2.0 * kernel.s) / kernel.kappa
        gersh = gen.gershgorin
        return min(rule, 2.0 / gersh) if gersh > 0 else rule
    if grid.n != 1:
        raise NotImplementedError("exact-exponential steppers are one-dimensional; use explicit-rk2")
    low = collision_generator(_minorant(kernel), grid)
    # remainder weights can be negative beyond the truncation band, so the
    # spectral-radius bound must sum |weights|, not the signed row sums
    wsym = np.abs(_sym_stencil(gen.stencil, grid) - _sym_stencil(low.stencil, grid))
    rows_abs = _conv_batch(np.ones((1,) * grid.n + grid.vshape), wsym, grid)[0]
    top = float(rows_abs.max())
    return 1.0 / top if top > 0 else np.inf


def _dense_generator(gen, grid: PhaseGrid) -> np.ndarray:
    """The symmetric generator as a dense (nv, nv) matrix (n = 1 only)."""
    from scipy.linalg import toeplitz

    col = np.concatenate([[0.0], gen.stencil])
    W = toeplitz(col)
    return W - np.diag(W.sum(axis=1))


def _minorant(kernel: Kernel) -> Kernel:
    """Homogeneous kernel at the coercivity floor coefficient 1/kappa."""
    return Kernel(n=kernel.n, s=kernel.s, kappa=kernel.kappa, family="homogeneous", c=1.0 / kernel.kappa)


@dataclass
class RunConfig:
    """One fully determined integration: grid, kernel, data, stepping plan.

    ``initial`` has shape xshape + vshape; ``source`` is None or a callable
    t -> array of that shape (its L^r size is measured during the run, not
    taken on faith).  The timing contract is rigid: (nt - 1) * record_every
    steps of dt must land exactly on t1.
    """

    grid: PhaseGrid
    kernel: Kernel | None
    initial: np.ndarray
    dt: float
    record_every: int = 1
    stepper: str = "imex"
    source: Callable[[float], np.ndarray] | None = None
    source_r: float = 2.0
    c_stab: float = 0.25
    config_dict: dict | None = None

    def validate(self) -> None:
        g = self.grid
        if self.stepper not in STEPPERS:
            raise ValueError(f"unknown stepper {self.stepper!r}; choose from {STEPPERS}")
        if self.kernel is not None:
            if self.kernel.n != g.n:
                raise ValueError("kernel and grid dimensions differ")
            if self.kernel.family == "modulated":
                raise NotImplementedError(
                    "time stepping supports space-time-constant kernel families only"
                )
            if self.stepper == "spectral-exponential" and self.kernel.family != "homogeneous":
                raise ValueError("the spectral-exponential stepper needs a homogeneous kernel")
            if g.n != 1 and self.stepper in ("spectral-exponential", "imex"):
                raise NotImplementedError(
                    "exact-exponential steppers are one-dimensional; use explicit-rk2"
                )
        shape = g.xshape + g.vshape
        if np.asarray(self.initial).shape != shape:
            raise ValueError(f"initial shape {np.asarray(self.initial).shape} != {shape}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.source_r <= 1:
            raise ValueError("source_r must exceed 1")
        if g.nt > 1:
            steps = (g.nt - 1) * self.record_every
            landing = g.t0 + steps * self.dt
            if abs(landing - g.t1) > 1e-9 * max(1.0, abs(g.t1 - g.t0)):
                raise ValueError(
                    f"timing mismatch: {steps} steps of dt={self.dt} from t0={g.t0} "
                    f"land on {landing}, not t1={g.t1}"
                )
        limit = self.dt_limit
        if self.dt > limit * (1.0 + 1e-12):
            raise ValueError(
                f"dt={self.dt} violates the {self.stepper} stability limit {limit:.6g}"
            )

    # -- prepared operators (built once, reused every step) -----------------

    @cached_property
    def dt_limit(self) -> float:
        return stability_limit(self.kernel, self.grid, self.stepper, self.c_stab)

    @cached_property
    def _half_transport(self) -> np.ndarray:
        """Per-axis free-streaming phases for dt/2, Nyquist row kept real.

        The Nyquist frequency of an even-length real FFT has no conjugate
        partner, so a complex phase there leaks out of the real subspace;
        the hermitian-symmetric treatment replaces e^{-i k v dt/2} by its
        real part on that one row (exact whenever the total shift is a
        whole number of cells).
        """
        g = self.grid
        phase = np.ones(g.xshape + g.vshape, dtype=np.complex128)
        for i in range(g.n):
            kshape = [1] * (2 * g.n)
            kshape[i] = g.nx
            vshape = [1] * (2 * g.n)
            vshape[g.n + i] = g.nv
            theta = -0.5 * self.dt * g.x_freqs.reshape(kshape) * g.v_coords.reshape(vshape)
            fac = np.exp(1j * theta)
            if g.nx % 2 == 0:
                nyq = [slice(None)] * (2 * g.n)
                nyq[i] = g.nx // 2
                fac[tuple(nyq)] = np.cos(np.broadcast_to(theta, fac.shape)[tuple(nyq)])
            phase = phase * fac
        return phase

    @cached_property
    def _generator(self):
        return collision_generator(self.kernel, self.grid)

    @cached_property
    def _wsym(self) -> np.ndarray:
        return _sym_stencil(self._generator.stencil, self.grid)

    @cached_property
    def _remainder(self) -> tuple[np.ndarray, np.ndarray]:
        """(wsym, rowsum) of the explicit imex part: generator minus minorant."""
        low = collision_generator(_minorant(self.kernel), self.grid)
        wsym = self._wsym - _sym_stencil(low.stencil, self.grid)
        rows = self._generator.rowsum - low.rowsum
        return wsym, rows

    def _propagator(self, gen, dt: float) -> np.ndarray:
        """exp(dt M) of a symmetric generator via its eigendecomposition."""
        from scipy.linalg import eigh

        lam, U = eigh(_dense_generator(gen, self.grid))
        return (U * np.exp(dt * lam)) @ U.T

    @cached_property
    def _full_exp(self) -> np.ndarray:
        return self._propagator(self._generator, self.dt)

    @cached_property
    def _full_exp_half(self) -> np.ndarray:
        return self._propagator(self._generator, 0.5 * self.dt)

    @cached_property
    def _low_exp_half(self) -> np.ndarray:
        return self._propagator(collision_generator(_minorant(self.kernel), self.grid), 0.5 * self.dt)

    def source_at(self, t: float) -> np.ndarray | None:
        if self.source is None:
            return None
        a = np.asarray(self.source(t), dtype=np.float64)
        want = self.grid.xshape + self.grid.vshape
        if a.shape != want:
            raise ValueError(f"source shape {a.shape} != {want}")
        return a

    def intrinsic_dict(self) -> dict:
        """Deterministic content summary used when no external config exists."""
        g = self.grid
        d = {
            "grid": [g.n, g.x_period, g.v_halfwidth, g.nx, g.nv, g.t0, g.t1, g.nt],
            "kernel": None
            if self.kernel is None
            else [self.kernel.n, self.kernel.s, self.kernel.kappa, self.kernel.family,
                  self.kernel.c, self.kernel.mod_amplitude, self.kernel.mod_frequency],
            "stepper": self.stepper,
            "dt": self.dt,
            "record_every": self.record_every,
            "source_r": self.source_r,
            "c_stab": self.c_stab,
            "initial_sha": hashlib.sha256(np.ascontiguousarray(self.initial).tobytes()).hexdigest(),
            "source": getattr(self.source, "registry_name", None if self.source is None else "custom"),
        }
        return d


def plan_config(
    grid: PhaseGrid,
    kernel: Kernel | None,
    initial: np.ndarray,
    stepper: str = "imex",
    source=None,
    source_r: float = 2.0,
    c_stab: float = 0.25,
    safety: float = 0.9,
    config_dict: dict | None = None,
) -> RunConfig:
    """Pick (dt, record_every) landing exactly on the grid's time lattice.

    The step count between recordings is the smallest integer that brings
    dt under safety * stability_limit.
    """
    if grid.nt < 2:
        raise ValueError("planning needs nt >= 2")
    span = (grid.t1 - grid.t0) / (grid.nt - 1)
    limit = stability_limit(kernel, grid, stepper, c_stab)
    if np.isinf(limit):
        per = 1
    else:
        per = max(1, int(np.ceil(span / (safety * limit))))
    config = RunConfig(
        grid=grid,
        kernel=kernel,
        initial=np.asarray(initial, dtype=np.float64),
        dt=span / per,
        record_every=per,
        stepper=stepper,
        source=source,
        source_r=source_r,
        c_stab=c_stab,
        config_dict=config_dict,
    )
    config.validate()
    return config


# ---------------------------------------------------------------------------
# stepping


@dataclass
class SolverState:
    """Marching state: values shaped xshape + vshape at time t0 + index*dt."""

    t: float
    values: np.ndarray
    index: int = 0


def _sym_stencil(stencil: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    if grid.n == 1:
        return np.concatenate([stencil[::-1], [0.0], stencil])
    return stencil


def _conv_batch(F: np.ndarray, wsym: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """Convolve the v-axes of a batch of x-slices with a symmetric stencil."""
    n = grid.n
    in2 = wsym.reshape((1,) * n + wsym.shape)
    axes = tuple(range(n, 2 * n))
    return fftconvolve(F, in2, mode="same", axes=axes)


def _transport_half(F: np.ndarray, config: RunConfig) -> np.ndarray:
    g = config.grid
    axes = tuple(range(g.n))
    Fhat = np.fft.fftn(F, axes=axes)
    Fhat *= config._half_transport
    return np.fft.ifftn(Fhat, axes=axes).real


def _collide(F: np.ndarray, t: float, config: RunConfig) -> np.ndarray:
    """Collision + source over one dt, second order in time."""
    dt = config.dt
    g = config.grid
    a_mid = config.source_at(t + 0.5 * dt)
    if config.kernel is None:
        return F if a_mid is None else F + dt * a_mid
    if config.stepper == "spectral-exponential":
        # exact collision integration; the midpoint source rides half of it
        out = F @ config._full_exp
        if a_mid is not None:
            out = out + dt * (a_mid @ config._full_exp_half)
        return out
    if config.stepper == "explicit-rk2":
        wsym, rows = config._wsym, config._generator.rowsum
        a0 = config.source_at(t)
        a1 = config.source_at(t + dt)
        k1 = _conv_batch(F, wsym, g) - F * rows
        if a0 is not None:
            k1 = k1 + a0
        F1 = F + dt * k1
        k2 = _conv_batch(F1, wsym, g) - F1 * rows
        if a1 is not None:
            k2 = k2 + a1
        return F + 0.5 * dt * (k1 + k2)
    # imex: exact exponential of the minorant around an RK2 remainder step
    wsym, rows = config._remainder
    F1 = F @ config._low_exp_half
    k1 = _conv_batch(F1, wsym, g) - F1 * rows
    if a_mid is not None:
        k1 = k1 + a_mid
    F2 = F1 + dt * k1
    k2 = _conv_batch(F2, wsym, g) - F2 * rows
    if a_mid is not None:
        k2 = k2 + a_mid
    F3 = F1 + 0.5 * dt * (k1 + k2)
    return F3 @ config._low_exp_half


def step(state: SolverState, config: RunConfig) -> SolverState:
    """One Strang step: half transport, collision + source, half transport."""
    if config.dt > config.dt_limit * (1.0 + 1e-12):
        raise ValueError(
            f"CFL violation at t={state.t}: dt={config.dt} exceeds limit {config.dt_limit:.6g}"
        )
    F = _transport_half(state.values, config)
    F = _collide(F, state.t, config)
    F = _transport_half(F, config)
    if not np.all(np.isfinite(F)):
        raise ValueError(f"non-finite state after the step starting at t={state.t}")
    return SolverState(t=state.t + config.dt, values=F, index=state.index + 1)


def _batch_margin(grid: PhaseGrid, F: np.ndarray) -> float:
    profile = np.abs(F).max(axis=tuple(range(grid.n))) if grid.n < F.ndim else np.abs(F)
    return _support_margin(grid, profile)


def _log_row(state: SolverState, config: RunConfig) -> tuple:
    g = config.grid
    F = state.values
    mass = float(F.sum() * g.cell_x * g.cell_v)
    l2 = float(np.sqrt((F**2).sum() * g.cell_x * g.cell_v))
    margin = _batch_margin(g, F)
    if config.kernel is None:
        tail = 0.0
    else:
        tail = _tail_bound(config.kernel, max(margin, 0.5 * g.dv), float(np.abs(F).max()))
    cfl = config.dt_limit / config.dt
    return (state.index, state.t, cfl, tail, mass, l2)


@dataclass
class Trajectory:
    """Recorded run: field snapshots, per-step log, and provenance meta."""

    fields: Field
    stepper_log: list
    meta: dict = _field(default_factory=dict)

    def save(self, path) -> None:
        path = Path(path)
        save_field(self.fields, path)
        write_stepper_log(self, path.with_name(path.stem + "_log.csv"))
        path.with_name(path.stem + "_meta.json").write_text(
            json.dumps(self.meta, indent=2, sort_keys=True, default=str)
        )


def write_stepper_log(trajectory: Trajectory, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LOG_COLUMNS)
        w.writerows(trajectory.stepper_log)
    return path


def run(config: RunConfig) -> Trajectory:
    """Integrate from t0 to t1, recording the grid's nt time slices.

    Deterministic: no randomness enters the stepping, so identical configs
    give bit-identical trajectories.  Errors during a step propagate with
    the failing time attached.
    """
    config.validate()
    g = config.grid
    F = np.asarray(config.initial, dtype=np.float64).copy()
    if not np.all(np.isfinite(F)):
        raise ValueError("initial data contains non-finite samples")
    data = np.empty(g.shape)
    data[0] = F
    state = SolverState(t=g.t0, values=F, index=0)
    log = [_log_row(state, config)]
    lr_acc = 0.0
    r = config.source_r
    for rec in range(1, g.nt):
        for _ in range(config.record_every):
            if config.source is not None:
                a_mid = config.source_at(state.t + 0.5 * config.dt)
                lr_acc += config.dt * float(np.sum(np.abs(a_mid) ** r)) * g.cell_x * g.cell_v
            state = step(state, config)
            log.append(_log_row(state, config))
        data[rec] = state.values
    meta = {
        "stepper": config.stepper,
        "dt": config.dt,
        "record_every": config.record_every,
        "steps": state.index,
        "source_lr_norm": lr_acc ** (1.0 / r) if config.source is not None else 0.0,
        "source_r": r,
        "config_hash": config_hash(
            config.config_dict if config.config_dict is not None else config.intrinsic_dict()
        ),
    }
    fmeta = {}
    if config.kernel is not None:
        fmeta = {"s": config.kernel.s, "kappa": config.kernel.kappa}
    return Trajectory(fields=Field(g, data, fmeta), stepper_log=log, meta=meta)


# ---------------------------------------------------------------------------
# weak-form residual


def weak_residual(trajectory, kernel: Kernel | None, source, testfn) -> float:
    """|-(f, (dt + v.grad_x) phi) + int B(f, phi) - (a, phi)| by quadrature.

    ``testfn(t, x..., v...)`` must vanish near the time endpoints and near
    the v-box boundary (compact support in the open domain); x is periodic
    so no restriction applies there.  The collision form is the in-box
    pair form, evaluated through the generator duality <phi, M f> = -B.
    """
    field = trajectory.fields if isinstance(trajectory, Trajectory) else trajectory
    g = field.grid
    if g.nt < 3:
        raise ValueError("weak residual needs at least 3 recorded slices")
    t, xs, vs = g.field_coords()
    phi = np.broadcast_to(np.asarray(testfn(t, *xs, *vs), dtype=np.float64), g.shape)
    dt_phi = np.gradient(phi, g.times, axis=0, edge_order=2)
    vgrad = np.zeros(g.shape)
    for i in range(g.n):
        axis = 1 + i
        k = g.x_freqs.reshape([-1 if j == axis else 1 for j in range(len(g.shape))])
        dphi = np.fft.ifft(1j * k * np.fft.fft(phi, axis=axis), axis=axis).real
        vgrad = vgrad + vs[i] * dphi
    cells = g.cell_x * g.cell_v
    wt = g.t_weights
    transport = -float(np.einsum("t,t->", wt, (field.data * (dt_phi + vgrad)).sum(axis=tuple(range(1, field.data.ndim)))) * cells)
    collision = 0.0
    if kernel is not None:
        gen = collision_generator(kernel, g)
        wsym = _sym_stencil(gen.stencil, g)
        flat = field.data.reshape((g.nt * g.nx**g.n,) + g.vshape)
        Mf = fftconvolve(flat, wsym.reshape((1,) + wsym.shape), mode="same", axes=tuple(range(1, 1 + g.n)))
        Mf = Mf - flat * gen.rowsum
        Mf = Mf.reshape(g.shape)
        per_t = (phi * Mf).sum(axis=tuple(range(1, field.data.ndim)))
        collision = -float(np.einsum("t,t->", wt, per_t) * cells)
    src = 0.0
    if source is not None:
        per_t = np.empty(g.nt)
        for it, tt in enumerate(g.times):
            per_t[it] = (np.asarray(source(tt)) * phi[it]).sum()
        src = -float(np.einsum("t,t->", wt, per_t) * cells)
    return abs(transport + collision + src)
