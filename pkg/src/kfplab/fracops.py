"""Fourier-multiplier operators and mollification on the velocity lattice.

Multipliers act on single velocity slices of shape ``grid.vshape``, treating
the slice as periodic on the box of width ``2 * v_halfwidth``.  Two families
are provided: ``lambda_pow`` with symbol |xi|^sigma and ``bessel_pow`` with
symbol (1 + |xi|^2)^(sigma/2).  For ``lambda_pow`` with sigma < 0 the zero
mode has no finite symbol value; it is dropped, so the operator acts on the
mean-free part and annihilates constants.  Wherever an inverse-smoothing
operator is needed, prefer the Bessel family, which is invertible.

Mollification is discrete circular convolution with a sampled quartic bump
(1 - |u|^2)^4 rescaled to radius epsilon.  The sampled weights are
renormalized to unit sum, so constants and total mass are preserved exactly
rather than to quadrature accuracy.  ``mollifier_rate`` fits the decay of
the L2 mollification error against epsilon and reports it together with the
error-to-epsilon^s ratio, which is the shape of the standard
approximation-to-identity bound in the order-s velocity Sobolev norm.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .phase import PhaseGrid, _support_margin, hs_norm_v

_KINDS = ("lambda_pow", "bessel_pow")
_SIGMA_CAP = 4.0


@dataclass(frozen=True)
class MultiplierOp:
    """Fourier multiplier m(xi) on velocity slices.

    kind "lambda_pow" has m(xi) = |xi|^sigma, kind "bessel_pow" has
    m(xi) = (1 + |xi|^2)^(sigma/2).  Exponents are capped at |sigma| <= 4.
    """

    grid: PhaseGrid
    kind: str
    sigma: float

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown multiplier kind {self.kind!r}")
        if not np.isfinite(self.sigma) or abs(self.sigma) > _SIGMA_CAP:
            raise ValueError(f"sigma must be finite with |sigma| <= {_SIGMA_CAP}")

    @cached_property
    def symbol(self) -> np.ndarray:
        freqs = np.meshgrid(*([self.grid.v_freqs] * self.grid.n), indexing="ij")
        xi2 = sum(c**2 for c in freqs)
        if self.kind == "bessel_pow":
            return (1.0 + xi2) ** (self.sigma / 2.0)
        m = np.zeros_like(xi2)
        nz = xi2 > 0
        m[nz] = xi2[nz] ** (self.sigma / 2.0)
        if self.sigma == 0.0:
            m[~nz] = 1.0
        # sigma < 0 leaves the zero mode at 0: constants are annihilated
        return m

    def apply(self, vslice: np.ndarray) -> np.ndarray:
        f = np.asarray(vslice)
        if f.shape != self.grid.vshape:
            raise ValueError(f"expected slice of shape {self.grid.vshape}, got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("slice contains non-finite values")
        out = np.fft.ifftn(self.symbol * np.fft.fftn(f))
        return out.real if np.isrealobj(f) else out


def lambda_pow(grid: PhaseGrid, sigma: float) -> MultiplierOp:
    """Homogeneous multiplier |xi|^sigma."""
    return MultiplierOp(grid, "lambda_pow", float(sigma))


def bessel_pow(grid: PhaseGrid, sigma: float) -> MultiplierOp:
    """Inhomogeneous multiplier (1 + |xi|^2)^(sigma/2)."""
    return MultiplierOp(grid, "bessel_pow", float(sigma))


def apply_multiplier(op: MultiplierOp, vslice: np.ndarray) -> np.ndarray:
    return op.apply(vslice)


# ---------------------------------------------------------------------------
# mollifier


def mollifier_normalization(n: int) -> float:
    """1 / integral of (1 - |u|^2)^4 over the unit ball in dimension n."""
    if n == 1:
        return 315.0 / 256.0
    if n == 2:
        return 5.0 / np.pi
    raise ValueError("only n = 1 and n = 2 are supported")


@dataclass(frozen=True)
class Mollifier:
    """Sampled quartic bump of radius epsilon on the velocity lattice.

    The weights live in FFT layout (offset zero at index zero) and sum to
    one exactly, which makes the induced convolution preserve constants and
    total mass to rounding.
    """

    grid: PhaseGrid
    epsilon: float

    def __post_init__(self):
        eps = self.epsilon
        if not np.isfinite(eps) or eps < 2.0 * self.grid.cell_v:
            raise ValueError("epsilon must be at least two lattice cells wide")
        if eps > self.grid.v_halfwidth / 2.0:
            raise ValueError("epsilon must not exceed half the box halfwidth")

    @cached_property
    def weights(self) -> np.ndarray:
        nv, dv = self.grid.nv, self.grid.cell_v
        offs = dv * np.fft.fftfreq(nv, 1.0 / nv)  # wraparound lattice offsets
        axes = np.meshgrid(*([offs] * self.grid.n), indexing="ij")
        r2 = sum(c**2 for c in axes)
        w = np.clip(1.0 - r2 / self.epsilon**2, 0.0, None) ** 4
        return w / w.sum()

    @cached_property
    def weights_hat(self) -> np.ndarray:
        return np.fft.fftn(self.weights)


def mollify(vslice: np.ndarray, mol: Mollifier) -> np.ndarray:
    """Circular convolution of a velocity slice with the sampled bump.

    Warns when the essential support of the slice comes within epsilon of
    the box boundary, where the wraparound convolution no longer matches
    convolution over the whole line.
    """
    f = np.asarray(vslice)
    grid = mol.grid
    if f.shape != grid.vshape:
        raise ValueError(f"expected slice of shape {grid.vshape}, got {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError("slice contains non-finite values")
    if _support_margin(grid, f) < mol.epsilon:
        warnings.warn("mollify: support within epsilon of the v-box boundary, wraparound in effect")
    out = np.fft.ifftn(mol.weights_hat * np.fft.fftn(f))
    return out.real if np.isrealobj(f) else out


# ---------------------------------------------------------------------------
# approximation rate


@dataclass(frozen=True)
class MollifierRateReport:
    """Least-squares fit of log error against log epsilon."""

    rate: float
    max_ratio: float
    hs_norm: float
    epsilons: tuple
    errors: tuple


def mollifier_rate(grid: PhaseGrid, vslice: np.ndarray, s: float, eps_list) -> MollifierRateReport:
    """Fit the L2 mollification-error decay rate over an epsilon ladder.

    Requires at least four ladder points spanning a decade.  Reports the
    fitted slope, the norm in the order-s velocity Sobolev class, and the
    largest error / (epsilon^s * norm) ratio over the ladder.
    """
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0, 1)")
    eps = np.asarray(sorted(float(e) for e in eps_list))
    if eps.size < 4:
        raise ValueError("need at least 4 ladder points")
    if eps.min() <= 0 or eps.max() / eps.min() < 10.0:
        raise ValueError("ladder must span at least one decade")
    f = np.asarray(vslice, dtype=float)
    errs = []
    for e in eps:
        diff = f - mollify(f, Mollifier(grid, e))
        errs.append(float(np.sqrt(np.sum(diff**2) * grid.cell_v)))
    errs = np.asarray(errs)
    rate, _ = np.polyfit(np.log(eps), np.log(errs), 1)
    hs = hs_norm_v(grid, f, s)
    max_ratio = float(np.max(errs / (eps**s * hs)))
    return MollifierRateReport(float(rate), max_ratio, hs, tuple(eps), tuple(errs))


def synthesize_critical_tail(grid: PhaseGrid, s: float, seed: int = 0) -> np.ndarray:
    """Real slice whose Fourier modulus is exactly (1+|xi|^2)^(-(s+n/2+0.01)/2).

    The exponent puts the slice just inside the order-s velocity Sobolev
    class, so mollification should lose mass at rate close to epsilon^s.
    Phases are seeded; the zero and Nyquist modes are kept real.  Only
    one-dimensional grids are supported.
    """
    if grid.n != 1:
        raise ValueError("critical-tail synthesis is one-dimensional only")
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0, 1)")
    nv, dv = grid.nv, grid.cell_v
    xi = 2 * np.pi * np.fft.rfftfreq(nv, d=dv)
    modulus = (1.0 + xi**2) ** (-(s + grid.n / 2.0 + 0.01) / 2.0)
    rng = np.random.default_rng(seed)
    phases = np.exp(2j * np.pi * rng.random(xi.size))
    phases[0] = 1.0
    if nv % 2 == 0:
        phases[-1] = 1.0
    return np.fft.irfft(modulus * phases, n=nv) / dv
