import numpy as np
import pytest

from kfplab.phase import make_grid


@pytest.fixture(scope="session")
def grid1d():
    """Workhorse 1-D grid: torus 2*pi, v-box [-8, 8), 64 x 256 cells."""
    return make_grid(1, 2 * np.pi, 8.0, 64, 256, -2.0, 0.0, 17)


@pytest.fixture(scope="session")
def grid1d_fine():
    return make_grid(1, 2 * np.pi, 8.0, 128, 512, -2.0, 0.0, 33)


@pytest.fixture(scope="session")
def vgrid():
    """Single-slice grid used for pure velocity-space tests."""
    return make_grid(1, 2 * np.pi, 8.0, 4, 256, 0.0, 0.0, 1)


@pytest.fixture(scope="session")
def vgrid_fine():
    return make_grid(1, 2 * np.pi, 8.0, 4, 512, 0.0, 0.0, 1)


def gaussian_bump(v, center=0.0, width=1.0):
    return np.exp(-((v - center) ** 2) / (2 * width**2))


def smooth_bump(v, center=0.0, radius=1.0):
    """C^inf-looking compact bump: exp(-1/(1-u^2)) profile, zero outside."""
    u = (v - center) / radius
    out = np.zeros_like(np.asarray(u, dtype=float))
    inside = np.abs(u) < 1.0
    with np.errstate(divide="ignore", over="ignore"):
        out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out
