import numpy as np
import pytest

from megsplines.headmodel import default_three_shell
from megsplines.synthlab import synthetic_meg_sensors


def random_units(rng, count):
    v = rng.normal(size=(count, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def ball_quadrature(R, n_r=30, n_theta=30, n_phi=60):
    """Tensor Gauss-Legendre (radius, cos theta) x trapezoid (phi) rule on a ball."""
    xr, wr = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * R * (xr + 1)
    wr = 0.5 * R * wr * r**2
    ct, wt = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1 - ct**2)
    d = np.stack([st[:, None] * np.cos(phi)[None, :], st[:, None] * np.sin(phi)[None, :],
                  np.repeat(ct[:, None], n_phi, axis=1)], axis=-1).reshape(-1, 3)
    wd = np.repeat(wt, n_phi) * (2 * np.pi / n_phi)
    x = (r[:, None, None] * d[None, :, :]).reshape(-1, 3)
    w = (wr[:, None] * wd[None, :]).ravel()
    return x, w


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def model():
    return default_three_shell()


@pytest.fixture(scope="session")
def meg40():
    return synthetic_meg_sensors(40)


# one line per acceptance criterion, printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
