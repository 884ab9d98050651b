import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.spatial.transform import Rotation

from megsplines.assembly import meg_gram, scalar_meg_weights
from megsplines.fieldeval import SphereGrid, scalar_to_current
from megsplines.forward import meg_design_matrix, scalar_meg_design_matrix
from megsplines.headmodel import MU0, default_three_shell
from megsplines.kernels import make_symbol, scalar_kernel_series
from megsplines.synthlab import (STENCIL_D2_ORDER8, NoiseSpec, QMCConfig, TestCase, add_noise,
                                 exact_current_for_case, fd_laplacian, fornberg_weights,
                                 generate_data, golden_gamma, integral_oracle_block,
                                 integral_oracle_entry, kernel_grad_km, kernel_grad_km_generic,
                                 kernel_grad_km_series, kernel_laplace_closed, kronecker,
                                 map_to_ball, onb_current_coefficient, qmc_ball_integrate,
                                 synthetic_eeg_sensors, synthetic_meg_sensors)

from conftest import random_units

RHO0 = 0.071


@pytest.fixture(scope="module")
def model():
    return default_three_shell()


@pytest.fixture(scope="module")
def sens40():
    return synthetic_meg_sensors(40)


# --- Kronecker sequence and QMC -------------------------------------------

def test_golden_gamma():
    mpmath = pytest.importorskip("mpmath")
    assert 1 / golden_gamma(1)[0] == pytest.approx((1 + 5**0.5) / 2, rel=1e-15)
    for d in (2, 3, 6):
        phi = 1 / golden_gamma(d)[0]
        ref = float(mpmath.findroot(lambda x: x ** (d + 1) - x - 1, 1.5))
        assert phi == pytest.approx(ref, rel=1e-15)
        assert abs(phi ** (d + 1) - phi - 1) <= 1e-14
        g = golden_gamma(d)
        assert g.shape == (d,) and np.all((g > 0) & (g < 1))
        assert_allclose(g, phi ** -np.arange(1, d + 1.0), rtol=1e-14)
    with pytest.raises(ValueError):
        golden_gamma(0)


def test_kronecker_blocks_match_single_sequence():
    cfg = QMCConfig(1000, 3, block_size=300)
    joined = np.vstack(list(cfg.blocks()))
    assert_allclose(joined, kronecker(1000, cfg.gamma), rtol=0, atol=0)
    assert np.all((joined >= 0) & (joined < 1))


def test_map_to_ball_inside():
    u = kronecker(5000, golden_gamma(3))
    p = map_to_ball(u, RHO0)
    assert np.all(np.linalg.norm(p, axis=1) <= RHO0)


def test_qmc_moments():
    vol = 4 * np.pi * RHO0**3 / 3
    one = qmc_ball_integrate(lambda p: np.ones(len(p)), RHO0, QMCConfig(100_000))
    assert one == pytest.approx(vol, rel=1e-6)
    odd = qmc_ball_integrate(lambda p: p[:, 0], RHO0, QMCConfig(100_000))
    assert abs(odd) <= 5e-3 * RHO0 * vol
    exact = 4 * np.pi * RHO0**5 / 5
    sq = lambda p: np.sum(p * p, axis=1)  # noqa: E731
    big = qmc_ball_integrate(sq, RHO0, QMCConfig(1_000_000))
    assert big == pytest.approx(exact, rel=5e-3)


def test_qmc_error_decay():
    exact = 4 * np.pi * RHO0**5 / 5
    sq = lambda p: np.sum(p * p, axis=1)  # noqa: E731
    counts = np.array([10_000, 30_000, 100_000, 300_000, 1_000_000])
    err = np.array([abs(qmc_ball_integrate(sq, RHO0, QMCConfig(int(n))) / exact - 1)
                    for n in counts])
    slope = np.polyfit(np.log(counts), np.log(err), 1)[0]
    assert slope < -0.8


def test_qmc_independent_of_blocking():
    sq = lambda p: np.sum(p * p, axis=1)  # noqa: E731
    a = qmc_ball_integrate(sq, RHO0, QMCConfig(50_000, block_size=50_000))
    b = qmc_ball_integrate(sq, RHO0, QMCConfig(50_000, block_size=7_000))
    assert a == pytest.approx(b, rel=1e-13)


# --- finite differences ---------------------------------------------------

def test_frozen_stencil_is_fornberg():
    w = fornberg_weights(0.0, np.arange(-4, 5), 2)[2]
    assert_allclose(STENCIL_D2_ORDER8, w, rtol=1e-12, atol=1e-14)
    assert abs(STENCIL_D2_ORDER8.sum()) < 1e-13


def test_fd_exact_cases():
    x = np.array([[0.01, -0.02, 0.03], [0.0, 0.0, 0.0]])
    h = 1e-3 * RHO0
    assert_allclose(fd_laplacian(lambda p: p[:, 0] ** 2, x, h), 2.0, atol=1e-10)
    assert_allclose(fd_laplacian(lambda p: np.sum(p * p, axis=1), x, h), 6.0, atol=1e-9)
    assert fd_laplacian(lambda p: p[:, 2] ** 2, x[1], h) == pytest.approx(2.0, abs=1e-10)


@pytest.mark.parametrize("deg", range(2, 10))
def test_fd_exact_on_polynomials(deg):
    x = np.array([[0.3, -0.2, 0.5]])
    f = lambda p: p[:, 0] ** deg + 2 * p[:, 1] ** deg - p[:, 2] ** deg  # noqa: E731
    want = deg * (deg - 1) * (x[:, 0] ** (deg - 2) + 2 * x[:, 1] ** (deg - 2)
                              - x[:, 2] ** (deg - 2))
    assert_allclose(fd_laplacian(f, x, 0.1), want, rtol=1e-9, atol=1e-9)


def test_fd_convergence_order():
    x = np.array([[0.4, 0.1, -0.3]])
    f = lambda p: np.sin(p[:, 0])  # noqa: E731
    exact = -np.sin(0.4)
    steps = np.array([0.4, 0.2, 0.1])
    err = np.array([abs(fd_laplacian(f, x, s)[0] - exact) for s in steps])
    orders = np.log2(err[:-1] / err[1:])
    assert np.all(orders >= 7.5)


def test_fd_domain_guard():
    with pytest.raises(ValueError, match="domain radius"):
        fd_laplacian(lambda p: p[:, 0], np.array([[0.0, 0.0, 0.07]]), 0.01, domain_radius=0.08)


# --- closed-form kernels --------------------------------------------------

def test_closed_laplacian_against_fd(rng):
    h = 0.8
    sym = make_symbol("data-gen-scalar", h, 300)
    for _ in range(5):
        x = random_units(rng, 1)[0] * RHO0 * rng.uniform(0.2, 0.8)
        z = random_units(rng, 1)[0] * RHO0 * rng.uniform(0.2, 0.8)

        def f(p):
            return np.linalg.norm(p, axis=1) * scalar_kernel_series(sym, RHO0, x[None], p)

        fd = fd_laplacian(f, z[None], 0.01 * RHO0)[0]
        assert kernel_laplace_closed(h, RHO0, x, z) == pytest.approx(fd, rel=1e-6)
    assert kernel_laplace_closed(h, RHO0, np.zeros(3), np.array([0, 0, 0.05])) == 0.0


def test_closed_laplacian_rotation_invariant(rng):
    x = np.array([0.02, -0.01, 0.04])
    z = np.array([-0.03, 0.02, 0.01])
    base = kernel_laplace_closed(0.8, RHO0, x, z)
    for R in Rotation.random(20, random_state=7):
        assert kernel_laplace_closed(0.8, RHO0, R.apply(x), R.apply(z)) == pytest.approx(
            base, rel=1e-12)


def test_grad_km_against_series(rng):
    y = random_units(rng, 200) * 0.11
    x = random_units(rng, 200) * rng.uniform(0.001, 0.07, (200, 1))
    want = kernel_grad_km_series(x, y, terms=200)
    assert_allclose(kernel_grad_km(x, y), want, rtol=1e-8, atol=1e-10 * np.abs(want).max())
    generic = kernel_grad_km_generic(x, y)
    assert_allclose(generic, want, rtol=1e-6, atol=1e-8 * np.abs(want).max())


def test_grad_km_collinear_limits():
    e = np.array([0.0, 0.0, 1.0])
    r, s = 0.05, 0.11
    assert_allclose(kernel_grad_km(r * e, s * e), (1 / s**2 - 1 / (s * (s - r))) * e,
                    rtol=1e-12)
    assert_allclose(kernel_grad_km(-r * e, s * e), (1 / s**2 - 1 / (s * (s + r))) * e,
                    rtol=1e-12)
    limit = kernel_grad_km(r * e, s * e)
    scale = np.linalg.norm(limit)
    for ang in (1e-3, 1e-5, 1e-7):
        x = r * np.array([np.sin(ang), 0.0, np.cos(ang)])
        # the field itself moves by O(ang) off the axis
        assert np.linalg.norm(kernel_grad_km(x, s * e) - limit) <= max(1e-6, ang) * scale
    x = r * np.array([np.sin(1e-5), 0.0, np.cos(1e-5)])
    assert np.linalg.norm(kernel_grad_km_generic(x, s * e) - limit) <= 1e-5 * scale
    with pytest.raises(ValueError):
        kernel_grad_km(0.12 * e, s * e)


# --- integral oracle and data ---------------------------------------------

def test_oracle_symmetry_and_mu0_scaling(sens40):
    q = QMCConfig(100_000, 6)
    blk, diag = integral_oracle_block(sens40, [2, 17], [2, 17], 0.8, RHO0, qmc=q)
    assert abs(blk[0, 1] - blk[1, 0]) <= 0.02 * abs(blk[0, 1])
    half = integral_oracle_entry(sens40, 2, 17, 0.8, RHO0, MU0 / 2, q)
    assert half == pytest.approx(blk[0, 1] / 4, rel=1e-13)
    assert not diag["budget_flag"]
    _, small = integral_oracle_block(sens40, [0], [0], 0.8, RHO0, qmc=QMCConfig(1000, 6))
    assert small["budget_flag"]
    with pytest.raises(ValueError, match="paper_scale"):
        integral_oracle_block(sens40, [0], [0], 0.8, RHO0, qmc=QMCConfig(2_000_000, 6))


def test_spline_combo_data_routes(sens40, model):
    case = TestCase(nodes=(5, 30), weights=(1.0, -0.5))
    g, prov = generate_data(case, sens40, model)
    rows = meg_gram(sens40, scalar_meg_weights(case.data_symbol), RHO0, MU0**2 / RHO0**3)
    assert_allclose(g, rows[5] - 0.5 * rows[30], rtol=1e-12, atol=1e-14 * np.abs(g).max())
    assert prov["route"] == "svd-series"
    go, po = generate_data(case, sens40, model, route="integral-oracle",
                           qmc=QMCConfig(100_000, 6))
    assert po["points"] == 100_000
    assert np.linalg.norm(go - g) / np.linalg.norm(g) <= 0.02


def test_onb_mode_data_routes(sens40, model):
    case = TestCase(kind="onb-mode", amplitude=0.1, mode=(3, 6))
    g, _ = generate_data(case, sens40, model)
    col = scalar_meg_design_matrix(sens40, RHO0, 3)[:, 3 * 3 + 6 - 2]
    assert_allclose(g, 0.1 * col, rtol=1e-14)
    go, _ = generate_data(case, sens40, model, route="integral-oracle", qmc=QMCConfig(100_000))
    assert np.linalg.norm(go - g) / np.linalg.norm(g) <= 0.02
    zero, _ = generate_data(TestCase(kind="onb-mode", amplitude=0.0), sens40, model)
    assert np.all(zero == 0)


def test_data_guards(sens40, model):
    eeg = synthetic_eeg_sensors(model, 10)
    with pytest.raises(ValueError):
        generate_data(TestCase(), eeg, model)
    with pytest.raises(ValueError):
        generate_data(TestCase(), sens40, model, route="magic")
    with pytest.raises(ValueError):
        generate_data(TestCase(nodes=(0, 99)), sens40, model)
    with pytest.raises(ValueError):
        TestCase(kind="onb-mode", mode=(3, 9))
    with pytest.raises(ValueError):
        TestCase(nodes=(1, 2, 3))


def test_current_transfer_preserves_meg_data(sens40):
    N = 12
    S = scalar_meg_design_matrix(sens40, RHO0, N)
    V = meg_design_matrix(sens40, RHO0, N)
    n = np.repeat(np.arange(1, N + 1), 2 * np.arange(1, N + 1) + 1)
    assert_allclose(V * onb_current_coefficient(n, RHO0), S, rtol=1e-12,
                    atol=1e-14 * np.abs(S).max())


def test_exact_currents(sens40, model):
    grid = SphereGrid.equiangular(0.99 * RHO0, 9, 12)
    onb = exact_current_for_case(TestCase(kind="onb-mode"), sens40, grid, model)
    radial = np.einsum("pa,pa->p", onb.values, grid.nodes)
    assert np.abs(radial).max() <= 1e-12 * np.abs(onb.values).max()
    zero = exact_current_for_case(TestCase(kind="onb-mode", amplitude=0.0), sens40, grid, model)
    assert np.all(zero.values == 0)
    case = TestCase(nodes=(5, 30), weights=(1.0, 1.0))
    combo = exact_current_for_case(case, sens40, grid, model)
    alpha = np.zeros(40)
    alpha[[5, 30]] = 1.0
    direct = scalar_to_current(alpha, sens40, case.data_symbol, grid, RHO0)
    assert np.array_equal(combo.values, direct.values)
    assert case.data_symbol.kind == "data-gen-scalar"


# --- noise ----------------------------------------------------------------

def test_noise_basics(rng):
    g = rng.normal(size=1000)
    same, nn = add_noise(g, NoiseSpec(0.0, 1))
    assert np.array_equal(same, g) and nn == 0.0
    a, na = add_noise(g, NoiseSpec(5.0, 11))
    b, nb = add_noise(g, NoiseSpec(5.0, 11))
    assert np.array_equal(a, b) and na == nb
    assert 0.045 <= na / np.linalg.norm(g) <= 0.055
    assert na == pytest.approx(np.linalg.norm(a - g), rel=1e-15)
    with pytest.raises(ValueError):
        NoiseSpec(-1.0)


def test_noise_unbiased(rng):
    g = rng.normal(size=100)
    ratios = [add_noise(g, NoiseSpec(5.0, s))[1] for s in range(1000)]
    assert np.mean(ratios) / np.linalg.norm(g) == pytest.approx(0.05, rel=0.02)


# --- layouts --------------------------------------------------------------

def test_synthetic_layouts(model):
    m = synthetic_meg_sensors(100)
    assert m.count == 100
    assert_allclose(m.radii, 0.115)
    assert_allclose(np.sum(m.normals * m.directions, axis=1), 1.0)
    theta = np.degrees(np.arccos(m.directions[:, 2]))
    assert theta.max() <= 110.0
    phi = np.degrees(np.arctan2(m.directions[:, 1], m.directions[:, 0]))
    assert not np.any((np.abs(phi) < 40) & (theta > 60))
    e = synthetic_eeg_sensors(model, 70, max_colatitude_deg=120.0)
    assert e.count == 70 and e.modality == "EEG"
    assert_allclose(e.radii, model.rhoL)
