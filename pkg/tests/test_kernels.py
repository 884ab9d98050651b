import mpmath
import numpy as np
import pytest
from numpy.testing import assert_allclose

from megsplines.headmodel import default_three_shell
from megsplines.kernels import (custom_symbol, make_symbol, scalar_kernel,
                                scalar_kernel_closed, scalar_kernel_series, sobolev_norm,
                                summability_check, tensor_kernel, tensor_kernel_bound)
from megsplines.specfun import BasisIndex, onb_ball

from conftest import random_units

RHO0 = 0.071


def ball_points(rng, count, R=RHO0, lo=0.0):
    return random_units(rng, count) * R * rng.uniform(lo, 1, (count, 1)) ** (1 / 3)


def test_symbol_values():
    s = make_symbol("scalar-meg", 0.85, 200)
    assert s.kappa_inv_sq[1] == pytest.approx(0.85)
    assert s.kappa_inv_sq[0] == 0.0
    assert s.kappa_inv_sq.size == 201
    d = make_symbol("data-gen-scalar", 0.8, 500)
    assert d.kappa_inv_sq[0] == pytest.approx(0.8**2 / 5)
    assert d.kappa_inv_sq[0] == pytest.approx(0.128)
    e = make_symbol("data-gen-eeg", 0.7, 10)
    assert_allclose(e.kappa_inv_sq, np.arange(11) * 0.7 ** np.arange(11))
    for kind in ("vector-i2", "vector-i3"):
        v = make_symbol(kind, 0.85**6, 50)
        assert v.kappa_inv_sq[0] == 0.0
        assert_allclose(v.kappa_inv_sq[1:], 0.85 ** (6 * np.arange(1, 51)))
    assert np.all(np.isfinite(d.kappa_inv_sq)) and np.all(d.kappa_inv_sq >= 0)


@pytest.mark.parametrize("h,N", [(0.0, 10), (1.0, 10), (0.5, 0), (0.5, 2.5)])
def test_symbol_rejects_bad_input(h, N):
    with pytest.raises(ValueError):
        make_symbol("scalar-meg", h, N)


def test_symbol_rejects_unknown_kind():
    with pytest.raises(ValueError):
        make_symbol("mystery", 0.5, 10)


def test_custom_symbol_zeroes_degree_zero():
    s = custom_symbol([5.0, 1.0, 0.5])
    assert s.kappa_inv_sq[0] == 0 and s.N == 2


def test_scalar_kernel_series_matches_closed_form(rng):
    sym = make_symbol("data-gen-scalar", 0.8, 500)
    x, z = ball_points(rng, 1000), ball_points(rng, 1000)
    a = scalar_kernel(sym, RHO0, x, z, "series")
    b = scalar_kernel(sym, RHO0, x, z, "closed")
    assert_allclose(a, b, rtol=1e-10)


def test_scalar_kernel_on_axis_against_mpmath():
    h = mpmath.mpf("0.8")
    rho0 = mpmath.mpf("0.071")
    r = mpmath.mpf("0.05")
    series = mpmath.nsum(lambda n: h ** (2 * n + 2) * (r * r / rho0**2) ** (n + 1),
                         [0, mpmath.inf]) / (4 * mpmath.pi * rho0**3)
    x = np.array([0.0, 0.0, 0.05])
    assert_allclose(scalar_kernel_closed(0.8, RHO0, x, x), float(series), rtol=1e-13)
    sym = make_symbol("data-gen-scalar", 0.8, 500)
    assert_allclose(scalar_kernel_series(sym, RHO0, x, x), float(series), rtol=1e-10)


def test_scalar_kernel_symmetry_and_origin(rng):
    sym = make_symbol("data-gen-scalar", 0.8, 500)
    x, z = ball_points(rng, 100), ball_points(rng, 100)
    assert_allclose(scalar_kernel(sym, RHO0, x, z), scalar_kernel(sym, RHO0, z, x), rtol=1e-12)
    assert scalar_kernel(sym, RHO0, np.zeros(3), z[0]) == 0.0
    assert scalar_kernel_closed(0.8, RHO0, np.zeros(3), z[0]) == 0.0


def test_scalar_kernel_errors(rng):
    sym = make_symbol("scalar-meg", 0.8, 50)
    with pytest.raises(ValueError):
        scalar_kernel(sym, RHO0, np.zeros(3), np.array([0, 0, 0.08]))
    with pytest.raises(ValueError):
        scalar_kernel(sym, RHO0, np.zeros(3), np.zeros(3), method="closed")


def _brute_tensor(symbol, i, x, y):
    out = np.zeros((x.shape[0], 3, 3))
    for n in range(1, symbol.N + 1):
        for j in range(1, 2 * n + 2):
            gx = onb_ball(BasisIndex(i, 0, n, j), RHO0, x)
            gy = onb_ball(BasisIndex(i, 0, n, j), RHO0, y)
            out += symbol.kappa_inv_sq[n] * gx[:, :, None] * gy[:, None, :]
    return out


@pytest.mark.parametrize("kind,i", [("vector-i3", 3), ("vector-i2", 2)])
def test_tensor_kernel_against_order_sum(rng, kind, i):
    sym = make_symbol(kind, 0.6, 12)
    x, y = ball_points(rng, 6, lo=0.2), ball_points(rng, 6, lo=0.2)
    assert_allclose(tensor_kernel(sym, RHO0, x, y), _brute_tensor(sym, i, x, y),
                    rtol=1e-10, atol=1e-12 * np.abs(_brute_tensor(sym, i, x, y)).max())


def test_tensor_kernel_symmetry_bound_tangential(rng):
    sym = make_symbol("vector-i3", 0.85**6, 500)
    x, y = ball_points(rng, 50), ball_points(rng, 50)
    K = tensor_kernel(sym, RHO0, x, y)
    assert_allclose(np.swapaxes(K, -1, -2), tensor_kernel(sym, RHO0, y, x), rtol=1e-11,
                    atol=1e-11 * np.abs(K).max())
    assert np.all(np.linalg.norm(K, 2, axis=(-2, -1)) <= tensor_kernel_bound(sym, RHO0))
    xi = x / np.linalg.norm(x, axis=1, keepdims=True)
    Kxx = tensor_kernel(sym, RHO0, x, x)
    assert_allclose(np.einsum("pab,pb->pa", Kxx, xi), 0.0, atol=1e-10 * np.abs(Kxx).max())


def test_summability():
    model = default_three_shell()
    rep = summability_check(make_symbol("vector-i3", 0.85**6, 500), 3, model)
    assert rep.converged and rep.tail_estimate < 1e-14 * rep.series_value
    n = np.arange(1, 201, dtype=float)
    k = (model.radii[-1] / model.radii[0]) ** (2 * n + 2) * (2 * n + 3) / n
    flat = custom_symbol(np.concatenate([[0.0], k]))
    assert not summability_check(flat, 3, model, n_max=200).converged
    assert summability_check(make_symbol("scalar-meg", 0.85, 200), "scalar", model).converged
    assert summability_check(make_symbol("vector-i2", 0.85, 300), 2, model).converged


def test_summability_partial_sums_monotone():
    model = default_three_shell()
    sym = make_symbol("vector-i3", 0.9, 400)
    vals = [summability_check(sym, 3, model, n_max=m, rtol=0).series_value
            for m in (10, 50, 100, 400)]
    assert np.all(np.diff(vals) >= 0)


def test_sobolev_inclusion(rng):
    a = rng.uniform(0.1, 1.0, 30)
    b = a * rng.uniform(1.0, 3.0, 30)
    deg = np.arange(30)
    for _ in range(20):
        F = rng.normal(size=30)
        # norms weight F_n^2 by kappa_n^2 = a_n^2 resp. b_n^2
        assert sobolev_norm(F, deg, b**-2.0) >= sobolev_norm(F, deg, a**-2.0)
    assert sobolev_norm([1.0], [0], [0.0]) == float("inf")
