"""Synthetic test currents, noise, and the integral-oracle assembly lane.

The oracle computes scalar MEG matrix entries without any series
expansion: closed-form kernels, a finite-difference Laplacian and
quasi-Monte Carlo integration over the ball.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .assembly import meg_gram, scalar_meg_weights, assemble_vector_eeg
from .fieldeval import (FieldSamples, eval_scalar_spline, eval_vector_spline,
                        scalar_to_current)
from .forward import SensorSet, scalar_meg_design_matrix
from .headmodel import MU0
from .kernels import make_symbol
from .specfun import BasisIndex, onb_ball, spherical_harmonic

__all__ = [
    "TestCase",
    "QMCConfig",
    "NoiseSpec",
    "golden_gamma",
    "kronecker",
    "map_to_ball",
    "qmc_ball_integrate",
    "fornberg_weights",
    "STENCIL_D2_ORDER8",
    "fd_laplacian",
    "kernel_laplace_closed",
    "kernel_grad_km",
    "kernel_grad_km_generic",
    "kernel_grad_km_series",
    "integral_oracle_block",
    "integral_oracle_entry",
    "scalar_functional_oracle",
    "generate_data",
    "add_noise",
    "exact_scalar_for_case",
    "exact_current_for_case",
    "onb_current_coefficient",
    "synthetic_meg_sensors",
    "synthetic_eeg_sensors",
]

PAPER_SCALE_POINTS = 4_000_000


# ---------------------------------------------------------------------------
# Configuration types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestCase:
    """Synthetic source.

    Attributes
    ----------
    kind : {"spline-combo", "onb-mode"}
    modality : {"MEG", "EEG"}
    nodes : tuple of int
        Sensor indices whose kernels are combined (spline-combo).
    weights : tuple of float
        Combination weights (spline-combo).
    h_data : float
        Parameter of the data-generating symbol.
    amplitude : float
        Mode amplitude (onb-mode).
    mode : tuple of int
        ``(n, j)`` of the mode ``G_n Y_{n,j}`` (onb-mode).
    N : int
        Truncation degree of the data-generating symbol.
    """

    __test__ = False  # not a pytest class

    kind: str = "spline-combo"
    modality: str = "MEG"
    nodes: tuple = (0, 1)
    weights: tuple = (1.0, 1.0)
    h_data: float = 0.8
    amplitude: float = 0.1
    mode: tuple = (3, 6)
    N: int = 500

    def __post_init__(self):
        if self.kind not in ("spline-combo", "onb-mode"):
            raise ValueError(f"unknown test-case kind {self.kind!r}")
        if self.modality not in ("MEG", "EEG"):
            raise ValueError("modality must be MEG or EEG")
        if self.kind == "spline-combo" and len(self.nodes) != len(self.weights):
            raise ValueError("nodes and weights must have equal length")
        if self.kind == "onb-mode":
            if self.modality != "MEG":
                raise ValueError("onb-mode cases describe the scalar MEG part")
            n, j = self.mode
            if n < 1 or not 1 <= j <= 2 * n + 1:
                raise ValueError(f"invalid mode {self.mode}")

    @property
    def data_symbol(self):
        kind = "data-gen-scalar" if self.modality == "MEG" else "data-gen-eeg"
        return make_symbol(kind, self.h_data, self.N)

    def to_dict(self):
        return {"kind": self.kind, "modality": self.modality, "nodes": list(self.nodes),
                "weights": list(self.weights), "h_data": self.h_data,
                "amplitude": self.amplitude, "mode": list(self.mode), "N": self.N}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("nodes", "weights", "mode"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def golden_gamma(d):
    """Kronecker generator ``(Phi_d**-i)_{i=1..d}``.

    ``Phi_d`` is the root in ``(1, 2)`` of ``x**(d+1) = x + 1``.

    Examples
    --------
    >>> round(1 / golden_gamma(1)[0], 12)
    1.618033988749
    """
    if d < 1:
        raise ValueError("dimension must be at least 1")
    f = lambda x: x ** (d + 1) - x - 1  # noqa: E731
    phi = brentq(f, 1.0, 2.0, xtol=1e-16, rtol=4 * np.finfo(float).eps)
    for _ in range(2):  # Newton polish
        phi -= f(phi) / ((d + 1) * phi**d - 1)
    return phi ** -np.arange(1, d + 1, dtype=float)


@dataclass(frozen=True)
class QMCConfig:
    """Kronecker-sequence quadrature settings."""

    point_count: int = 100_000
    dimension: int = 3
    block_size: int = 20_000

    def __post_init__(self):
        if self.point_count < 1 or self.dimension < 1 or self.block_size < 1:
            raise ValueError("point_count, dimension and block_size must be positive")

    @property
    def gamma(self):
        return golden_gamma(self.dimension)

    def blocks(self):
        """Yield consecutive blocks of the sequence ``{n gamma}, n = 1..count``."""
        g = self.gamma
        for start in range(1, self.point_count + 1, self.block_size):
            stop = min(self.point_count + 1, start + self.block_size)
            yield kronecker(stop - start, g, start)


def kronecker(count, gamma, start=1):
    """Points ``{n gamma}`` for ``n = start .. start+count-1``."""
    n = np.arange(start, start + count, dtype=float)[:, None]
    return np.mod(n * np.asarray(gamma)[None, :], 1.0)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian noise of relative strength ``level_percent``."""

    level_percent: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.level_percent < 0:
            raise ValueError("noise level must be nonnegative")


def map_to_ball(u, rho0):
    """Map unit-cube points to the ball, uniformly in volume."""
    u = np.asarray(u, dtype=float)
    r = rho0 * np.cbrt(u[:, 0])
    ct = 2 * u[:, 1] - 1
    st = np.sqrt(np.clip(1 - ct * ct, 0.0, None))
    ph = 2 * np.pi * u[:, 2]
    return r[:, None] * np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=1)


def _ball_volume(rho0):
    return 4 * np.pi * rho0**3 / 3


def qmc_ball_integrate(f, rho0, config=None):
    """Integral of ``f`` over the ball by Kronecker quasi-Monte Carlo.

    ``f`` maps points of shape ``(p, 3)`` to values of shape ``(p,)``.
    Block sums are reduced pairwise in a fixed order, so the result does
    not depend on how the work is split.
    """
    cfg = QMCConfig() if config is None else config
    if cfg.dimension != 3:
        cfg = QMCConfig(cfg.point_count, 3, cfg.block_size)
    sums = [np.sum(f(map_to_ball(u, rho0))) for u in cfg.blocks()]
    return float(np.sum(sums) / cfg.point_count * _ball_volume(rho0))


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def fornberg_weights(z, x, m):
    """Finite-difference weights for derivatives up to order ``m``.

    Parameters
    ----------
    z : float
        Point of approximation.
    x : array_like
        Grid nodes.
    m : int
        Highest derivative order.

    Returns
    -------
    ndarray, shape (m+1, len(x))
        Row ``k`` approximates the k-th derivative.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    c = np.zeros((m + 1, n))
    c1, c4 = 1.0, x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


# second derivative, offsets -4..4, accuracy order 8 (generated with fornberg_weights)
STENCIL_D2_ORDER8 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72,
                              8 / 5, -1 / 5, 8 / 315, -1 / 560])
STENCIL_D2_ORDER8.setflags(write=False)


def fd_laplacian(f, x, step, weights=None, domain_radius=None):
    """Laplacian by a 9-point second-difference stencil on each axis.

    Parameters
    ----------
    f : callable
        Vectorised scalar field, ``(p, 3) -> (p,)``.
    x : array_like, shape (p, 3) or (3,)
    step : float
    weights : array_like, optional
        Replaces the frozen order-8 stencil (test hook).
    domain_radius : float, optional
        Raise if any stencil point leaves the ball of this radius.
    """
    w = STENCIL_D2_ORDER8 if weights is None else np.asarray(weights, dtype=float)
    half = w.size // 2
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if domain_radius is not None:
        reach = float(np.max(np.linalg.norm(pts, axis=1))) + half * step
        if reach > domain_radius:
            raise ValueError(f"finite-difference stencil reaches radius {reach:g}, "
                             f"beyond the domain radius {domain_radius:g}")
    total = 3 * w[half] * f(pts)
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = step
        for k in range(1, half + 1):
            total = total + w[half + k] * f(pts + k * e) + w[half - k] * f(pts - k * e)
    out = total / step**2
    return out[0] if single else out


# ---------------------------------------------------------------------------
# Closed-form kernels
# ---------------------------------------------------------------------------

def kernel_laplace_closed(h, rho0, x, z):
    """``Delta_z (|z| K(x, z))`` for the data-generating scalar kernel.

    ``h |x| / (2 pi rho0**4) (3 rho0**2/h**2 - 4 x.z + (h|x||z|/rho0)**2)
    D**(-3/2)`` with ``D = rho0**2/h**2 - 2 x.z + (h|x||z|/rho0)**2``.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    rz = np.linalg.norm(z, axis=-1)
    xz = np.sum(x * z, axis=-1)
    c = rho0**2 / h**2
    e = (h * r * rz / rho0) ** 2
    D = c - 2 * xz + e
    if np.any(D <= 0):
        raise ArithmeticError("kernel denominator is not positive")
    return h * r / (2 * np.pi * rho0**4) * (3 * c - 4 * xz + e) * D**-1.5


def _split(x):
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    xi = x / np.where(r > 0, r, 1.0)[..., None]
    return r, xi


def kernel_grad_km_series(x, y, terms=60):
    """``4 pi grad_y K_m(x, y)`` by summing the Legendre series directly."""
    r, xi = _split(x)
    s, eta = _split(y)
    t = np.clip(np.sum(xi * eta, axis=-1), -1.0, 1.0)
    P_prev, P = np.ones_like(t), t
    dP_prev, dP = np.zeros_like(t), np.ones_like(t)
    q = r / s
    out = np.zeros(np.broadcast(t, q).shape + (3,))
    tang = xi - t[..., None] * eta
    qk = np.ones_like(q)
    for k in range(1, terms + 1):
        qk = qk * q
        # grad_y [P_k(t) / s**(k+1)] = -(k+1) P_k eta / s**(k+2) + P_k' (xi - t eta) / s**(k+2)
        coef = qk / ((k + 1) * s**2)
        out += coef[..., None] * (-(k + 1) * P[..., None] * eta + dP[..., None] * tang)
        P_prev, P = P, ((2 * k + 1) * t * P - k * P_prev) / (k + 1)
        dP_prev, dP = dP, dP_prev + (2 * k + 1) * P_prev
    return out


def kernel_grad_km_generic(x, y):
    """Generic-branch closed form of ``4 pi grad_y K_m``, valid for ``|xi.eta| != 1``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r, xi = _split(x)
    s, eta = _split(y)
    t = np.sum(xi * eta, axis=-1)
    d = np.linalg.norm(x - y, axis=-1)
    xe = np.sum(x * eta, axis=-1)
    xiy = np.sum(xi * y, axis=-1)
    pre = 1.0 / (s * r * (t * t - 1))
    vec = ((s - xe) / d - 1)[..., None] * xi - ((xiy - r) / d - t)[..., None] * eta
    return pre[..., None] * vec + eta / (s**2)[..., None]


def kernel_grad_km(x, y, small=0.05):
    """``4 pi grad_y K_m(x, y)`` for ``|x| < |y|``.

    ``4 pi K_m = L/|x| - 1/|y|`` with ``L`` the logarithm of the line
    integral of ``1/|rho xi - y|`` for ``rho`` in ``[0, |x|]``; two
    algebraically equal forms of ``L`` avoid cancellation on either side
    of ``xi.y = 0``.  Both also hold on the collinear lines
    ``xi.eta = +-1``.  For ``|x| < small |y|`` the series is summed.

    Returns
    -------
    ndarray, shape broadcast(x, y) + (3,)
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    r, xi = _split(x)
    s, eta = _split(y)
    if np.any(r >= s):
        raise ValueError("kernel gradient needs |x| < |y|")
    d = np.linalg.norm(x - y, axis=-1)
    u = np.sum(xi * y, axis=-1)
    dyd = (y - x) / d[..., None]
    pos = u >= 0
    sp = np.where(pos, s + u, 1.0)
    dp = np.where(pos, d - r + u, 1.0)
    g_pos = (eta + xi) / sp[..., None] - (dyd + xi) / dp[..., None]
    a = np.where(pos, 1.0, r - u + d)
    b = np.where(pos, 1.0, s - u)
    g_neg = (dyd - xi) / a[..., None] - (eta - xi) / b[..., None]
    gL = np.where(pos[..., None], g_pos, g_neg)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = gL / r[..., None] + eta / (s**2)[..., None]
    near = r < small * s
    if np.any(near):
        out[near] = kernel_grad_km_series(x[near], y[near], terms=16)
    return out


# ---------------------------------------------------------------------------
# Integral oracle
# ---------------------------------------------------------------------------

def _sensor_gradient(points, sensors, idx):
    """``nu_k . grad_y K_m(x, y_k)`` for the given points and sensors, (p, k)."""
    y = sensors.positions[idx]
    nu = sensors.normals[idx]
    g = kernel_grad_km(points[:, None, :], y[None, :, :])
    return np.einsum("pka,ka->pk", g, nu) / (4 * np.pi)


def integral_oracle_block(sensors, rows, cols, h_data, rho0, mu0=MU0, qmc=None,
                          fd_step=None, allow_paper_scale=False):
    """Scalar MEG matrix block by double ball integration.

    ``M[l, k] = mu0**2 int int Delta_x(|x| Delta_z(|z| K(x, z)))
    (nu_l . grad K_m(z, y_l)) (nu_k . grad K_m(x, y_k)) dx dz`` over the
    ball squared.  The inner Laplacian is closed-form, the outer one an
    order-8 finite difference, and the 6-dimensional integral a single
    Kronecker sequence.

    Returns
    -------
    block : ndarray, shape (len(rows), len(cols))
    diagnostics : dict
    """
    cfg = QMCConfig(dimension=6) if qmc is None else qmc
    if cfg.dimension != 6:
        cfg = QMCConfig(cfg.point_count, 6, cfg.block_size)
    if cfg.point_count > 1_000_000 and not allow_paper_scale:
        raise ValueError(f"{cfg.point_count} QMC points requested; pass "
                         "allow_paper_scale=True for budgets beyond 1e6")
    if sensors.modality != "MEG":
        raise ValueError("the integral oracle covers scalar MEG only")
    rows = np.atleast_1d(np.asarray(rows, dtype=int))
    cols = np.atleast_1d(np.asarray(cols, dtype=int))
    step = 1e-2 * rho0 if fd_step is None else fd_step
    acc = np.zeros((rows.size, cols.size))
    for u in cfg.blocks():
        x = map_to_ball(u[:, :3], rho0)
        z = map_to_ball(u[:, 3:], rho0)
        inner = lambda p: np.linalg.norm(p, axis=1) * kernel_laplace_closed(  # noqa: E731
            h_data, rho0, p, z)
        W = fd_laplacian(inner, x, step, domain_radius=rho0 / h_data)
        Gz = _sensor_gradient(z, sensors, rows)
        Gx = _sensor_gradient(x, sensors, cols)
        acc += Gz.T @ (W[:, None] * Gx)
    vol = _ball_volume(rho0)
    block = mu0**2 * vol**2 * acc / cfg.point_count
    diag = {"route": "integral-oracle", "points": cfg.point_count, "fd_step": step,
            "budget_flag": cfg.point_count < 10_000}
    return block, diag


def integral_oracle_entry(sensors, l, k, h_data, rho0, mu0=MU0, qmc=None, fd_step=None):
    """Single entry of :func:`integral_oracle_block`."""
    block, _ = integral_oracle_block(sensors, [l], [k], h_data, rho0, mu0, qmc, fd_step)
    return float(block[0, 0])


def scalar_functional_oracle(field, sensors, rho0, mu0=MU0, qmc=None, fd_step=None):
    """Scalar MEG data ``mu0 nu . int Delta(|x| A(x)) grad K_m(x, y_k) dx``.

    ``field`` maps points ``(p, 3)`` to values of ``A^(1)``.
    """
    cfg = QMCConfig() if qmc is None else qmc
    step = 1e-2 * rho0 if fd_step is None else fd_step
    idx = np.arange(sensors.count)
    g = np.zeros(sensors.count)
    for u in QMCConfig(cfg.point_count, 3, cfg.block_size).blocks():
        x = map_to_ball(u, rho0)
        lap = fd_laplacian(lambda p: np.linalg.norm(p, axis=1) * field(p), x, step)
        g += lap @ _sensor_gradient(x, sensors, idx)
    return mu0 * _ball_volume(rho0) * g / cfg.point_count


# ---------------------------------------------------------------------------
# Test cases, data and noise
# ---------------------------------------------------------------------------

def onb_current_coefficient(n, rho0):
    """Factor turning an ``A^(1)`` coefficient on ``G_n Y_{n,j}`` into the
    coefficient of the minimum-norm current on ``g^(3)_{0,n,j}``.

    ``(2/rho0) sqrt((2n+3)(2n+5)/(n(n+1)))``; both produce the same MEG data.
    """
    return 2 / rho0 * np.sqrt((2 * n + 3) * (2 * n + 5) / (n * (n + 1)))


def _mode_field(case, rho0):
    n, j = case.mode

    def field(p):
        p = np.asarray(p, dtype=float)
        r = np.linalg.norm(p, axis=-1)
        xi = p / np.where(r > 0, r, 1.0)[..., None]
        xi = np.where(r[..., None] > 0, xi, np.array([0.0, 0.0, 1.0]))
        # G_n written out: finite-difference stencils may poke slightly past rho0
        radial = np.sqrt((2 * n + 5) / rho0**3) * (r / rho0) ** (n + 1)
        return case.amplitude * radial * spherical_harmonic(n, j, xi)
    return field


def _combo_alpha(case, count):
    alpha = np.zeros(count)
    for node, w in zip(case.nodes, case.weights):
        if not 0 <= node < count:
            raise ValueError(f"node index {node} outside 0..{count - 1}")
        alpha[node] += w
    return alpha


def generate_data(case, sensors, model, route="svd-series", qmc=None, beta=None,
                  mu0=MU0):
    """Data ``g = A(exact source)`` of a test case.

    Parameters
    ----------
    route : {"svd-series", "integral-oracle"}
        The oracle route is available for MEG only.

    Returns
    -------
    g : ndarray, shape (l,)
    provenance : dict
    """
    if sensors.modality != case.modality:
        raise ValueError(f"{case.modality} test case with {sensors.modality} sensors")
    if route not in ("svd-series", "integral-oracle"):
        raise ValueError(f"unknown route {route!r}")
    rho0 = model.rho0
    prov = {"route": route, "case": case.to_dict()}
    if case.kind == "spline-combo":
        alpha = _combo_alpha(case, sensors.count)
        active = np.nonzero(alpha)[0]
        if active.size == 0:
            return np.zeros(sensors.count), prov
        sym = case.data_symbol
        if case.modality == "MEG":
            if route == "svd-series":
                rows = meg_gram(sensors, scalar_meg_weights(sym), rho0,
                                mu0**2 / rho0**3, rows=active)
            else:
                rows, diag = integral_oracle_block(sensors, active, np.arange(sensors.count),
                                                   case.h_data, rho0, mu0, qmc)
                prov.update(diag)
        else:
            if route != "svd-series":
                raise ValueError("EEG data are generated by the series route only")
            rows = assemble_vector_eeg(sensors, sym, model, beta).matrix[active]
        return alpha[active] @ rows, prov
    n, j = case.mode
    if case.amplitude == 0:
        return np.zeros(sensors.count), prov
    if route == "svd-series":
        col = n * n + j - 2
        g = case.amplitude * scalar_meg_design_matrix(sensors, rho0, n, mu0)[:, col]
    else:
        cfg = QMCConfig(dimension=3) if qmc is None else qmc
        g = scalar_functional_oracle(_mode_field(case, rho0), sensors, rho0, mu0, cfg)
        prov["points"] = cfg.point_count
    return g, prov


def add_noise(g, spec):
    """Add seeded Gaussian noise of relative strength ``level_percent``.

    ``sigma = level/100 * ||g|| / sqrt(l)``, so ``E||eps||**2`` equals
    ``(level/100 * ||g||)**2``.

    Returns
    -------
    noisy : ndarray
    noise_norm : float
        Realised ``||eps||_2``.
    """
    g = np.asarray(g, dtype=float)
    if spec.level_percent == 0:
        return g.copy(), 0.0
    rng = np.random.default_rng(spec.seed)
    sigma = spec.level_percent / 100 * np.linalg.norm(g) / np.sqrt(g.size)
    eps = rng.normal(0.0, sigma, g.size)
    return g + eps, float(np.linalg.norm(eps))


def exact_scalar_for_case(case, sensors, grid, rho0, mu0=MU0):
    """Exact ``A^(1)`` of an MEG test case on a grid."""
    if case.modality != "MEG":
        raise ValueError("A^(1) exists for MEG cases only")
    if case.kind == "spline-combo":
        alpha = _combo_alpha(case, sensors.count)
        return eval_scalar_spline(alpha, sensors, case.data_symbol, grid, rho0, mu0)
    vals = _mode_field(case, rho0)(grid.points)
    return FieldSamples("scalar", vals, grid, {"source": "onb-mode"})


def exact_current_for_case(case, sensors, grid, model, beta=None, mu0=MU0):
    """Exact current of a test case on a grid."""
    rho0 = model.rho0
    if case.kind == "spline-combo":
        alpha = _combo_alpha(case, sensors.count)
        if case.modality == "MEG":
            return scalar_to_current(alpha, sensors, case.data_symbol, grid, rho0, mu0)
        return eval_vector_spline(alpha, sensors, case.data_symbol, grid, "EEG",
                                  model=model, beta=beta)
    n, j = case.mode
    c = case.amplitude * onb_current_coefficient(n, rho0)
    vals = c * onb_ball(BasisIndex(3, 0, n, j), rho0, grid.points)
    return FieldSamples("vector", vals, grid, {"source": "onb-mode"})


# ---------------------------------------------------------------------------
# Synthetic sensor layouts
# ---------------------------------------------------------------------------

def _spiral(count):
    k = np.arange(count) + 0.5
    ct = 1 - 2 * k / count
    ph = np.pi * (1 + 5**0.5) * k
    st = np.sqrt(1 - ct * ct)
    return np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=1)


def _layout(count, max_colatitude, face_gap):
    """Spiral directions over a polar cap, without a frontal gap."""
    dense = count
    for _ in range(40):
        d = _spiral(dense)
        theta = np.arccos(np.clip(d[:, 2], -1, 1))
        phi = np.arctan2(d[:, 1], d[:, 0])
        keep = theta <= max_colatitude
        if face_gap:
            keep &= ~((np.abs(phi) < np.radians(40)) & (theta > np.radians(60)))
        if keep.sum() >= count:
            return d[keep][:count]
        dense = int(dense * 1.25) + 1
    raise RuntimeError("could not place sensors")


def synthetic_meg_sensors(count=100, radius=0.115, max_colatitude_deg=110.0, face_gap=True):
    """Radially oriented magnetometers over the upper head with a face gap."""
    d = _layout(count, np.radians(max_colatitude_deg), face_gap)
    return SensorSet("MEG", radius * d, d.copy())


def synthetic_eeg_sensors(model, count=64, max_colatitude_deg=100.0, face_gap=True):
    """Electrodes on the scalp, mostly in the upper hemisphere."""
    d = _layout(count, np.radians(max_colatitude_deg), face_gap)
    return SensorSet("EEG", model.rhoL * d)
