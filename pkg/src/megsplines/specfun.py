"""Special functions on the unit sphere and on balls.

Legendre and Jacobi polynomials, Clenshaw summation of Legendre series
(including the first two derivatives), fully normalised real spherical
harmonics, Edmonds vector spherical harmonics, vector Legendre kernels,
the orthonormal basis of square-integrable vector fields on a ball and
the pointwise bound of that basis.

Degree/order bookkeeping
------------------------
Harmonics of degree ``n`` carry orders ``j = 1, ..., 2n+1``.  The zonal
harmonic is ``j = n+1``, ``j = n+1-k`` is the ``cos(k phi)`` sector and
``j = n+1+k`` the ``sin(k phi)`` sector.  Tables holding all degrees up to
``N`` are flattened with ``index(n, j) = n**2 + j - 1``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import binom

__all__ = [
    "DomainError",
    "LegendreSeries",
    "BasisIndex",
    "legendre_eval",
    "legendre_table",
    "legendre_sums",
    "clenshaw_legendre",
    "jacobi_eval",
    "harmonic_index",
    "spherical_harmonics",
    "spherical_harmonic",
    "spherical_harmonics_with_gradient",
    "vector_spherical_harmonics",
    "vector_legendre",
    "vector_addition_tensor",
    "vector_tensor_series",
    "onb_ball",
    "basis_bound",
    "radial_gn",
    "radial_exponent",
    "edmonds_mu",
]


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


def _as_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1.0 + 1e-12):
        raise DomainError("Legendre argument outside [-1, 1]")
    return np.clip(t, -1.0, 1.0)


def _unit(xi, name="xi", tol=1e-10):
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != 3:
        raise ValueError(f"{name} must have a trailing dimension of 3")
    norms = np.linalg.norm(xi, axis=-1)
    if np.any(np.abs(norms - 1.0) > tol):
        raise ValueError(f"{name} must consist of unit vectors")
    return xi


# ---------------------------------------------------------------------------
# Legendre polynomials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LegendreSeries:
    """Coefficients of a Legendre series and the derivative to sum against.

    Parameters
    ----------
    coefficients : array_like, shape (N+1,)
        Coefficient ``c_n`` of degree ``n``.
    derivative_order : {0, 1, 2}
        Sum against ``P_n``, ``P_n'`` or ``P_n''``.
    """

    coefficients: np.ndarray
    derivative_order: int = 0

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a nonempty 1-D array")
        if self.derivative_order not in (0, 1, 2):
            raise ValueError("derivative_order must be 0, 1 or 2")
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self):
        return self.coefficients.size - 1


def legendre_table(N, t):
    """All Legendre polynomials up to degree N with two derivatives.

    Parameters
    ----------
    N : int
        Maximal degree.
    t : array_like
        Arguments in [-1, 1].

    Returns
    -------
    P, dP, d2P : ndarray, shape (N+1,) + t.shape
        ``P_n(t)``, ``P_n'(t)`` and ``P_n''(t)``.

    Notes
    -----
    The derivatives follow from differentiating the Bonnet recurrence,
    so no division by ``1 - t**2`` occurs and the endpoints are exact.
    """
    t = _as_t(t)
    P = np.zeros((N + 1,) + t.shape)
    dP = np.zeros_like(P)
    d2P = np.zeros_like(P)
    P[0] = 1.0
    if N >= 1:
        P[1] = t
        dP[1] = 1.0
    for n in range(1, N):
        a = (2 * n + 1) / (n + 1)
        b = n / (n + 1)
        P[n + 1] = a * t * P[n] - b * P[n - 1]
        dP[n + 1] = a * (P[n] + t * dP[n]) - b * dP[n - 1]
        d2P[n + 1] = a * (2 * dP[n] + t * d2P[n]) - b * d2P[n - 1]
    return P, dP, d2P


def legendre_eval(n, t, order=0):
    """Legendre polynomial ``P_n`` or one of its first two derivatives.

    Parameters
    ----------
    n : int
        Degree, ``n >= 0``.
    t : float or array_like
        Argument in [-1, 1].
    order : {0, 1, 2}
        Derivative order.

    Examples
    --------
    >>> legendre_eval(2, 1.0, order=1)
    3.0
    """
    if n < 0:
        raise ValueError("degree must be nonnegative")
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    tables = legendre_table(n, t)
    out = tables[order][n]
    return float(out) if out.ndim == 0 else out


def legendre_sums(coefficients, t, scale=1.0, max_order=0, shift=0):
    """Clenshaw summation of a scaled Legendre series and its derivatives.

    Computes ``S_d = sum_n c_n * scale**(n - shift) * P_n^{(d)}(t)`` for
    ``d = 0..max_order`` in a single backward pass.

    Parameters
    ----------
    coefficients : array_like, shape (N+1,)
        Coefficients ``c_n`` shared by all evaluation points.
    t : array_like
        Arguments in [-1, 1].
    scale : float or array_like
        Geometric factor broadcast against ``t``; the powers are folded
        into the recurrence, so no ``scale**N`` is ever formed.
    max_order : {0, 1, 2}
        Highest derivative returned.
    shift : {0, 1}
        With ``shift=1`` the degree-0 coefficient is ignored and the
        series is divided by ``scale`` without a division, which keeps
        ``scale = 0`` finite.

    Returns
    -------
    tuple of ndarray
        ``(S_0, ..., S_max_order)``.
    """
    c = np.asarray(coefficients, dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise ValueError("coefficients must be a nonempty 1-D array")
    if max_order not in (0, 1, 2) or shift not in (0, 1):
        raise ValueError("max_order must be 0..2 and shift 0 or 1")
    t = _as_t(t)
    s = np.asarray(scale, dtype=float)
    t, s = np.broadcast_arrays(t, s)
    N = c.size - 1
    ts = t * s
    s2 = s * s
    shape = t.shape
    y1 = np.zeros(shape)
    y2 = np.zeros(shape)
    d1 = np.zeros(shape) if max_order >= 1 else None
    d2 = np.zeros(shape) if max_order >= 1 else None
    e1 = np.zeros(shape) if max_order >= 2 else None
    e2 = np.zeros(shape) if max_order >= 2 else None
    last = shift
    for k in range(N, last - 1, -1):
        a = (2 * k + 1) / (k + 1)
        b = (k + 1) / (k + 2)
        if max_order >= 2:
            e0 = a * (2 * s * d1 + ts * e1) - b * s2 * e2
            e2, e1 = e1, e0
        if max_order >= 1:
            d0 = a * s * (y1 + t * d1) - b * s2 * d2
            d2, d1 = d1, d0
        y0 = c[k] + a * ts * y1 - b * s2 * y2
        y2, y1 = y1, y0
    if shift == 0:
        out = [y1]
        if max_order >= 1:
            out.append(d1)
        if max_order >= 2:
            out.append(e1)
        return tuple(out)
    # shift = 1: recover (S - c_0)/scale = t*y_1 - s*y_2/2 from y_1, y_2
    out = [t * y1 - 0.5 * s * y2]
    if max_order >= 1:
        out.append(y1 + t * d1 - 0.5 * s * d2)
    if max_order >= 2:
        out.append(2 * d1 + t * e1 - 0.5 * s * e2)
    return tuple(out)


def clenshaw_legendre(series, t, scale=1.0):
    """Sum a :class:`LegendreSeries` at ``t`` by Clenshaw's algorithm.

    Examples
    --------
    >>> s = LegendreSeries(np.array([0.0, 0.0, 1.0]))
    >>> float(clenshaw_legendre(s, 0.5))
    -0.125
    """
    if not isinstance(series, LegendreSeries):
        series = LegendreSeries(series)
    sums = legendre_sums(series.coefficients, t, scale=scale,
                         max_order=series.derivative_order)
    out = sums[series.derivative_order]
    return float(out) if np.ndim(out) == 0 else out


def jacobi_eval(m, alpha, beta, x):
    """Jacobi polynomial ``P_m^{(alpha, beta)}(x)`` by its recurrence.

    Parameters
    ----------
    m : int
        Degree.
    alpha, beta : float
        Parameters, both greater than -1.
    x : float or array_like
        Argument in [-1, 1].
    """
    if alpha <= -1 or beta <= -1:
        raise ValueError("alpha and beta must exceed -1")
    if m < 0:
        raise ValueError("degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-12):
        raise DomainError("Jacobi argument outside [-1, 1]")
    p_prev = np.ones_like(x)
    if m == 0:
        return float(p_prev) if x.ndim == 0 else p_prev
    ab = alpha + beta
    p = 0.5 * (ab + 2) * x + 0.5 * (alpha - beta)
    for n in range(2, m + 1):
        c = 2 * n + ab
        a1 = 2 * n * (n + ab) * (c - 2)
        a2 = (c - 1) * (alpha**2 - beta**2)
        a3 = (c - 1) * c * (c - 2)
        a4 = 2 * (n + alpha - 1) * (n + beta - 1) * c
        p, p_prev = ((a2 + a3 * x) * p - a4 * p_prev) / a1, p
    return float(p) if x.ndim == 0 else p


# ---------------------------------------------------------------------------
# Real spherical harmonics
# ---------------------------------------------------------------------------

def harmonic_index(n, j):
    """Flat position of ``Y_{n,j}`` in a table of all degrees."""
    if n < 0 or not 1 <= j <= 2 * n + 1:
        raise IndexError(f"order j={j} outside 1..{2 * n + 1} for n={n}")
    return n * n + j - 1


def _spherical_frame(xi):
    ct = np.clip(xi[..., 2], -1.0, 1.0)
    st = np.hypot(xi[..., 0], xi[..., 1])
    phi = np.arctan2(xi[..., 1], xi[..., 0])
    return ct, st, phi


def _alp_tables(N, ct, st):
    """Normalised associated Legendre functions.

    Returns ``Pb[n, m]`` normalised so that ``Pb[n, 0]`` is the zonal
    harmonic, ``Q[n, m] = Pb[n, m] / sin(theta)`` for ``m >= 1`` computed
    without dividing by ``sin(theta)``, and ``dPb[n, m]``, the theta
    derivative of ``Pb[n, m]``.
    """
    shape = ct.shape
    Pb = np.zeros((N + 1, N + 1) + shape)
    Q = np.zeros((N + 1, N + 1) + shape)
    Pb[0, 0] = 1.0 / np.sqrt(4 * np.pi)
    if N >= 1:
        Pb[1, 0] = np.sqrt(3.0) * ct * Pb[0, 0]
    for n in range(2, N + 1):
        a = np.sqrt((2 * n - 1) * (2 * n + 1)) / n
        b = np.sqrt((2 * n + 1) / (2 * n - 3)) * (n - 1) / n
        Pb[n, 0] = a * ct * Pb[n - 1, 0] - b * Pb[n - 2, 0]
    # Q seeds: Pb[m, m] / sin = prod_k sqrt((2k+1)/2k) sin^(m-1) / sqrt(4 pi)
    seed = np.full(shape, 1.0 / np.sqrt(4 * np.pi))
    for m in range(1, N + 1):
        seed = seed * np.sqrt((2 * m + 1) / (2 * m))
        if m > 1:
            seed = seed * st
        Q[m, m] = seed
        if m + 1 <= N:
            Q[m + 1, m] = np.sqrt(2 * m + 3) * ct * Q[m, m]
        for n in range(m + 2, N + 1):
            a = np.sqrt((2 * n - 1) * (2 * n + 1) / ((n - m) * (n + m)))
            b = np.sqrt((2 * n + 1) * (n + m - 1) * (n - m - 1)
                        / ((n - m) * (n + m) * (2 * n - 3)))
            Q[n, m] = a * ct * Q[n - 1, m] - b * Q[n - 2, m]
    Pb[:, 1:] = Q[:, 1:] * st
    dPb = np.zeros_like(Pb)
    for n in range(1, N + 1):
        dPb[n, 0] = -np.sqrt(n * (n + 1)) * Pb[n, 1]
        for m in range(1, n + 1):
            val = 0.5 * np.sqrt((n + m) * (n - m + 1)) * Pb[n, m - 1]
            if m < n:
                val = val - 0.5 * np.sqrt((n + m + 1) * (n - m)) * Pb[n, m + 1]
            dPb[n, m] = val
    return Pb, Q, dPb


def _harmonics(N, xi, gradient):
    xi = _unit(xi)
    ct, st, phi = _spherical_frame(xi)
    Pb, Q, dPb = _alp_tables(N, ct, st)
    shape = ct.shape
    Y = np.zeros(shape + ((N + 1) ** 2,))
    if gradient:
        dth = np.zeros_like(Y)
        dph = np.zeros_like(Y)
    r2 = np.sqrt(2.0)
    for n in range(N + 1):
        base = n * n + n  # index of the zonal term j = n+1
        Y[..., base] = Pb[n, 0]
        if gradient:
            dth[..., base] = dPb[n, 0]
        for k in range(1, n + 1):
            ck, sk = np.cos(k * phi), np.sin(k * phi)
            Y[..., base - k] = r2 * Pb[n, k] * ck
            Y[..., base + k] = r2 * Pb[n, k] * sk
            if gradient:
                dth[..., base - k] = r2 * dPb[n, k] * ck
                dth[..., base + k] = r2 * dPb[n, k] * sk
                dph[..., base - k] = -r2 * k * Q[n, k] * sk
                dph[..., base + k] = r2 * k * Q[n, k] * ck
    if not gradient:
        return Y
    cp, sp = np.cos(phi), np.sin(phi)
    e_theta = np.stack([ct * cp, ct * sp, -st], axis=-1)
    e_phi = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
    grad = (dth[..., None] * e_theta[..., None, :]
            + dph[..., None] * e_phi[..., None, :])
    return Y, grad


def spherical_harmonics(N, xi):
    """All real orthonormal spherical harmonics up to degree N.

    Parameters
    ----------
    N : int
        Maximal degree.
    xi : array_like, shape (..., 3)
        Unit vectors.

    Returns
    -------
    ndarray, shape (..., (N+1)**2)
        ``Y_{n,j}(xi)`` at flat index ``n**2 + j - 1``.
    """
    return _harmonics(N, xi, gradient=False)


def spherical_harmonics_with_gradient(N, xi):
    """Harmonics together with their surface gradients.

    Returns
    -------
    Y : ndarray, shape (..., (N+1)**2)
    grad : ndarray, shape (..., (N+1)**2, 3)
        Surface gradient ``nabla^* Y_{n,j}`` in Cartesian components.
    """
    return _harmonics(N, xi, gradient=True)


def spherical_harmonic(n, j, xi):
    """Single real orthonormal spherical harmonic ``Y_{n,j}(xi)``."""
    idx = harmonic_index(n, j)
    return spherical_harmonics(n, xi)[..., idx]


def edmonds_mu(i, n):
    """Normalisation constant of the operator ``o^(i)`` at degree n."""
    if i == 1:
        return (n + 1) * (2 * n + 1)
    if i == 2:
        return n * (2 * n + 1)
    if i == 3:
        return n * (n + 1)
    raise ValueError("vector harmonic type must be 1, 2 or 3")


def _check_type_degree(i, n):
    if i not in (1, 2, 3):
        raise ValueError("vector harmonic type must be 1, 2 or 3")
    if n < 0 or (i != 1 and n < 1):
        raise ValueError(f"degree n={n} not admissible for type {i}")


def vector_spherical_harmonics(i, N, xi):
    """Edmonds vector spherical harmonics of type i up to degree N.

    Returns
    -------
    ndarray, shape (..., (N+1)**2, 3)
        ``y^(i)_{n,j}(xi)``; entries that do not exist (degree 0 for
        types 2 and 3) are zero.
    """
    if i not in (1, 2, 3):
        raise ValueError("vector harmonic type must be 1, 2 or 3")
    xi = _unit(xi)
    Y, grad = spherical_harmonics_with_gradient(N, xi)
    n = np.repeat(np.arange(N + 1), 2 * np.arange(N + 1) + 1)
    valid = n >= (0 if i == 1 else 1)
    inv = np.where(valid, 1.0 / np.sqrt(np.maximum(edmonds_mu(i, n), 1)), 0.0)
    if i == 1:
        out = (n + 1)[:, None] * xi[..., None, :] * Y[..., None] - grad
    elif i == 2:
        out = n[:, None] * xi[..., None, :] * Y[..., None] + grad
    else:
        out = np.cross(xi[..., None, :], grad)
    return out * inv[:, None]


def vector_legendre(i, n, xi, eta):
    """Edmonds vector Legendre kernel ``p^(i)_n(xi, eta)``.

    The operator ``o^(i)`` acts on the first argument of
    ``P_n(xi . eta)``, so that
    ``sum_j y^(i)_{n,j}(xi) Y_{n,j}(eta) = (2n+1)/(4 pi) p^(i)_n(xi, eta)``.
    Only ``P_n``, ``P_n'`` and the vectors ``xi``, ``eta`` enter, which
    keeps collinear arguments finite.
    """
    _check_type_degree(i, n)
    xi = _unit(xi)
    eta = _unit(eta, "eta")
    t = np.clip(np.sum(xi * eta, axis=-1), -1.0, 1.0)
    P, dP, _ = legendre_table(n, t)
    p, dp = P[n][..., None], dP[n][..., None]
    tang = eta - t[..., None] * xi
    mu = edmonds_mu(i, n)
    if i == 1:
        return ((n + 1) * p * xi - dp * tang) / np.sqrt(mu)
    if i == 2:
        return (n * p * xi + dp * tang) / np.sqrt(mu)
    return dp * np.cross(xi, eta) / np.sqrt(mu)


def _cross_matrix(v):
    z = np.zeros(v.shape[:-1])
    return np.stack([
        np.stack([z, -v[..., 2], v[..., 1]], axis=-1),
        np.stack([v[..., 2], z, -v[..., 0]], axis=-1),
        np.stack([-v[..., 1], v[..., 0], z], axis=-1),
    ], axis=-2)


def _cd(i, n):
    """Radial and gradient weights of ``o^(i)`` (types 1 and 2)."""
    if i == 1:
        return n + 1.0, -np.ones_like(n, dtype=float)
    if i == 2:
        return n.astype(float), np.ones_like(n, dtype=float)
    return np.zeros_like(n, dtype=float), np.ones_like(n, dtype=float)


def vector_tensor_series(i, i2, coefficients, xi, eta, scale=1.0, shift=0):
    """Sum of vector addition tensors over degrees.

    Evaluates ``sum_n c_n scale**(n-shift) sum_j y^(i)_{n,j}(xi) (x)
    y^(i2)_{n,j}(eta)`` in closed form through Legendre-derivative
    series only, never looping over the orders j.

    Parameters
    ----------
    i, i2 : {1, 2, 3}
        Types of the left and right factors.
    coefficients : array_like, shape (N+1,)
        ``c_n``; degrees not admissible for the types are ignored.
    xi, eta : array_like, shape (..., 3)
        Unit vectors.
    scale, shift
        Passed to :func:`legendre_sums`.

    Returns
    -------
    ndarray, shape (..., 3, 3)
    """
    xi = _unit(xi)
    eta = _unit(eta, "eta")
    xi, eta = np.broadcast_arrays(xi, eta)
    c = np.asarray(coefficients, dtype=float)
    n = np.arange(c.size)
    ok = np.ones(c.size, dtype=bool)
    if i != 1 or i2 != 1:
        ok &= n >= 1
    mu = np.where(ok, edmonds_mu(i, n) * edmonds_mu(i2, n), 1.0)
    K = np.where(ok, c * (2 * n + 1) / (4 * np.pi * np.sqrt(mu)), 0.0)
    cl, dl = _cd(i, n)
    cr, dr = _cd(i2, n)
    t = np.clip(np.sum(xi * eta, axis=-1), -1.0, 1.0)
    s = np.broadcast_to(np.asarray(scale, dtype=float), t.shape)

    def sums(coef, order):
        if not np.any(coef):
            return (np.zeros(t.shape),) * (order + 1)
        return legendre_sums(coef, t, s, max_order=order, shift=shift)

    S0cc = sums(K * cl * cr, 0)[0]
    S1cd = sums(K * cl * dr, 1)[1]
    S1dc = sums(K * dl * cr, 1)[1]
    _, S1dd, S2dd = sums(K * dl * dr, 2)

    a = eta - t[..., None] * xi   # xi-side tangential direction
    b = xi - t[..., None] * eta   # eta-side tangential direction
    outer = lambda u, v: u[..., :, None] * v[..., None, :]  # noqa: E731
    proj = np.eye(3) - outer(xi, xi)
    T = (S0cc[..., None, None] * outer(xi, eta)
         + S1cd[..., None, None] * outer(xi, b)
         + S1dc[..., None, None] * outer(a, eta)
         + S2dd[..., None, None] * outer(a, b)
         + S1dd[..., None, None] * (proj - outer(a, eta)))
    if i == 3:
        T = _cross_matrix(xi) @ T
    if i2 == 3:
        T = T @ np.swapaxes(_cross_matrix(eta), -1, -2)
    return T


def vector_addition_tensor(i, i2, n, xi, eta):
    """``sum_j y^(i)_{n,j}(xi) (x) y^(i2)_{n,j}(eta)`` for one degree n."""
    _check_type_degree(i, n)
    _check_type_degree(i2, n)
    c = np.zeros(n + 1)
    c[n] = 1.0
    return vector_tensor_series(i, i2, c, xi, eta)


# ---------------------------------------------------------------------------
# Ball basis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BasisIndex:
    """Index ``(i, m, n, j)`` of the orthonormal ball basis."""

    type_i: int
    m: int
    n: int
    j: int

    def __post_init__(self):
        _check_type_degree(self.type_i, self.n)
        if self.m < 0:
            raise ValueError("radial degree m must be nonnegative")
        if not 1 <= self.j <= 2 * self.n + 1:
            raise IndexError(f"order j={self.j} outside 1..{2 * self.n + 1}")


def radial_exponent(i, n):
    """Exponent ``t_n``: n for types 1 and 3, n-1 for type 2."""
    return n - 1 if i == 2 else n


def onb_ball(idx, R, x):
    """Orthonormal basis function ``g^(i)_{m,n,j}(R; x)`` of the ball.

    Parameters
    ----------
    idx : BasisIndex
    R : float
        Ball radius in metres.
    x : array_like, shape (..., 3)
        Points with ``|x| <= R``.

    Returns
    -------
    ndarray, shape (..., 3)
        Field value in m^(-3/2).
    """
    if not isinstance(idx, BasisIndex):
        idx = BasisIndex(*idx)
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r > R * (1 + 1e-10)):
        raise DomainError("point outside the ball")
    safe = np.where(r[..., None] > 0, x / np.where(r > 0, r, 1.0)[..., None],
                    np.array([0.0, 0.0, 1.0]))
    tn = radial_exponent(idx.type_i, idx.n)
    u = np.clip(r / R, 0.0, 1.0)
    radial = (np.sqrt((4 * idx.m + 2 * tn + 3) / R**3) * u**tn
              * jacobi_eval(idx.m, 0.0, tn + 0.5, 2 * u * u - 1))
    yv = vector_spherical_harmonics(idx.type_i, idx.n, safe)
    return radial[..., None] * yv[..., harmonic_index(idx.n, idx.j), :]


def basis_bound(i, m, n, R):
    """Bound ``B^(i)_{m,n}`` of ``sum_j |g^(i)_{m,n,j}(R; x)|**2`` on the ball.

    ``(4m + 2t_n + 3)(2n + 1) / (4 pi R**3) * binom(m + t_n + 1/2, m)**2``.
    """
    _check_type_degree(i, n)
    tn = radial_exponent(i, n)
    return ((4 * m + 2 * tn + 3) * (2 * n + 1) / (4 * np.pi * R**3)
            * binom(m + tn + 0.5, m) ** 2)


def radial_gn(n, r, rho0):
    """Radial function ``G_n(r) = sqrt((2n+5)/rho0**3) (r/rho0)**(n+1)``."""
    r = np.asarray(r, dtype=float)
    if n < 0:
        raise ValueError("degree must be nonnegative")
    if np.any(r < 0) or np.any(r > rho0 * (1 + 1e-12)):
        raise DomainError("radius outside [0, rho0]")
    out = np.sqrt((2 * n + 5) / rho0**3) * (r / rho0) ** (n + 1)
    return float(out) if out.ndim == 0 else out
