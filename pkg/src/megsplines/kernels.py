"""Symbol sequences and reproducing kernels.

A symbol is the sequence ``kappa_n**-2`` weighting degree n of a Sobolev
space.  The scalar kernel lives on the basis ``G_n(r) Y_{n,j}`` and the
tensor kernels on the type-2 and type-3 ball basis with radial degree 0.
"""

from dataclasses import dataclass

import numpy as np

from .specfun import legendre_sums, vector_tensor_series, basis_bound

__all__ = [
    "KINDS",
    "KernelSymbol",
    "SummabilityReport",
    "make_symbol",
    "custom_symbol",
    "scalar_kernel",
    "scalar_kernel_series",
    "scalar_kernel_closed",
    "tensor_kernel",
    "tensor_kernel_bound",
    "summability_check",
    "sobolev_norm",
]

KINDS = ("scalar-meg", "vector-i2", "vector-i3", "data-gen-scalar", "data-gen-eeg")


def _formula(kind, h, n):
    n = np.asarray(n, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", under="ignore"):
        if kind == "scalar-meg":
            out = np.where(n > 0, h**n / np.where(n > 0, n, 1), 0.0)
        elif kind in ("vector-i2", "vector-i3"):
            out = np.where(n > 0, h**n, 0.0)
        elif kind == "data-gen-scalar":
            out = h ** (2 * n + 2) / ((2 * n + 5) * (2 * n + 1))
        elif kind == "data-gen-eeg":
            out = n * h**n
        else:
            raise ValueError(f"unknown symbol kind {kind!r}")
    return out


@dataclass(frozen=True)
class KernelSymbol:
    """Truncated symbol sequence ``kappa_n**-2``, ``n = 0..N``.

    Attributes
    ----------
    kind : str
        One of :data:`KINDS` or ``"custom"``.
    kappa_inv_sq : ndarray, shape (N+1,)
    h : float
        Free parameter of the generating formula (nan for custom).
    N : int
        Truncation degree.
    """

    kind: str
    kappa_inv_sq: np.ndarray
    h: float
    N: int

    def __post_init__(self):
        k = np.asarray(self.kappa_inv_sq, dtype=float)
        if k.ndim != 1 or k.size != self.N + 1:
            raise ValueError("kappa_inv_sq must have N+1 entries")
        if not np.all(np.isfinite(k)) or np.any(k < 0):
            raise ValueError("kappa_inv_sq must be finite and nonnegative")
        k = k.copy()
        k.setflags(write=False)
        object.__setattr__(self, "kappa_inv_sq", k)

    @property
    def degrees(self):
        return np.arange(self.N + 1)

    def sequence(self, n_max):
        """Symbol extended to degree ``n_max`` by its generating formula.

        Custom symbols have no formula and return the stored entries only.
        """
        if self.kind == "custom":
            return self.kappa_inv_sq[: n_max + 1].copy()
        return _formula(self.kind, self.h, np.arange(n_max + 1))

    def to_dict(self):
        return {"kind": self.kind, "h": self.h, "N": self.N}

    def __add__(self, other):
        if not isinstance(other, KernelSymbol) or other.N != self.N:
            return NotImplemented
        return custom_symbol(self.kappa_inv_sq + other.kappa_inv_sq)


def make_symbol(kind, h, N):
    """Symbol of the given kind.

    ``scalar-meg``: ``h**n / n``; ``vector-i2``/``vector-i3``: ``h**n``;
    ``data-gen-scalar``: ``h**(2n+2) / ((2n+5)(2n+1))``;
    ``data-gen-eeg``: ``n h**n``.  Inversion kinds have ``kappa_0**-2 = 0``.

    Examples
    --------
    >>> make_symbol("scalar-meg", 0.85, 200).kappa_inv_sq[1]
    0.85
    """
    if kind not in KINDS:
        raise ValueError(f"unknown symbol kind {kind!r}; expected one of {KINDS}")
    if not 0 < h < 1:
        raise ValueError("h must lie in (0, 1)")
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    N = int(N)
    return KernelSymbol(kind, _formula(kind, h, np.arange(N + 1)), float(h), N)


def custom_symbol(kappa_inv_sq):
    """Symbol from an explicit sequence; the degree-0 entry is set to 0."""
    k = np.array(kappa_inv_sq, dtype=float)
    k[0] = 0.0
    return KernelSymbol("custom", k, float("nan"), k.size - 1)


def _split(x):
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    xi = np.where(r[..., None] > 0, x / np.where(r > 0, r, 1.0)[..., None],
                  np.array([0.0, 0.0, 1.0]))
    return r, xi


def _check_ball(r, rho0, what="point"):
    if np.any(r > rho0 * (1 + 1e-10)):
        raise ValueError(f"{what} outside the ball of radius {rho0}")


def scalar_kernel_series(symbol, rho0, x, z):
    """Scalar kernel ``sum_n kappa_n**-2 G_n(r)G_n(|z|)(2n+1)/(4pi) P_n``."""
    r, xi = _split(x)
    rz, zeta = _split(z)
    _check_ball(r, rho0)
    _check_ball(rz, rho0)
    n = symbol.degrees
    c = symbol.kappa_inv_sq * (2 * n + 5) * (2 * n + 1) / (4 * np.pi * rho0**3)
    q = r * rz / rho0**2
    t = np.clip(np.sum(xi * zeta, axis=-1), -1.0, 1.0)
    return q * legendre_sums(c, t, q)[0]


def scalar_kernel_closed(h, rho0, x, z):
    """Closed form of the kernel of the ``data-gen-scalar`` symbol.

    ``K(x, z) = h |x||z| / (4 pi rho0**4) * D**(-1/2)`` with
    ``D = rho0**2/h**2 - 2 x.z + h**2 |x|**2 |z|**2 / rho0**2``, the
    Legendre generating function summed in closed form.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    rz = np.linalg.norm(z, axis=-1)
    D = rho0**2 / h**2 - 2 * np.sum(x * z, axis=-1) + (h * r * rz / rho0) ** 2
    if np.any(D <= 0):
        raise ArithmeticError("closed-form kernel denominator is not positive")
    return h * r * rz / (4 * np.pi * rho0**4) / np.sqrt(D)


def scalar_kernel(symbol, rho0, x, z, method="series"):
    """Scalar reproducing kernel ``K(x, z)``.

    Parameters
    ----------
    symbol : KernelSymbol
    rho0 : float
    x, z : array_like, shape (..., 3)
        Points in the ball of radius ``rho0``.
    method : {"series", "closed"}
        ``closed`` is available for the ``data-gen-scalar`` kind only.
    """
    if method == "series":
        return scalar_kernel_series(symbol, rho0, x, z)
    if method == "closed":
        if symbol.kind != "data-gen-scalar":
            raise ValueError("closed form exists for data-gen-scalar symbols only")
        return scalar_kernel_closed(symbol.h, rho0, x, z)
    raise ValueError(f"unknown method {method!r}")


def _vector_type(symbol, i):
    if i is None:
        i = {"vector-i2": 2, "vector-i3": 3, "data-gen-eeg": 2}.get(symbol.kind)
    if i not in (2, 3):
        raise ValueError("tensor kernels need type 2 or 3")
    return i


def tensor_kernel(symbol, rho0, x, y, i=None):
    """Tensor reproducing kernel ``sum_n kappa_n**-2 sum_j g(x) (x) g(y)``.

    The ball basis has radial degree 0 and type ``i`` (taken from the
    symbol kind when omitted).  Evaluated through vector addition
    theorems; the result has shape ``(..., 3, 3)``.
    """
    i = _vector_type(symbol, i)
    r, xi = _split(x)
    ry, eta = _split(y)
    _check_ball(r, rho0)
    _check_ball(ry, rho0)
    n = symbol.degrees
    q = r * ry / rho0**2
    if i == 3:
        c = symbol.kappa_inv_sq * (2 * n + 3) / rho0**3
        return vector_tensor_series(3, 3, c, xi, eta, scale=q)
    c = symbol.kappa_inv_sq * (2 * n + 1) / rho0**3
    return vector_tensor_series(2, 2, c, xi, eta, scale=q, shift=1)


def tensor_kernel_bound(symbol, rho0, i=None):
    """Pointwise bound ``sum_n kappa_n**-2 B^(i)_{0,n}`` of the tensor kernel."""
    i = _vector_type(symbol, i)
    n = symbol.degrees[1:]
    B = np.array([basis_bound(i, 0, k, rho0) for k in n])
    return float(np.sum(symbol.kappa_inv_sq[1:] * B))


@dataclass(frozen=True)
class SummabilityReport:
    """Outcome of a summability check."""

    series_value: float
    converged: bool
    terms_used: int
    tail_estimate: float


def _summability_terms(i, model, kappa):
    n = np.arange(kappa.size, dtype=float)
    rho0 = model.radii[0]
    with np.errstate(divide="ignore", invalid="ignore", under="ignore"):
        if i == 3:
            w = n / (2 * n + 3) * (rho0 / model.radii[-1]) ** (2 * n + 2)
        elif i == 2:
            w = np.where(n > 0, (2 * n + 1) ** 2 / np.where(n > 0, n, 1), 0.0) * (
                rho0 / model.radii[-2]) ** (2 * n + 2)
        else:
            w = (2 * n + 1) * (2 * n + 5) / (4 * np.pi * rho0**3)
        terms = kappa * w
    return np.where(np.isfinite(terms), terms, np.inf)


def summability_check(symbol, i, model, n_max=None, rtol=1e-14):
    """Summability of a symbol for type ``i`` on a shell model.

    Parameters
    ----------
    symbol : KernelSymbol
    i : {2, 3, "scalar"}
        Type-3 (MEG) and type-2 (EEG) conditions, or the scalar condition
        ``sum (2n+1)/(4pi) kappa_n**-2 sup G_n**2``.
    model : ShellModel
    n_max : int, optional
        Degree up to which the generating formula is followed; defaults
        to ``max(N, 5000)``.
    rtol : float
        Convergence threshold for the geometric tail estimate relative to
        the partial sum.

    Returns
    -------
    SummabilityReport
        Divergence is reported through ``converged=False``, never raised.
    """
    if i not in (2, 3, "scalar", 0):
        raise ValueError("i must be 2, 3 or 'scalar'")
    n_max = max(symbol.N, 5000) if n_max is None else n_max
    terms = _summability_terms(i, model, symbol.sequence(n_max))
    partial = np.cumsum(terms)
    for n in range(1, terms.size):
        a, b = terms[n - 1], terms[n]
        if not np.isfinite(partial[n]):
            break
        if b == 0.0:
            tail = 0.0
        elif a > 0 and b < a:
            ratio = b / a
            tail = b * ratio / (1 - ratio)
        else:
            continue
        if partial[n] > 0 and tail < rtol * partial[n]:
            return SummabilityReport(float(partial[n]), True, n + 1, float(tail))
    last = terms[-1]
    prev = terms[-2] if terms.size > 1 else np.nan
    if np.isfinite(last) and 0 < last < prev:
        ratio = last / prev
        tail = last * ratio / (1 - ratio)
    else:
        tail = np.inf
    return SummabilityReport(float(partial[-1]), False, int(terms.size), float(tail))


def sobolev_norm(coefficients, degrees, kappa_inv_sq):
    """Sobolev norm ``sqrt(sum kappa_n**2 F_n**2)`` of a coefficient vector.

    Parameters
    ----------
    coefficients : array_like
        Fourier coefficients ``F``.
    degrees : array_like of int
        Degree n attached to each coefficient.
    kappa_inv_sq : array_like
        Symbol ``kappa_n**-2`` indexed by degree; zero entries must meet
        zero coefficients.
    """
    F = np.asarray(coefficients, dtype=float)
    k = np.asarray(kappa_inv_sq, dtype=float)[np.asarray(degrees)]
    if np.any((k == 0) & (F != 0)):
        return float("inf")
    with np.errstate(divide="ignore"):
        w = np.where(k > 0, 1.0 / np.where(k > 0, k, 1.0), 0.0)
    return float(np.sqrt(np.sum(w * F**2)))
