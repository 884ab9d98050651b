"""Spline matrices of the MEG and EEG functionals.

Each entry is the double application of functionals to a reproducing
kernel, written as a Legendre series in ``eta_k . eta_l`` and summed with
Clenshaw's algorithm.  Scalar and vector MEG share one order-collapsed
geometric factor and differ only in the degree weights.
"""

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .forward import SensorSet, _beta_array, _meg_normals
from .headmodel import MU0
from .kernels import KernelSymbol
from .specfun import legendre_sums

__all__ = [
    "SplineSystem",
    "assemble_scalar_meg",
    "assemble_vector_meg",
    "assemble_vector_eeg",
    "meg_gram",
    "scalar_meg_weights",
    "vector_meg_weights",
    "condition_report",
    "export_matrix",
    "import_matrix",
    "export_matrix_csv",
]

MAGIC = b"SPLM"
VERSION = 1


@dataclass(frozen=True)
class SplineSystem:
    """Assembled spline matrix with its data and provenance.

    Attributes
    ----------
    matrix : ndarray, shape (l, l)
    data : ndarray, shape (l,) or None
    modality : {"MEG", "EEG"}
    method : {"scalar-spline", "vector-spline"}
    symbol : KernelSymbol
    sensors : SensorSet
    assembly_route : {"svd-series", "integral-oracle"}
    diagnostics : dict
    """

    matrix: np.ndarray
    data: np.ndarray
    modality: str
    method: str
    symbol: KernelSymbol
    sensors: SensorSet
    assembly_route: str = "svd-series"
    diagnostics: dict = field(default_factory=dict)

    @property
    def size(self):
        return self.matrix.shape[0]

    def with_data(self, g):
        g = np.asarray(g, dtype=float)
        if g.shape != (self.size,):
            raise ValueError(f"data must have shape ({self.size},)")
        return replace(self, data=g)

    def check_structure(self, sym_tol=1e-12, psd_tol=1e-10):
        """Symmetry and semidefiniteness diagnostics of the matrix."""
        M = self.matrix
        scale = np.abs(M).max()
        asym = float(np.abs(M - M.T).max() / scale) if scale > 0 else 0.0
        ev = np.linalg.eigvalsh(0.5 * (M + M.T))
        return {"asymmetry": asym, "symmetric": asym <= sym_tol,
                "min_eig": float(ev[0]), "max_eig": float(ev[-1]),
                "psd": bool(ev[0] >= -psd_tol * max(ev[-1], 0.0))}


def scalar_meg_weights(symbol):
    """Degree weights ``4(2n+5)/((n+1)(2n+1)) kappa_n**-2`` of scalar MEG."""
    n = symbol.degrees
    return np.where(n >= 1, 4 * (2 * n + 5) / ((n + 1) * (2 * n + 1)) * symbol.kappa_inv_sq, 0.0)


def vector_meg_weights(symbol):
    """Degree weights ``n kappa_n**-2 / ((2n+1)(2n+3))`` of vector MEG."""
    n = symbol.degrees
    return np.where(n >= 1, n * symbol.kappa_inv_sq / ((2 * n + 1) * (2 * n + 3)), 0.0)


def _pair_index(count, rows=None, cols=None):
    if rows is None and cols is None:
        return np.triu_indices(count)
    rows = np.arange(count) if rows is None else np.asarray(rows)
    cols = np.arange(count) if cols is None else np.asarray(cols)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return rr.ravel(), cc.ravel()


def meg_gram(sensors, weights, rho0, prefactor, rows=None, cols=None):
    """Order-collapsed MEG double functional.

    Computes ``prefactor * sum_n w_n (rho0**2/(s_k s_l))**(n+2)
    sum_j (nu_k . y1_{n,j}(eta_k)) (nu_l . y1_{n,j}(eta_l))`` where the
    order sum equals, with ``t = eta_k . eta_l``,
    ``[(n+1) P_n A - P_n' B]/(4 pi) + [P_n'' C + P_n' D]/(4 pi (n+1))``.

    Parameters
    ----------
    sensors : SensorSet
    weights : array_like, shape (N+1,)
    rho0, prefactor : float
    rows, cols : array_like of int, optional
        Sub-block to compute; the full symmetric matrix when omitted.

    Returns
    -------
    ndarray
        ``(l, l)`` matrix, or ``(len(rows), len(cols))`` for a block.
    """
    nu = _meg_normals(sensors)
    eta = sensors.directions
    s = sensors.radii
    w = np.asarray(weights, dtype=float)
    n = np.arange(w.size)
    full = rows is None and cols is None
    k, l = _pair_index(sensors.count, rows, cols)
    xi, et = eta[k], eta[l]
    nk, nl = nu[k], nu[l]
    t = np.clip(np.sum(xi * et, axis=1), -1.0, 1.0)
    q = rho0**2 / (s[k] * s[l])
    a = et - t[:, None] * xi
    b = xi - t[:, None] * et
    dot = lambda u, v: np.sum(u * v, axis=1)  # noqa: E731
    A = dot(nk, xi) * dot(nl, et)
    B = dot(nk, xi) * dot(nl, b) + dot(nk, a) * dot(nl, et)
    C = dot(nk, a) * dot(nl, b)
    D = dot(nk, nl) - dot(nk, xi) * dot(nl, xi) - dot(nk, a) * dot(nl, et)
    S0 = legendre_sums(w * (n + 1), t, q)[0]
    S1 = legendre_sums(w, t, q, max_order=1)[1]
    _, T1, T2 = legendre_sums(w / (n + 1), t, q, max_order=2)
    vals = prefactor * q**2 / (4 * np.pi) * (A * S0 - B * S1 + C * T2 + D * T1)
    if full:
        M = np.zeros((sensors.count, sensors.count))
        M[k, l] = vals
        M[l, k] = vals
        return M
    nrows = sensors.count if rows is None else len(np.atleast_1d(rows))
    return vals.reshape(nrows, -1)


def _check_meg(sensors, symbol, kinds):
    if not isinstance(sensors, SensorSet) or sensors.modality != "MEG":
        raise ValueError("MEG assembly needs MEG sensors")
    if symbol.kind not in kinds:
        raise ValueError(f"symbol kind {symbol.kind!r} not usable here; expected {kinds}")


def assemble_scalar_meg(sensors, symbol, rho0, mu0=MU0, data=None):
    """Spline matrix of the scalar MEG functionals.

    ``M[l, k] = mu0**2/rho0**3 sum_n 4(2n+5)/((n+1)(2n+1)) kappa_n**-2
    (rho0**2/(s_k s_l))**(n+2) sum_j (nu_k.y1(eta_k))(nu_l.y1(eta_l))``.
    """
    _check_meg(sensors, symbol, ("scalar-meg", "data-gen-scalar", "custom"))
    M = meg_gram(sensors, scalar_meg_weights(symbol), rho0, mu0**2 / rho0**3)
    return SplineSystem(M, None if data is None else np.asarray(data, float), "MEG",
                        "scalar-spline", symbol, sensors,
                        diagnostics={"rho0": rho0, "mu0": mu0})


def assemble_vector_meg(sensors, symbol, rho0, mu0=MU0, data=None):
    """Spline matrix of the vector MEG functionals (type-3 tensor kernel).

    ``M[l, k] = mu0**2/rho0 sum_n n kappa_n**-2/((2n+1)(2n+3))
    (rho0**2/(s_l s_k))**(n+2) sum_j (nu_l.y1(eta_l))(nu_k.y1(eta_k))``.
    """
    _check_meg(sensors, symbol, ("vector-i3", "custom"))
    M = meg_gram(sensors, vector_meg_weights(symbol), rho0, mu0**2 / rho0)
    return SplineSystem(M, None if data is None else np.asarray(data, float), "MEG",
                        "vector-spline", symbol, sensors,
                        diagnostics={"rho0": rho0, "mu0": mu0})


def assemble_vector_eeg(sensors, symbol, model, beta, data=None):
    """Spline matrix of the vector EEG functionals (type-2 tensor kernel).

    ``M[l, k] = (4pi)**-1 sum_n kappa_n**-2 (2n+1)/(n rho0) beta_n**2
    (rho0**2/(s_l s_k))**(n+1) b_n(s_l) b_n(s_k) P_n(eta_l.eta_k)`` with
    ``b_n(s) = (n+1)(s/rho_L)**(2n+1) + n``.
    """
    if not isinstance(sensors, SensorSet) or sensors.modality != "EEG":
        raise ValueError("EEG assembly needs EEG sensors")
    if symbol.kind not in ("vector-i2", "data-gen-eeg", "custom"):
        raise ValueError(f"symbol kind {symbol.kind!r} not usable for EEG")
    rho0, rhoL = model.radii[0], model.radii[-1]
    b = _beta_array(beta, symbol.N)
    n = symbol.degrees
    w = np.where(n >= 1, symbol.kappa_inv_sq * (2 * n + 1) * b**2
                 / (np.maximum(n, 1) * rho0), 0.0)
    k, l = np.triu_indices(sensors.count)
    eta = sensors.directions
    s = sensors.radii
    t = np.clip(np.sum(eta[k] * eta[l], axis=1), -1.0, 1.0)
    q = rho0**2 / (s[k] * s[l])
    pk, pl = (s[k] / rhoL) ** 2, (s[l] / rhoL) ** 2
    ek, el = s[k] / rhoL, s[l] / rhoL
    # b_k b_l = (n+1)^2 (pk pl)^n ek el + n(n+1)(pk^n ek + pl^n el) + n^2
    vals = np.zeros(t.shape)
    for coef, scale, pre in (
            (w * (n + 1) ** 2, q * pk * pl, ek * el),
            (w * n * (n + 1), q * pk, ek),
            (w * n * (n + 1), q * pl, el),
            (w * n**2, q, np.ones_like(q))):
        vals += pre * q * legendre_sums(coef, t, scale)[0]
    vals /= 4 * np.pi
    M = np.zeros((sensors.count, sensors.count))
    M[k, l] = vals
    M[l, k] = vals
    return SplineSystem(M, None if data is None else np.asarray(data, float), "EEG",
                        "vector-spline", symbol, sensors,
                        diagnostics={"rho0": rho0, "rhoL": rhoL})


def condition_report(system):
    """2-norm condition number and extreme eigenvalues of a symmetric matrix."""
    M = system.matrix if isinstance(system, SplineSystem) else np.asarray(system, float)
    ev = np.linalg.eigvalsh(0.5 * (M + M.T))
    lo, hi = float(ev[0]), float(ev[-1])
    absmin = float(np.abs(ev).min())
    cond = float(np.abs(ev).max() / absmin) if absmin > 0 else float("inf")
    return {"cond_2": cond, "min_eig": lo, "max_eig": hi}


def export_matrix(path, system):
    """Binary export: 16-byte header (magic, version, l) then float64 rows."""
    M = system.matrix if isinstance(system, SplineSystem) else np.asarray(system, float)
    ell = M.shape[0]
    with Path(path).open("wb") as fh:
        fh.write(MAGIC + struct.pack("<IQ", VERSION, ell))
        fh.write(np.ascontiguousarray(M, dtype="<f8").tobytes(order="C"))


def import_matrix(path):
    """Read a matrix written by :func:`export_matrix`."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a spline matrix file")
    version, ell = struct.unpack("<IQ", raw[4:16])
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    body = np.frombuffer(raw[16:], dtype="<f8")
    if body.size != ell * ell:
        raise ValueError(f"{path}: truncated matrix body")
    return body.reshape(ell, ell).astype(float)


def export_matrix_csv(path, system):
    """CSV export of the matrix for inspection."""
    M = system.matrix if isinstance(system, SplineSystem) else np.asarray(system, float)
    np.savetxt(path, M, delimiter=",", fmt="%.17g")
