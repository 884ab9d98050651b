"""Evaluation of splines on spherical grids and reconstruction metrics."""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .forward import (meg_functional_applied_to_scalar_kernel,
                      meg_functional_applied_to_tensor_kernel,
                      eeg_functional_applied_to_tensor_kernel,
                      toroidal_series_field)
from .headmodel import MU0

__all__ = [
    "SphereGrid",
    "FieldSamples",
    "eval_scalar_spline",
    "eval_vector_spline",
    "scalar_to_current",
    "nrmse",
    "relative_residual",
    "hnorm_of_spline",
    "export_field",
    "export_deviation",
]

_POINTS_PER_CALL = 4000


@dataclass(frozen=True)
class SphereGrid:
    """Nodes on a sphere of given radius with area weights.

    Attributes
    ----------
    radius : float
    theta, phi : ndarray
        Colatitudes and longitudes of the tensor-product grid.
    weights : ndarray, shape (len(theta) * len(phi),)
        Positive weights summing to ``4 pi``.
    """

    radius: float
    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    kind: str = "equiangular"

    @classmethod
    def equiangular(cls, radius, n_theta=181, n_phi=360):
        """Lat-lon grid including both poles; cell-area weights.

        Each node owns the band between the midpoints to its neighbours in
        colatitude and one longitude cell, so the weights add up to
        ``4 pi`` exactly.
        """
        if n_theta < 2 or n_phi < 1:
            raise ValueError("need n_theta >= 2 and n_phi >= 1")
        theta = np.linspace(0.0, np.pi, n_theta)
        phi = 2 * np.pi * np.arange(n_phi) / n_phi
        edges = np.concatenate([[0.0], 0.5 * (theta[1:] + theta[:-1]), [np.pi]])
        band = np.cos(edges[:-1]) - np.cos(edges[1:])
        w = np.repeat(band * (2 * np.pi / n_phi), n_phi)
        return cls(float(radius), theta, phi, w, "equiangular")

    @classmethod
    def gauss(cls, radius, n_theta=90, n_phi=180):
        """Gauss-Legendre nodes in ``cos theta``, uniform in longitude."""
        x, wx = np.polynomial.legendre.leggauss(n_theta)
        theta = np.arccos(x[::-1])
        phi = 2 * np.pi * np.arange(n_phi) / n_phi
        w = np.repeat(wx[::-1] * (2 * np.pi / n_phi), n_phi)
        return cls(float(radius), theta, phi, w, "gauss")

    @classmethod
    def default(cls, rho0):
        return cls.equiangular(0.99 * rho0)

    @property
    def size(self):
        return self.theta.size * self.phi.size

    @property
    def angles(self):
        th, ph = np.meshgrid(self.theta, self.phi, indexing="ij")
        return th.ravel(), ph.ravel()

    @property
    def nodes(self):
        th, ph = self.angles
        st = np.sin(th)
        return np.stack([st * np.cos(ph), st * np.sin(ph), np.cos(th)], axis=-1)

    @property
    def points(self):
        return self.radius * self.nodes

    def to_dict(self):
        return {"radius": self.radius, "n_theta": int(self.theta.size),
                "n_phi": int(self.phi.size), "kind": self.kind}


@dataclass(frozen=True)
class FieldSamples:
    """Values of a scalar or vector field at the nodes of a grid."""

    kind: str
    values: np.ndarray
    grid: SphereGrid
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("scalar", "vector"):
            raise ValueError("kind must be 'scalar' or 'vector'")
        v = np.asarray(self.values, dtype=float)
        want = (self.grid.size,) if self.kind == "scalar" else (self.grid.size, 3)
        if v.shape != want:
            raise ValueError(f"values of shape {v.shape}, expected {want}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def magnitude(self):
        return np.abs(self.values) if self.kind == "scalar" else np.linalg.norm(
            self.values, axis=-1)

    def __sub__(self, other):
        _check_pair(self, other)
        return FieldSamples(self.kind, self.values - other.values, self.grid,
                            dict(self.meta))


def _check_grid(grid, rho0):
    if grid.radius > rho0 * (1 + 1e-12):
        raise ValueError(f"grid radius {grid.radius} exceeds rho0 = {rho0}")


def _contract(alpha, columns_of, points, vector):
    """``alpha @ columns`` evaluated in chunks of points."""
    a = np.asarray(alpha, dtype=float)
    single = a.ndim == 1
    a2 = a[None, :] if single else a
    tail = (3,) if vector else ()
    out = np.empty((a2.shape[0], points.shape[0]) + tail)
    if not np.any(a2):
        out[...] = 0.0
    else:
        for start in range(0, points.shape[0], _POINTS_PER_CALL):
            sl = slice(start, start + _POINTS_PER_CALL)
            cols = columns_of(points[sl])
            out[:, sl] = np.tensordot(a2, cols, axes=(1, 0))
    return out[0] if single else out


def _check_alpha(alpha, sensors):
    a = np.asarray(alpha, dtype=float)
    if a.shape[-1] != sensors.count:
        raise ValueError(f"alpha has {a.shape[-1]} entries for {sensors.count} sensors")
    return a


def _active(a, sensors):
    """Drop sensors whose coefficient vanishes in every stacked alpha."""
    used = np.any(np.atleast_2d(a) != 0, axis=0)
    if used.all() or not used.any():
        return a, sensors
    return a[..., used], sensors.subset(np.nonzero(used)[0])


def eval_scalar_spline(alpha, sensors, symbol, grid, rho0, mu0=MU0):
    """Scalar MEG spline ``S(x) = sum_k alpha_k A^k K(x, .)`` on a grid.

    ``alpha`` may also be a stack of shape ``(c, l)``; a raw array of
    values is then returned instead of :class:`FieldSamples`.
    """
    a, sensors = _active(_check_alpha(alpha, sensors), sensors)
    _check_grid(grid, rho0)
    vals = _contract(a, lambda x: meg_functional_applied_to_scalar_kernel(
        sensors, x, symbol, rho0, mu0), grid.points, vector=False)
    if a.ndim > 1:
        return vals
    return FieldSamples("scalar", vals, grid, {"modality": "MEG", "method": "scalar-spline"})


def eval_vector_spline(alpha, sensors, symbol, grid, modality, rho0=None, model=None,
                       beta=None, mu0=MU0):
    """Vector spline ``s(x) = sum_k alpha_k A_k k(., x)`` on a grid.

    MEG uses the type-3 kernel and needs ``rho0``; EEG uses the type-2
    kernel and needs ``model`` and ``beta``.
    """
    a, sensors = _active(_check_alpha(alpha, sensors), sensors)
    if modality == "MEG":
        if rho0 is None:
            rho0 = model.rho0
        _check_grid(grid, rho0)
        cols = lambda x: meg_functional_applied_to_tensor_kernel(  # noqa: E731
            sensors, x, symbol, rho0, mu0)
    elif modality == "EEG":
        if model is None:
            raise ValueError("EEG evaluation needs the shell model")
        _check_grid(grid, model.rho0)
        cols = lambda x: eeg_functional_applied_to_tensor_kernel(  # noqa: E731
            sensors, x, symbol, model, beta)
    else:
        raise ValueError("modality must be 'MEG' or 'EEG'")
    vals = _contract(a, cols, grid.points, vector=True)
    if a.ndim > 1:
        return vals
    return FieldSamples("vector", vals, grid, {"modality": modality, "method": "vector-spline"})


def scalar_current_coefficients(symbol):
    """Degree weights ``kappa_n**-2 (2n+3)(2n+5)/(n(n+1))`` of the current transfer."""
    n = symbol.degrees
    return np.where(n >= 1, symbol.kappa_inv_sq * (2 * n + 3) * (2 * n + 5)
                    / (np.maximum(n, 1) * (n + 1)), 0.0)


def scalar_to_current(alpha, sensors, symbol, grid, rho0, mu0=MU0):
    """Minimum-norm current belonging to a scalar MEG spline.

    ``J(x) = -4 mu0/rho0**2 sum_{n,j} (2n+3)(2n+5)/((n+1) sqrt(n(2n+1)))
    kappa_n**-2 (sum_k alpha_k r**n/s_k**(n+2) nu_k . y1_{n,j}(eta_k))
    y3_{n,j}(xi)``, with the order sum collapsed.
    """
    if sensors.modality != "MEG":
        raise ValueError("scalar_to_current needs MEG sensors")
    a, sensors = _active(_check_alpha(alpha, sensors), sensors)
    _check_grid(grid, rho0)
    coef = scalar_current_coefficients(symbol)
    cols = lambda x: toroidal_series_field(  # noqa: E731
        sensors, x, coef, rho0, prefactor=-mu0 / (np.pi * rho0**2))
    vals = _contract(a, cols, grid.points, vector=True)
    if a.ndim > 1:
        return vals
    return FieldSamples("vector", vals, grid, {"modality": "MEG", "method": "scalar-spline"})


def _check_pair(a, b):
    if a.kind != b.kind:
        raise ValueError("fields of different kinds")
    if a.values.shape != b.values.shape:
        raise ValueError("fields on different grids")


def _weighted_ms(values, weights):
    sq = values**2 if values.ndim == 1 else np.sum(values**2, axis=-1)
    return float(np.sum(weights * sq) / np.sum(weights))


def nrmse(approx, exact):
    """Weighted RMS of ``approx - exact`` relative to the RMS of ``exact``.

    Examples
    --------
    >>> g = SphereGrid.equiangular(1.0, 5, 8)
    >>> e = FieldSamples("scalar", np.ones(g.size), g)
    >>> round(nrmse(FieldSamples("scalar", 1.1 * np.ones(g.size), g), e), 12)
    0.1
    """
    _check_pair(approx, exact)
    w = exact.grid.weights
    ref = _weighted_ms(exact.values, w)
    if ref == 0:
        raise ValueError("exact field vanishes; NRMSE undefined")
    return float(np.sqrt(_weighted_ms(approx.values - exact.values, w) / ref))


def relative_residual(system, alpha, data=None):
    """``||M alpha - g|| / ||g||``."""
    g = np.asarray(system.data if data is None else data, dtype=float)
    gn = np.linalg.norm(g)
    if gn == 0:
        raise ValueError("data vector vanishes")
    return float(np.linalg.norm(system.matrix @ np.asarray(alpha, float) - g) / gn)


def hnorm_of_spline(system, alpha, tol=1e-10):
    """Norm of the spline in its Hilbert space, ``sqrt(alpha^T M alpha)``."""
    M = system.matrix if hasattr(system, "matrix") else np.asarray(system, float)
    a = np.asarray(alpha, dtype=float)
    qf = float(a @ M @ a)
    scale = np.linalg.norm(M, 2) * float(a @ a)
    if qf < -tol * scale:
        raise ArithmeticError(f"negative quadratic form {qf:g}")
    return float(np.sqrt(max(qf, 0.0)))


def export_field(path, samples, meta=None):
    """CSV with ``theta, phi`` and values, plus a JSON metadata sidecar.

    Vector fields carry their three components and the magnitude.
    """
    path = Path(path)
    th, ph = samples.grid.angles
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        if samples.kind == "scalar":
            w.writerow(["theta", "phi", "value"])
            for row in zip(th, ph, samples.values):
                w.writerow([repr(float(v)) for v in row])
        else:
            w.writerow(["theta", "phi", "jx", "jy", "jz", "magnitude"])
            mag = samples.magnitude
            for a, b, v, m in zip(th, ph, samples.values, mag):
                w.writerow([repr(float(a)), repr(float(b))]
                           + [repr(float(c)) for c in v] + [repr(float(m))])
    info = {"grid": samples.grid.to_dict(), "kind": samples.kind}
    info.update(samples.meta)
    if meta:
        info.update(meta)
    path.with_suffix(".json").write_text(json.dumps(info, indent=2, default=float))
    return path


def export_deviation(path, approx, exact, meta=None):
    """Export ``approx - exact`` in the field format."""
    info = {"deviation": True, "nrmse": nrmse(approx, exact)}
    if meta:
        info.update(meta)
    return export_field(path, approx - exact, info)
