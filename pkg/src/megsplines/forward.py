"""Forward functionals of MEG and EEG on the multiple-shell model.

Two levels are provided.  Coefficient-level functionals map a current
given by its coefficients in the ball basis to sensor data, explicitly
summing over orders j.  Kernel-level functionals apply a functional to a
reproducing kernel and return the spline building blocks at arbitrary
evaluation points; these collapse the order sums with addition theorems.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .headmodel import MU0, BetaCoefficients, ModelError
from .specfun import (BasisIndex, harmonic_index, legendre_sums,
                      spherical_harmonics, vector_spherical_harmonics)

__all__ = [
    "SensorSet",
    "CoefficientField",
    "load_sensors",
    "save_sensors",
    "meg_functional_vector",
    "eeg_functional_vector",
    "meg_design_matrix",
    "eeg_design_matrix",
    "scalar_meg_design_matrix",
    "meg_functional_applied_to_scalar_kernel",
    "meg_functional_applied_to_tensor_kernel",
    "eeg_functional_applied_to_tensor_kernel",
    "toroidal_series_field",
    "tail_bound",
]

MODALITIES = ("MEG", "EEG")
_UNIT_TOL = 1e-10


@dataclass(frozen=True)
class SensorSet:
    """Measurement positions and, for MEG, sensor normals.

    Parameters
    ----------
    modality : {"MEG", "EEG"}
    positions : array_like, shape (l, 3)
        Sensor positions ``y_k`` in metres.
    normals : array_like, shape (l, 3), optional
        Unit normals ``nu(y_k)``; required for MEG.
    """

    modality: str
    positions: np.ndarray
    normals: np.ndarray = None

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ValueError(f"modality must be one of {MODALITIES}")
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] == 0:
            raise ValueError("positions must have shape (l, 3) with l >= 1")
        if np.any(np.linalg.norm(pos, axis=1) == 0):
            raise ValueError("sensor positions must be away from the origin")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        if self.modality == "MEG" and self.normals is None:
            raise ValueError("MEG sensors need normals")
        if self.normals is not None:
            nrm = np.array(self.normals, dtype=float)
            if nrm.shape != pos.shape:
                raise ValueError("normals must match positions in shape")
            if np.any(np.abs(np.linalg.norm(nrm, axis=1) - 1) > _UNIT_TOL):
                raise ValueError("sensor normals must be unit vectors")
            nrm.setflags(write=False)
            object.__setattr__(self, "normals", nrm)

    @property
    def count(self):
        return self.positions.shape[0]

    def __len__(self):
        return self.count

    @property
    def radii(self):
        return np.linalg.norm(self.positions, axis=1)

    @property
    def directions(self):
        return self.positions / self.radii[:, None]

    def subset(self, indices):
        idx = np.asarray(indices, dtype=int)
        nrm = None if self.normals is None else self.normals[idx]
        return SensorSet(self.modality, self.positions[idx], nrm)

    def validate(self, model):
        """Check the sensor radii against the head model.

        MEG sensors must lie outside the head, EEG sensors on the scalp.
        """
        s = self.radii
        rhoL = model.radii[-1]
        if self.modality == "MEG" and np.any(s < rhoL * (1 - 1e-12)):
            raise ModelError(f"MEG sensors must satisfy |y| >= {rhoL}")
        if self.modality == "EEG" and np.any(np.abs(s - rhoL) > 1e-9 * rhoL):
            raise ModelError(f"EEG sensors must lie on the scalp |y| = {rhoL}")
        return self


def load_sensors(path, modality=None):
    """Read a sensor CSV with header ``modality,x,y,z[,nx,ny,nz]``.

    Normals are normalised on load.  All rows must share one modality.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"sensor file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        fields = [f.strip() for f in (reader.fieldnames or [])]
        if fields[:4] != ["modality", "x", "y", "z"]:
            raise ValueError(f"{path}: header must start with modality,x,y,z")
        has_normals = fields[4:7] == ["nx", "ny", "nz"]
        mods, pos, nrm = set(), [], []
        for lineno, row in enumerate(reader, start=2):
            row = {k.strip(): v for k, v in row.items()}
            try:
                mods.add(row["modality"].strip().upper())
                pos.append([float(row[c]) for c in "xyz"])
                if has_normals and row.get("nx", "").strip():
                    nrm.append([float(row[c]) for c in ("nx", "ny", "nz")])
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    if len(mods) != 1:
        raise ValueError(f"{path}: expected a single modality, found {sorted(mods)}")
    mod = mods.pop()
    if modality is not None and mod != modality:
        raise ValueError(f"{path}: modality {mod} but {modality} requested")
    normals = None
    if nrm:
        if len(nrm) != len(pos):
            raise ValueError(f"{path}: normals given for some rows only")
        normals = np.asarray(nrm)
        normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    return SensorSet(mod, np.asarray(pos), normals)


def save_sensors(path, sensors):
    """Write a :class:`SensorSet` in the CSV sensor format."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        if sensors.normals is None:
            w.writerow(["modality", "x", "y", "z"])
            for p in sensors.positions:
                w.writerow([sensors.modality] + [repr(float(v)) for v in p])
        else:
            w.writerow(["modality", "x", "y", "z", "nx", "ny", "nz"])
            for p, q in zip(sensors.positions, sensors.normals):
                w.writerow([sensors.modality] + [repr(float(v)) for v in (*p, *q)])
    return Path(path)


@dataclass
class CoefficientField:
    """Finitely supported coefficients in the ball basis.

    ``entries`` maps :class:`BasisIndex` to a real coefficient.
    """

    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for key, value in dict(self.entries).items():
            idx = key if isinstance(key, BasisIndex) else BasisIndex(*key)
            clean[idx] = clean.get(idx, 0.0) + float(value)
        self.entries = clean

    def __add__(self, other):
        out = dict(self.entries)
        for k, v in other.entries.items():
            out[k] = out.get(k, 0.0) + v
        return CoefficientField(out)

    def __mul__(self, c):
        return CoefficientField({k: c * v for k, v in self.entries.items()})

    __rmul__ = __mul__

    def restricted(self, type_i, m=0, N=None):
        """Entries of one type and radial degree, optionally up to degree N."""
        return {k: v for k, v in self.entries.items()
                if k.type_i == type_i and k.m == m and (N is None or k.n <= N)}


def _meg_normals(sensors):
    if sensors.modality != "MEG":
        raise ValueError("MEG functional needs MEG sensors")
    return sensors.normals


def _beta_array(beta, N):
    if beta is None:
        raise ModelError("EEG functionals need transfer coefficients beta")
    if isinstance(beta, BetaCoefficients):
        return beta.padded(N)
    b = np.asarray(beta, dtype=float)
    if b.size < N:
        raise ModelError(f"beta known up to n={b.size}, requested {N}")
    return np.concatenate([[0.0], b[:N]])


def meg_functional_vector(J, sensors, rho0, mu0=MU0, N=None):
    """MEG data of a current given by ball-basis coefficients.

    Only type-3 coefficients with radial degree 0 contribute; every other
    coefficient is silent.

    Returns
    -------
    ndarray, shape (l,)
        Flux densities in tesla.
    """
    nu = _meg_normals(sensors)
    active = J.restricted(3, 0, N)
    g = np.zeros(sensors.count)
    if not active:
        return g
    nmax = max(k.n for k in active)
    s = sensors.radii
    eta = sensors.directions
    Y1 = vector_spherical_harmonics(1, nmax, eta)
    for idx, coef in active.items():
        n = idx.n
        fac = -mu0 * np.sqrt(n * rho0 / ((2 * n + 1) * (2 * n + 3)))
        proj = np.sum(nu * Y1[:, harmonic_index(n, idx.j)], axis=1)
        g += fac * coef * (rho0 / s) ** (n + 1) / s * proj
    return g


def _eeg_bracket(n, s, rhoL):
    return (n + 1) * (s / rhoL) ** (2 * n + 1) + n


def eeg_functional_vector(J, sensors, model, beta, N=None):
    """EEG data of a current given by ball-basis coefficients.

    Only type-2 coefficients with radial degree 0 contribute.

    Returns
    -------
    ndarray, shape (l,)
        Potentials in the units fixed by ``beta``.
    """
    if sensors.modality != "EEG":
        raise ValueError("EEG functional needs EEG sensors")
    active = J.restricted(2, 0, N)
    if beta is None:
        raise ModelError("EEG functionals need transfer coefficients beta")
    g = np.zeros(sensors.count)
    if not active:
        return g
    nmax = max(k.n for k in active)
    b = _beta_array(beta, nmax)
    rho0, rhoL = model.radii[0], model.radii[-1]
    s = sensors.radii
    Y = spherical_harmonics(nmax, sensors.directions)
    for idx, coef in active.items():
        n = idx.n
        g += (coef * b[n] / np.sqrt(n * rho0) * _eeg_bracket(n, s, rhoL)
              * (rho0 / s) ** (n + 1) * Y[:, harmonic_index(n, idx.j)])
    return g


def _columns(N):
    """Basis indices (n, j), n = 1..N, in column order of the design matrices."""
    return [(n, j) for n in range(1, N + 1) for j in range(1, 2 * n + 2)]


def meg_design_matrix(sensors, rho0, N, mu0=MU0):
    """Matrix of the MEG functionals on ``g^(3)_{0,n,j}``, n = 1..N.

    Columns follow ``(n, j)`` lexicographically, i.e. column
    ``n**2 + j - 2``.
    """
    nu = _meg_normals(sensors)
    s = sensors.radii[:, None]
    n = np.repeat(np.arange(1, N + 1), 2 * np.arange(1, N + 1) + 1)[None, :]
    Y1 = vector_spherical_harmonics(1, N, sensors.directions)[:, 1:]
    proj = np.einsum("ka,kpa->kp", nu, Y1)
    fac = -mu0 * np.sqrt(n * rho0 / ((2 * n + 1) * (2 * n + 3)))
    return fac * (rho0 / s) ** (n + 1) / s * proj


def scalar_meg_design_matrix(sensors, rho0, N, mu0=MU0):
    """Matrix of the scalar MEG functionals on ``G_n Y_{n,j}``, n = 1..N."""
    nu = _meg_normals(sensors)
    s = sensors.radii[:, None]
    n = np.repeat(np.arange(1, N + 1), 2 * np.arange(1, N + 1) + 1)[None, :]
    Y1 = vector_spherical_harmonics(1, N, sensors.directions)[:, 1:]
    proj = np.einsum("ka,kpa->kp", nu, Y1)
    fac = -2 * mu0 * np.sqrt((2 * n + 5) / rho0**3) / np.sqrt((2 * n + 1) * (n + 1))
    return fac * (rho0 / s) ** (n + 2) * proj


def eeg_design_matrix(sensors, model, beta, N):
    """Matrix of the EEG functionals on ``g^(2)_{0,n,j}``, n = 1..N."""
    rho0, rhoL = model.radii[0], model.radii[-1]
    b = _beta_array(beta, N)
    s = sensors.radii[:, None]
    n = np.repeat(np.arange(1, N + 1), 2 * np.arange(1, N + 1) + 1)[None, :]
    Y = spherical_harmonics(N, sensors.directions)[:, 1:]
    return (b[n] / np.sqrt(n * rho0) * _eeg_bracket(n, s, rhoL)
            * (rho0 / s) ** (n + 1) * Y)


# ---------------------------------------------------------------------------
# Functionals applied to reproducing kernels
# ---------------------------------------------------------------------------

def _points(x, rho0):
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1, 3)
    r = np.linalg.norm(flat, axis=1)
    if np.any(r > rho0 * (1 + 1e-10)):
        raise ValueError(f"evaluation points must lie in the ball of radius {rho0}")
    xi = np.where(r[:, None] > 0, flat / np.where(r > 0, r, 1.0)[:, None],
                  np.array([0.0, 0.0, 1.0]))
    return x.shape[:-1], r, xi


def _trim(coefficients, smax, order=2, rtol=1e-18):
    """Drop trailing degrees whose contribution is below rounding level."""
    c = np.asarray(coefficients, dtype=float)
    if smax >= 1 or c.size < 3:
        return c
    n = np.arange(c.size)
    with np.errstate(under="ignore", divide="ignore"):
        mag = np.abs(c) * np.exp(n * np.log(max(smax, 1e-300))) * (n + 1.0) ** (2 * order)
    top = mag.max()
    if top == 0:
        return c[:1]
    keep = np.nonzero(mag > rtol * top)[0]
    return c[: max(keep[-1] + 1, 2)]


def _chunks(npts, nsens, budget=400_000):
    step = max(1, budget // max(nsens, 1))
    for start in range(0, npts, step):
        yield slice(start, min(npts, start + step))


def tail_bound(sensors, rho0, N):
    """Geometric truncation bound ``max_k (rho0/s_k)**(2N)``."""
    return float(np.max((rho0 / sensors.radii) ** (2 * N)))


def meg_functional_applied_to_scalar_kernel(sensors, x, symbol, rho0, mu0=MU0):
    """Scalar MEG functionals applied to the scalar kernel ``K(x, .)``.

    Parameters
    ----------
    sensors : SensorSet
        MEG sensors.
    x : array_like, shape (..., 3)
        Evaluation points in the ball.
    symbol : KernelSymbol
    rho0 : float
    mu0 : float

    Returns
    -------
    ndarray, shape (l,) + x.shape[:-1]
        Entry ``[k, p]`` is the k-th functional applied to the kernel with
        its first argument at ``x[p]``.
    """
    nu = _meg_normals(sensors)
    shape, r, xi = _points(x, rho0)
    s = sensors.radii
    eta = sensors.directions
    n = symbol.degrees
    kap = np.where(n >= 1, symbol.kappa_inv_sq, 0.0)
    c0 = kap * (2 * n + 5)
    c1 = kap * (2 * n + 5) / (n + 1)
    nu_eta = np.sum(nu * eta, axis=1)[:, None]
    out = np.empty((sensors.count, r.size))
    for sl in _chunks(r.size, sensors.count):
        q = r[None, sl] / s[:, None]
        t = np.clip(eta @ xi[sl].T, -1.0, 1.0)
        smax = float(q.max()) if q.size else 0.0
        S0 = legendre_sums(_trim(c0, smax, 0), t, q)[0]
        S1 = legendre_sums(_trim(c1, smax, 1), t, q, max_order=1)[1]
        nu_xi = nu @ xi[sl].T
        val = nu_eta * S0 - (nu_xi - t * nu_eta) * S1
        out[:, sl] = -mu0 / (2 * np.pi * rho0**2) * q / s[:, None] * val
    return out.reshape((sensors.count,) + shape)


def toroidal_series_field(sensors, x, coefficients, rho0, prefactor=1.0):
    """Type-3 field ``sum_n c_n r**n / s**(n+2) [...]`` for each sensor.

    The bracket is the collapsed order sum of a type-3 harmonic at ``x``
    against the MEG projection ``nu . y^(1)`` at the sensor:
    ``(nu.eta)(xi x eta) P_n' - ((xi x eta) P_n'' (xi.nu') + P_n' xi x nu')/(n+1)``
    with ``nu' = nu - (nu.eta) eta``.

    Returns
    -------
    ndarray, shape (l,) + x.shape[:-1] + (3,)
    """
    nu = _meg_normals(sensors)
    shape, r, xi = _points(x, rho0)
    s = sensors.radii
    eta = sensors.directions
    c = np.asarray(coefficients, dtype=float)
    n = np.arange(c.size)
    c = np.where(n >= 1, c, 0.0)
    c_over = c / (n + 1)
    nu_eta = np.sum(nu * eta, axis=1)
    nu_t = nu - nu_eta[:, None] * eta
    out = np.empty((sensors.count, r.size, 3))
    for sl in _chunks(r.size, sensors.count, budget=200_000):
        q = r[None, sl] / s[:, None]
        t = np.clip(eta @ xi[sl].T, -1.0, 1.0)
        smax = float(q.max()) if q.size else 0.0
        S1 = legendre_sums(_trim(c, smax, 1), t, q, max_order=1)[1]
        _, T1, T2 = legendre_sums(_trim(c_over, smax, 2), t, q, max_order=2)
        xs = xi[sl]
        cross_ie = np.cross(xs[None, :, :], eta[:, None, :])
        cross_in = np.cross(xs[None, :, :], nu_t[:, None, :])
        xi_nut = nu_t @ xs.T
        val = ((nu_eta[:, None] * S1 - xi_nut * T2)[..., None] * cross_ie
               - T1[..., None] * cross_in)
        out[:, sl] = prefactor * val / s[:, None, None] ** 2
    return out.reshape((sensors.count,) + shape + (3,))


def meg_functional_applied_to_tensor_kernel(sensors, x, symbol, rho0, mu0=MU0):
    """MEG functionals applied to the type-3 tensor kernel.

    ``-mu0/(4 pi) sum_n kappa_n**-2 r**n/s**(n+2) [(nu.eta)(xi x eta)P_n'
    - ((xi x eta)P_n''(xi.nu') + P_n' xi x nu')/(n+1)]``.

    Returns
    -------
    ndarray, shape (l,) + x.shape[:-1] + (3,)
        Tangential vector fields, one per sensor.
    """
    return toroidal_series_field(sensors, x, symbol.kappa_inv_sq, rho0,
                                 prefactor=-mu0 / (4 * np.pi))


def eeg_functional_applied_to_tensor_kernel(sensors, x, symbol, model, beta):
    """EEG functionals applied to the type-2 tensor kernel.

    ``(4 pi)**-1 sum_n kappa_n**-2 (2n+1)/n beta_n b_n(s) r**(n-1)/s**(n+1)
    [n P_n xi + P_n' (eta - t xi)]`` with
    ``b_n(s) = (n+1)(s/rho_L)**(2n+1) + n``.

    Returns
    -------
    ndarray, shape (l,) + x.shape[:-1] + (3,)
    """
    if sensors.modality != "EEG":
        raise ValueError("EEG functional needs EEG sensors")
    rho0, rhoL = model.radii[0], model.radii[-1]
    shape, r, xi = _points(x, rho0)
    s = sensors.radii
    eta = sensors.directions
    n = symbol.degrees
    b = _beta_array(beta, symbol.N)
    w = np.where(n >= 1, symbol.kappa_inv_sq * (2 * n + 1) * b / np.maximum(n, 1), 0.0)
    wa = w * (n + 1)   # carries (s/rho_L)**(2n+1)
    wb = w * n
    out = np.empty((sensors.count, r.size, 3))
    for sl in _chunks(r.size, sensors.count, budget=200_000):
        xs = xi[sl]
        t = np.clip(eta @ xs.T, -1.0, 1.0)
        total = np.zeros(t.shape + (3,))
        for coef, scale, pre in (
                (wa, r[None, sl] * s[:, None] / rhoL**2, (s / rhoL) ** 3),
                (wb, r[None, sl] / s[:, None], np.ones_like(s))):
            smax = float(scale.max()) if scale.size else 0.0
            cc = _trim(coef, smax, 1)
            S0 = legendre_sums(cc * np.arange(cc.size), t, scale, shift=1)[0]
            S1 = legendre_sums(cc, t, scale, max_order=1, shift=1)[1]
            tang = eta[:, None, :] - t[..., None] * xs[None, :, :]
            total += pre[:, None, None] * (S0[..., None] * xs[None, :, :]
                                           + S1[..., None] * tang)
        out[:, sl] = total / (4 * np.pi * s[:, None, None] ** 2)
    return out.reshape((sensors.count,) + shape + (3,))
