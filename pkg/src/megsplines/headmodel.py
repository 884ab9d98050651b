"""Multiple-shell head model, physical constants and EEG transfer coefficients."""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ModelError",
    "PhysicalConstants",
    "MU0",
    "ShellModel",
    "default_three_shell",
    "validate_shells",
    "BetaCoefficients",
    "BetaFileProvider",
    "MultiShellBetaProvider",
    "StubBetaProvider",
    "beta_coefficients",
    "read_beta_file",
    "write_beta_file",
]


class ModelError(ValueError):
    """Inconsistent head model or transfer coefficients."""


@dataclass(frozen=True)
class PhysicalConstants:
    """Physical constants in SI units."""

    mu0: float = 4e-7 * math.pi


MU0 = PhysicalConstants().mu0


@dataclass(frozen=True)
class ShellModel:
    """Concentric shells of constant conductivity.

    Parameters
    ----------
    radii : sequence of float
        Shell radii ``rho_0 < rho_1 < ... < rho_L`` in metres.
        ``rho_0`` bounds the cerebrum ball that carries the current.
    conductivities : sequence of float
        ``sigma_0`` of the cerebrum ball and ``sigma_l`` of the shell
        between ``rho_{l-1}`` and ``rho_l``, in S/m.
    exterior_conductivity : float
        Conductivity outside ``rho_L``; the model requires 0.

    Notes
    -----
    Construction does not validate; see :func:`validate_shells` and
    :meth:`require_valid`.
    """

    radii: tuple
    conductivities: tuple
    exterior_conductivity: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        object.__setattr__(self, "conductivities",
                           tuple(float(s) for s in self.conductivities))
        object.__setattr__(self, "exterior_conductivity",
                           float(self.exterior_conductivity))

    @property
    def L(self):
        return len(self.radii) - 1

    @property
    def rho0(self):
        return self.radii[0]

    @property
    def rhoL(self):
        return self.radii[-1]

    def to_dict(self):
        return {"radii": list(self.radii),
                "conductivities": list(self.conductivities),
                "exterior_conductivity": self.exterior_conductivity}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(data["radii"]), tuple(data["conductivities"]),
                   data.get("exterior_conductivity", 0.0))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def require_valid(self):
        """Raise :class:`ModelError` unless every shell check passes."""
        diag = validate_shells(self)
        if not diag["ok"]:
            raise ModelError("; ".join(diag["messages"]))
        return self


def default_three_shell():
    """Cerebrum, cerebrospinal fluid, skull and scalp with default values."""
    return ShellModel(radii=(0.071, 0.072, 0.079, 0.085),
                      conductivities=(0.330, 1.000, 0.042, 0.330))


def validate_shells(model):
    """Check a :class:`ShellModel` and return diagnostics.

    Returns
    -------
    dict
        Flags ``monotone``, ``positive``, ``outer_zero``, ``layout`` and
        ``ok``, plus human-readable ``messages`` for every failure.
    """
    r = np.asarray(model.radii, dtype=float)
    s = np.asarray(model.conductivities, dtype=float)
    messages = []
    layout = r.size >= 3 and s.size == r.size
    if not layout:
        messages.append(f"need L >= 2 and one conductivity per radius, got "
                        f"{r.size} radii and {s.size} conductivities")
    monotone = bool(r.size >= 1 and np.all(r > 0) and np.all(np.diff(r) > 0))
    if not monotone:
        messages.append(f"radii must be positive and strictly increasing: {list(r)}")
    positive = bool(np.all(s > 0))
    if not positive:
        messages.append(f"conductivities inside the head must be positive: {list(s)}")
    outer_zero = model.exterior_conductivity == 0.0
    if not outer_zero:
        messages.append("conductivity outside the outermost shell must vanish, got "
                        f"{model.exterior_conductivity}")
    ok = layout and monotone and positive and outer_zero
    return {"monotone": monotone, "positive": positive, "outer_zero": outer_zero,
            "layout": layout, "ok": ok, "messages": messages}


# ---------------------------------------------------------------------------
# Transfer coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BetaCoefficients:
    """Transfer coefficients ``beta_n`` for ``n = 1..N``.

    ``values[n-1]`` holds ``beta_n``.  ``c_bound`` records
    ``max_n (2n+1) beta_n**2``.
    """

    values: np.ndarray
    provenance: str
    c_bound: float = field(default=float("nan"))

    @property
    def N(self):
        return self.values.size

    def padded(self, N):
        """Array indexed by degree 0..N with ``beta_0 = 0``."""
        if N > self.N:
            raise ModelError(f"beta known up to n={self.N}, requested {N}")
        out = np.zeros(N + 1)
        out[1:] = self.values[:N]
        return out


class StubBetaProvider:
    """Analytic stub ``beta_n = 1/(2n+1)`` for tests."""

    provenance = "unit-test-stub"

    def __call__(self, model, N):
        n = np.arange(1, N + 1)
        return 1.0 / (2 * n + 1)


class BetaFileProvider:
    """Read ``beta_n`` from a coefficient file (see :func:`read_beta_file`)."""

    provenance = "file"

    def __init__(self, path):
        self.path = Path(path)

    def __call__(self, model, N):
        L, beta = read_beta_file(self.path)
        if model is not None and L != model.L:
            raise ModelError(f"{self.path}: file written for L={L}, model has L={model.L}")
        if beta.size < N:
            raise ModelError(f"{self.path}: only {beta.size} coefficients, need {N}")
        return beta[:N]


class MultiShellBetaProvider:
    """Builtin radial-transfer recursion for concentric shells.

    Externally sourced construction: the potential of the primary current
    in an unbounded medium of conductivity ``sigma_0`` is propagated
    through every interface (continuity of potential and normal current
    density) to the insulated outer surface.  With ``T_n`` the ratio of
    the outermost decaying coefficient to the primary one,
    ``beta_n = T_n / (sigma_0 (2n+1))``; a homogeneous head gives
    ``T_n = 1``.
    """

    provenance = "builtin-provider"

    def __call__(self, model, N):
        model.require_valid()
        return np.array([self.transfer(model, n) for n in range(1, N + 1)]) / (
            model.conductivities[0] * (2 * np.arange(1, N + 1) + 1))

    @staticmethod
    def transfer(model, n):
        """Ratio ``T_n`` for a single degree n."""
        rho = model.radii
        sig = model.conductivities
        L = model.L
        # region l in (rho_{l-1}, rho_l): a_l (r/rho_l)^n + b_l (rho_{l-1}/r)^(n+1);
        # region 0 carries a_0 (r/rho_0)^n + (rho_0/r)^(n+1) with unit primary part
        size = 2 * L + 1

        def col_a(l):
            return 0 if l == 0 else 2 * l - 1

        def col_b(l):
            return 2 * l

        A = np.zeros((size, size))
        rhs = np.zeros(size)
        row = 0
        for l in range(L):
            inner_rb = 1.0 if l == 0 else (rho[l - 1] / rho[l]) ** (n + 1)
            outer_fa = (rho[l] / rho[l + 1]) ** n
            # potential continuity at rho_l
            A[row, col_a(l)] += 1.0
            if l == 0:
                rhs[row] -= 1.0
            else:
                A[row, col_b(l)] += inner_rb
            A[row, col_a(l + 1)] -= outer_fa
            A[row, col_b(l + 1)] -= 1.0
            row += 1
            # current continuity at rho_l (multiplied by rho_l)
            A[row, col_a(l)] += sig[l] * n
            if l == 0:
                rhs[row] += sig[0] * (n + 1)
            else:
                A[row, col_b(l)] -= sig[l] * (n + 1) * inner_rb
            A[row, col_a(l + 1)] -= sig[l + 1] * n * outer_fa
            A[row, col_b(l + 1)] += sig[l + 1] * (n + 1)
            row += 1
        # insulated outer surface
        A[row, col_a(L)] = n
        A[row, col_b(L)] = -(n + 1) * (rho[L - 1] / rho[L]) ** (n + 1)
        sol = np.linalg.solve(A, rhs)
        return sol[col_b(L)] * (rho[L - 1] / rho[0]) ** (n + 1)


def beta_coefficients(model, N, provider=None, bound=None):
    """Transfer coefficients from a provider, with the boundedness check.

    Parameters
    ----------
    model : ShellModel
    N : int
        Maximal degree, ``N >= 1``.
    provider : callable, optional
        ``provider(model, N) -> array`` with a ``provenance`` attribute.
        Defaults to :class:`MultiShellBetaProvider`.
    bound : float, optional
        If given, ``(2n+1) beta_n**2`` must not exceed it.

    Raises
    ------
    ModelError
        Non-finite coefficients, a violated ``bound`` or a sequence
        ``(2n+1) beta_n**2`` that still grows over its last tenth.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    provider = MultiShellBetaProvider() if provider is None else provider
    try:
        values = np.asarray(provider(model, N), dtype=float)
    except ModelError:
        raise
    except Exception as exc:  # surface any provider failure as a model error
        raise ModelError(f"beta provider failed: {exc}") from exc
    if values.shape != (N,):
        raise ModelError(f"beta provider returned shape {values.shape}, expected ({N},)")
    if not np.all(np.isfinite(values)):
        raise ModelError("beta coefficients must be finite")
    n = np.arange(1, N + 1)
    growth = (2 * n + 1) * values**2
    c_bound = float(growth.max())
    if bound is not None and c_bound > bound:
        raise ModelError(f"sup (2n+1) beta_n^2 = {c_bound:g} exceeds bound {bound:g}")
    tail = growth[-max(2, N // 10):]
    if N >= 20 and np.all(np.diff(tail) > 0) and tail[-1] > growth[: N // 2].max():
        raise ModelError("(2n+1) beta_n^2 grows with n; sequence not bounded")
    return BetaCoefficients(values=values, provenance=getattr(provider, "provenance", "custom"),
                            c_bound=c_bound)


def write_beta_file(path, beta, L):
    """Write ``beta_n`` as ``n value`` lines under a ``# beta L=<L>`` header."""
    values = beta.values if isinstance(beta, BetaCoefficients) else np.asarray(beta)
    lines = [f"# beta L={int(L)}"]
    lines += [f"{n} {float(v)!r}" for n, v in enumerate(values, start=1)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_beta_file(path):
    """Parse a coefficient file.

    Returns
    -------
    L : int
    beta : ndarray
        ``beta_n`` for ``n = 1..N``; degrees must be consecutive from 1.
    """
    path = Path(path)
    L = None
    entries = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.replace(" ", "").startswith("#betaL="):
                L = int(line.split("=", 1)[1])
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ModelError(f"{path}:{lineno}: expected 'n value'")
        n = int(parts[0])
        if n in entries:
            raise ModelError(f"{path}:{lineno}: degree {n} repeated")
        entries[n] = float(parts[1])
    if L is None:
        raise ModelError(f"{path}: missing '# beta L=<L>' header")
    N = len(entries)
    if sorted(entries) != list(range(1, N + 1)):
        raise ModelError(f"{path}: degrees must run consecutively from 1")
    return L, np.array([entries[n] for n in range(1, N + 1)])
