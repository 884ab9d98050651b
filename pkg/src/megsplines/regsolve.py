"""Tikhonov-regularised spline systems and parameter-choice methods."""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigh

__all__ = [
    "FactorizationError",
    "LambdaSweep",
    "ParamChoice",
    "METHODS",
    "lambda_grid",
    "tikhonov_sweep",
    "choose_lcurve_auto",
    "choose_lcurve_manual",
    "select_manual_lambda",
    "read_lcurve_csv",
    "choose_discrepancy",
    "choose_quasi_optimality",
    "choose_gcv",
    "choose_by_nrmse",
    "write_choice_report",
    "menger_curvature",
]

METHODS = ("lcurve-auto", "lcurve-manual", "discrepancy", "quasi-optimality",
           "gcv", "nrmse-oracle")


class FactorizationError(ArithmeticError):
    """Cholesky factorisation of ``M + lambda I`` failed."""


@dataclass(frozen=True)
class LambdaSweep:
    """Regularised solutions over an increasing grid of parameters.

    Attributes
    ----------
    lambdas : ndarray, shape (p,)
    coefficients : ndarray, shape (p, l)
        Spline coefficients ``alpha`` for every parameter.
    residuals : ndarray, shape (p,)
        ``||M alpha - g||_2``.
    hnorms : ndarray, shape (p,)
        ``sqrt(alpha^T M alpha)``, the norm of the spline.
    gcv_scores : ndarray, shape (p,)
    qoc_scores : ndarray, shape (p-1,)
        ``||alpha_{i+1} - alpha_i||_2`` for each junction.
    data_norm : float
    diagnostics : dict
    """

    lambdas: np.ndarray
    coefficients: np.ndarray
    residuals: np.ndarray
    hnorms: np.ndarray
    gcv_scores: np.ndarray
    qoc_scores: np.ndarray
    data_norm: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def relative_residuals(self):
        return self.residuals / self.data_norm if self.data_norm > 0 else self.residuals

    def index_of(self, lam, rtol=1e-9):
        """Grid index of ``lam``; raises ValueError if it is not a member."""
        idx = int(np.argmin(np.abs(self.lambdas - lam)))
        if abs(self.lambdas[idx] - lam) > rtol * abs(self.lambdas[idx]):
            raise ValueError(f"lambda {lam!r} is not a member of the sweep grid")
        return idx


@dataclass(frozen=True)
class ParamChoice:
    """Outcome of a parameter-choice method."""

    method: str
    chosen_lambda: float
    index: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def flagged(self):
        return bool(self.diagnostics.get("fallback") or self.diagnostics.get("flag"))

    def to_dict(self, sweep=None):
        out = {"method": self.method, "lambda": self.chosen_lambda, "index": self.index}
        if sweep is not None:
            out["residual"] = float(sweep.residuals[self.index])
            out["relative_residual"] = float(sweep.relative_residuals[self.index])
            out["hnorm"] = float(sweep.hnorms[self.index])
        out["flags"] = {k: v for k, v in self.diagnostics.items()
                        if isinstance(v, (bool, int, float, str))}
        return out


def lambda_grid(system, count=500, lo_scale=1e-15, hi_scale=1e1):
    """Log-uniform parameters in ``[lo_scale, hi_scale] * max|M|``.

    The default factors place a scalar MEG matrix with entries of order
    ``1e-10`` on absolute parameters between ``1e-25`` and ``1e-9``.

    Parameters
    ----------
    system : SplineSystem, ndarray or float
        Matrix (or its largest absolute entry).

    Examples
    --------
    >>> lambda_grid(10.0, count=3, lo_scale=1e-2, hi_scale=1.0)
    array([ 0.1,  1. , 10. ])
    """
    if count < 2:
        raise ValueError("count must be at least 2")
    if not 0 < lo_scale < hi_scale:
        raise ValueError("need 0 < lo_scale < hi_scale")
    if np.isscalar(system):
        top = float(system)
    else:
        M = getattr(system, "matrix", system)
        top = float(np.abs(np.asarray(M)).max())
    if not top > 0:
        raise ValueError("matrix must have a nonzero entry")
    return np.logspace(np.log10(lo_scale), np.log10(hi_scale), count) * top


def _monotone(values, increasing, slack=1e-10):
    v = np.asarray(values)
    scale = max(np.abs(v).max(), np.finfo(float).tiny)
    d = np.diff(v) if increasing else -np.diff(v)
    return bool(np.all(d >= -slack * scale))


def tikhonov_sweep(system, lambdas, data=None, mode="eigen"):
    """Solve ``(M + lambda I) alpha = g`` for every parameter.

    Parameters
    ----------
    system : SplineSystem
    lambdas : array_like
        Strictly increasing positive parameters.
    data : array_like, optional
        Overrides ``system.data``.
    mode : {"eigen", "direct"}
        ``eigen`` reuses one symmetric eigendecomposition for all
        parameters; ``direct`` factorises every ``M + lambda I`` by
        Cholesky and serves as a verification mode.

    Returns
    -------
    LambdaSweep
    """
    M = np.asarray(system.matrix, dtype=float)
    g = np.asarray(system.data if data is None else data, dtype=float)
    if g is None or g.shape != (M.shape[0],):
        raise ValueError("data vector missing or of wrong length")
    lam = np.asarray(lambdas, dtype=float)
    if lam.ndim != 1 or lam.size == 0 or np.any(lam <= 0) or np.any(np.diff(lam) <= 0):
        raise ValueError("lambdas must be positive and strictly increasing")
    Ms = 0.5 * (M + M.T)
    mu, Q = eigh(Ms)
    ghat = Q.T @ g
    mu_min = float(mu[0])
    muc = np.clip(mu, 0.0, None)
    F = 1.0 / (muc[None, :] + lam[:, None])
    filt = lam[:, None] * F                              # residual filter
    gcv = np.sum((filt * ghat) ** 2, axis=1) / np.sum(filt, axis=1) ** 2
    if mode == "eigen":
        alpha = (F * ghat) @ Q.T
        residuals = np.linalg.norm(filt * ghat, axis=1)
        hnorms = np.sqrt(np.sum(muc * (F * ghat) ** 2, axis=1))
    elif mode == "direct":
        alpha = np.empty((lam.size, g.size))
        for i, lm in enumerate(lam):
            try:
                factor = cho_factor(Ms + lm * np.eye(g.size), lower=True)
            except LinAlgError as exc:
                raise FactorizationError(
                    f"Cholesky failed at lambda={lm:g}; min eigenvalue {mu_min:g}") from exc
            alpha[i] = cho_solve(factor, g)
        residuals = np.linalg.norm(alpha @ Ms - g, axis=1)
        hnorms = np.sqrt(np.clip(np.einsum("pi,ij,pj->p", alpha, Ms, alpha), 0.0, None))
    else:
        raise ValueError("mode must be 'eigen' or 'direct'")
    qoc = np.linalg.norm(np.diff(alpha, axis=0), axis=1)
    diag = {"mode": mode, "min_eig": mu_min, "max_eig": float(mu[-1]),
            "negative_eigs_clipped": int(np.sum(mu < 0)),
            "residual_monotone": _monotone(residuals, True),
            "hnorm_monotone": _monotone(hnorms, False),
            "eigvals": mu, "ghat": ghat}
    return LambdaSweep(lam, alpha, residuals, hnorms, gcv, qoc,
                       float(np.linalg.norm(g)), diag)


def menger_curvature(x, y):
    """Signed three-point curvature at interior points of a polyline.

    Positive values mark counterclockwise turns.  Coincident neighbours
    give zero curvature.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ax, ay = x[1:-1] - x[:-2], y[1:-1] - y[:-2]
    bx, by = x[2:] - x[1:-1], y[2:] - y[1:-1]
    cross = ax * by - ay * bx
    la = np.hypot(ax, ay)
    lb = np.hypot(bx, by)
    lc = np.hypot(x[2:] - x[:-2], y[2:] - y[:-2])
    den = la * lb * lc
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(den > 0, 2 * cross / np.where(den > 0, den, 1.0), 0.0)
    return k


def _fallback(sweep, noise_norm, reason):
    if noise_norm is not None:
        choice = choose_discrepancy(sweep, noise_norm)
        diag = dict(choice.diagnostics, fallback=True, fallback_to="discrepancy",
                    reason=reason)
    else:
        idx = (sweep.lambdas.size - 1) // 2
        choice = ParamChoice("lcurve-auto", float(sweep.lambdas[idx]), idx, {})
        diag = {"fallback": True, "fallback_to": "median", "reason": reason}
    return ParamChoice("lcurve-auto", choice.chosen_lambda, choice.index, diag)


def choose_lcurve_auto(sweep, noise_norm=None, corner_ratio=5.0, max_misfit=0.5):
    """Corner of the L-curve ``(log residual, log hnorm)``.

    The corner is the point of maximal signed Menger curvature.  The
    choice falls back (flagged) to the discrepancy principle when the
    noise norm is known, or to the median parameter otherwise, when the
    curve has no distinguished corner (maximal curvature not positive or
    below ``corner_ratio`` times the median absolute curvature) or when
    the corner produces a relative residual of at least ``max_misfit``.
    """
    if sweep.lambdas.size < 5:
        raise ValueError("L-curve needs at least 5 sweep points")
    tiny = np.finfo(float).tiny
    x = np.log10(np.maximum(sweep.residuals, tiny))
    y = np.log10(np.maximum(sweep.hnorms, tiny))
    k = menger_curvature(x, y)
    kmax = float(k.max())
    med = float(np.median(np.abs(k)))
    # curvature below this floor is round-off on a straight polyline
    floor = 1e-8 / max(float(np.hypot(np.ptp(x), np.ptp(y))), tiny)
    if not kmax > floor or kmax < corner_ratio * med:
        return _fallback(sweep, noise_norm, "no distinguished corner")
    idx = int(np.argmax(k)) + 1          # first maximum = smaller lambda
    rel = float(sweep.relative_residuals[idx])
    if rel >= max_misfit:
        return _fallback(sweep, noise_norm, f"corner misfit {rel:.3g}")
    return ParamChoice("lcurve-auto", float(sweep.lambdas[idx]), idx,
                       {"curvature": kmax, "median_curvature": med})


def choose_lcurve_manual(sweep, export_path):
    """Export the L-curve table for manual inspection.

    Writes ``lambda,residual,relative_residual,hnorm`` with full
    precision; the selected value is passed back through
    :func:`select_manual_lambda`.
    """
    path = Path(export_path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "residual", "relative_residual", "hnorm"])
        for row in zip(sweep.lambdas, sweep.residuals, sweep.relative_residuals,
                       sweep.hnorms):
            w.writerow([repr(float(v)) for v in row])
    return path


def read_lcurve_csv(path):
    """Parse an exported L-curve table into a dict of arrays."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {key: np.array([float(r[key]) for r in rows])
            for key in ("lambda", "residual", "relative_residual", "hnorm")}


def select_manual_lambda(sweep, lam):
    """Manual L-curve selection; ``lam`` must be a grid member."""
    idx = sweep.index_of(lam)
    return ParamChoice("lcurve-manual", float(sweep.lambdas[idx]), idx, {})


def choose_discrepancy(sweep, noise_norm, tau=1.0):
    """Largest parameter whose residual stays below ``tau * noise_norm``."""
    if noise_norm < 0:
        raise ValueError("noise_norm must be nonnegative")
    ok = np.nonzero(sweep.residuals <= tau * noise_norm)[0]
    if ok.size:
        idx = int(ok[-1])
        return ParamChoice("discrepancy", float(sweep.lambdas[idx]), idx,
                           {"target": tau * noise_norm})
    idx = int(np.argmin(sweep.residuals))
    return ParamChoice("discrepancy", float(sweep.lambdas[idx]), idx,
                       {"target": tau * noise_norm, "flag": True,
                        "reason": "no residual below target"})


def choose_quasi_optimality(sweep):
    """Junction with the smallest change ``||alpha_{i+1} - alpha_i||``.

    The smaller parameter of the winning junction is returned.
    """
    if sweep.lambdas.size < 2:
        raise ValueError("quasi-optimality needs at least 2 grid points")
    idx = int(np.argmin(sweep.qoc_scores))
    return ParamChoice("quasi-optimality", float(sweep.lambdas[idx]), idx,
                       {"score": float(sweep.qoc_scores[idx])})


def choose_gcv(sweep, system=None):
    """Minimiser of the generalised cross-validation score."""
    idx = int(np.argmin(sweep.gcv_scores))
    return ParamChoice("gcv", float(sweep.lambdas[idx]), idx,
                       {"score": float(sweep.gcv_scores[idx])})


def choose_by_nrmse(sweep, candidates, truth_evaluator):
    """Pick among candidate choices by the error against a known truth.

    Parameters
    ----------
    sweep : LambdaSweep
    candidates : sequence of ParamChoice
    truth_evaluator : callable
        ``truth_evaluator(index) -> nrmse`` of the reconstruction at a
        sweep index; only available for synthetic data.
    """
    if truth_evaluator is None:
        raise ValueError("choose_by_nrmse needs a ground-truth evaluator")
    if not candidates:
        raise ValueError("no candidate choices given")
    scores = [float(truth_evaluator(c.index)) for c in candidates]
    best = int(np.argmin(scores))
    win = candidates[best]
    return ParamChoice("nrmse-oracle", win.chosen_lambda, win.index,
                       {"winner": win.method, "nrmse": scores[best],
                        "all": {c.method: s for c, s in zip(candidates, scores)}})


def write_choice_report(path, choices, sweep, extra=None):
    """JSON report of several parameter choices."""
    report = {"choices": [c.to_dict(sweep) for c in choices]}
    if extra:
        report.update(extra)
    Path(path).write_text(json.dumps(report, indent=2, default=float))
    return report
