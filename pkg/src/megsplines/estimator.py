"""scikit-learn style wrapper around assembly, sweep and parameter choice.

Samples are sensors: a row of ``X`` holds the sensor position (and for
MEG its normal), the target is the measured value.  ``predict`` returns
the data the fitted spline produces at other sensors; ``reconstruct``
evaluates the recovered current on a sphere.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .assembly import (assemble_scalar_meg, assemble_vector_eeg, assemble_vector_meg,
                       meg_gram, scalar_meg_weights, vector_meg_weights)
from .fieldeval import SphereGrid, eval_scalar_spline, eval_vector_spline, scalar_to_current
from .forward import SensorSet
from .headmodel import MU0, MultiShellBetaProvider, StubBetaProvider, beta_coefficients
from .headmodel import default_three_shell
from .kernels import make_symbol
from .regsolve import (choose_discrepancy, choose_gcv, choose_lcurve_auto,
                       choose_quasi_optimality, lambda_grid, select_manual_lambda,
                       tikhonov_sweep)

__all__ = ["SplineInversion", "sensors_from_array"]

_DEFAULT_H = {("MEG", "scalar-spline"): 0.85, ("MEG", "vector-spline"): 0.85**6,
              ("EEG", "vector-spline"): 0.85}
_KIND = {("MEG", "scalar-spline"): "scalar-meg", ("MEG", "vector-spline"): "vector-i3",
         ("EEG", "vector-spline"): "vector-i2"}


def sensors_from_array(X, modality):
    """SensorSet from rows ``(x, y, z[, nx, ny, nz])``; normals are normalised."""
    X = check_array(X, ensure_min_samples=1)
    want = 6 if modality == "MEG" else 3
    if X.shape[1] != want:
        raise ValueError(f"{modality} sensors need {want} columns, got {X.shape[1]}")
    if modality == "MEG":
        nrm = X[:, 3:] / np.linalg.norm(X[:, 3:], axis=1, keepdims=True)
        return SensorSet("MEG", X[:, :3], nrm)
    return SensorSet("EEG", X)


class SplineInversion(RegressorMixin, BaseEstimator):
    """Regularised spline inversion of MEG or EEG data.

    Parameters
    ----------
    modality : {"MEG", "EEG"}
    method : {"scalar-spline", "vector-spline"}
    h : float, optional
        Symbol parameter; a method-dependent default when omitted.
    N : int
        Truncation degree of the kernel series.
    choice : {"discrepancy", "lcurve-auto", "quasi-optimality", "gcv"}
        Parameter-choice rule used when ``lam`` is not given.
    lam : float, optional
        Fixed regularisation parameter; must lie on the sweep grid.
    noise_norm : float, optional
        ``||eps||_2`` for the discrepancy principle.
    lambda_count : int
    lambda_range : tuple of float
        Grid bounds relative to the largest matrix entry.
    model : ShellModel, optional
    beta : {"builtin", "stub"}
        Transfer-coefficient provider for EEG.

    Attributes
    ----------
    alpha_ : ndarray
    lambda_ : float
    choice_ : ParamChoice
    sweep_ : LambdaSweep
    system_ : SplineSystem
    """

    def __init__(self, modality="MEG", method="vector-spline", h=None, N=200,
                 choice="discrepancy", lam=None, noise_norm=None, lambda_count=500,
                 lambda_range=(1e-15, 1e1), model=None, beta="builtin"):
        self.modality = modality
        self.method = method
        self.h = h
        self.N = N
        self.choice = choice
        self.lam = lam
        self.noise_norm = noise_norm
        self.lambda_count = lambda_count
        self.lambda_range = lambda_range
        self.model = model
        self.beta = beta

    def _model(self):
        return default_three_shell() if self.model is None else self.model

    def _symbol(self):
        key = (self.modality, self.method)
        if key not in _KIND:
            raise ValueError(f"{self.method} is not available for {self.modality}")
        h = _DEFAULT_H[key] if self.h is None else self.h
        return make_symbol(_KIND[key], h, self.N)

    def _beta(self, model):
        provider = {"builtin": MultiShellBetaProvider, "stub": StubBetaProvider}[self.beta]
        return beta_coefficients(model, self.N, provider())

    def _assemble(self, sensors, symbol, model, beta, y=None):
        if self.method == "scalar-spline":
            return assemble_scalar_meg(sensors, symbol, model.rho0, data=y)
        if self.modality == "MEG":
            return assemble_vector_meg(sensors, symbol, model.rho0, data=y)
        return assemble_vector_eeg(sensors, symbol, model, beta, data=y)

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        sensors = sensors_from_array(X, self.modality)
        model = self._model()
        symbol = self._symbol()
        beta = self._beta(model) if self.modality == "EEG" else None
        system = self._assemble(sensors, symbol, model, beta, y)
        lo, hi = self.lambda_range
        sweep = tikhonov_sweep(system, lambda_grid(system, self.lambda_count, lo, hi))
        if self.lam is not None:
            choice = select_manual_lambda(sweep, self.lam)
        elif self.choice == "discrepancy":
            if self.noise_norm is None:
                raise ValueError("the discrepancy principle needs noise_norm")
            choice = choose_discrepancy(sweep, self.noise_norm)
        elif self.choice == "lcurve-auto":
            choice = choose_lcurve_auto(sweep, self.noise_norm)
        elif self.choice == "quasi-optimality":
            choice = choose_quasi_optimality(sweep)
        elif self.choice == "gcv":
            choice = choose_gcv(sweep)
        else:
            raise ValueError(f"unknown choice {self.choice!r}")
        self.sensors_, self.symbol_, self.model_, self.beta_ = sensors, symbol, model, beta
        self.system_, self.sweep_, self.choice_ = system, sweep, choice
        self.lambda_ = choice.chosen_lambda
        self.alpha_ = sweep.coefficients[choice.index]
        self.n_features_in_ = X.shape[1]
        return self

    def _cross_matrix(self, new):
        """Spline matrix block between new sensors (rows) and fitted ones."""
        old = self.sensors_
        nrm = None if old.normals is None else np.vstack([new.normals, old.normals])
        both = SensorSet(old.modality, np.vstack([new.positions, old.positions]), nrm)
        rows = np.arange(new.count)
        cols = new.count + np.arange(old.count)
        rho0 = self.model_.rho0
        if self.method == "scalar-spline":
            return meg_gram(both, scalar_meg_weights(self.symbol_), rho0, MU0**2 / rho0**3,
                            rows=rows, cols=cols)
        if self.modality == "MEG":
            return meg_gram(both, vector_meg_weights(self.symbol_), rho0, MU0**2 / rho0,
                            rows=rows, cols=cols)
        M = assemble_vector_eeg(both, self.symbol_, self.model_, self.beta_).matrix
        return M[np.ix_(rows, cols)]

    def predict(self, X):
        """Data of the fitted spline at the sensors in ``X``."""
        check_is_fitted(self, "alpha_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, fitted with {self.n_features_in_}")
        return self._cross_matrix(sensors_from_array(X, self.modality)) @ self.alpha_

    def reconstruct(self, grid=None, field="current"):
        """Recovered field on a sphere inside the cerebrum.

        Parameters
        ----------
        grid : SphereGrid, optional
            Defaults to the equiangular grid at ``0.99 rho0``.
        field : {"current", "scalar"}
            ``scalar`` (the ``A^(1)`` potential) is available for the
            scalar method only.
        """
        check_is_fitted(self, "alpha_")
        rho0 = self.model_.rho0
        grid = SphereGrid.default(rho0) if grid is None else grid
        if self.method == "scalar-spline":
            if field == "scalar":
                return eval_scalar_spline(self.alpha_, self.sensors_, self.symbol_, grid, rho0)
            return scalar_to_current(self.alpha_, self.sensors_, self.symbol_, grid, rho0)
        if field != "current":
            raise ValueError("the vector method reconstructs the current only")
        return eval_vector_spline(self.alpha_, self.sensors_, self.symbol_, grid,
                                  self.modality, rho0=rho0, model=self.model_, beta=self.beta_)
