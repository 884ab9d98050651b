"""Reproducing-kernel splines for the inverse MEG and EEG problems on a
multiple-shell spherical head model."""

__version__ = "0.1.0"

from .headmodel import (MU0, ModelError, ShellModel, BetaCoefficients,  # noqa: E402
                        beta_coefficients, default_three_shell, validate_shells)
from .kernels import KernelSymbol, make_symbol, custom_symbol  # noqa: E402
from .forward import SensorSet, load_sensors, save_sensors  # noqa: E402
from .assembly import (SplineSystem, assemble_scalar_meg, assemble_vector_meg,  # noqa: E402
                       assemble_vector_eeg)
from .regsolve import LambdaSweep, ParamChoice, lambda_grid, tikhonov_sweep  # noqa: E402
from .fieldeval import SphereGrid, FieldSamples, nrmse  # noqa: E402
from .config import ConfigError, RunConfig, load_config  # noqa: E402
from .estimator import SplineInversion  # noqa: E402

__all__ = [
    "MU0", "ModelError", "ShellModel", "BetaCoefficients", "beta_coefficients",
    "default_three_shell", "validate_shells", "KernelSymbol", "make_symbol",
    "custom_symbol", "SensorSet", "load_sensors", "save_sensors", "SplineSystem",
    "assemble_scalar_meg", "assemble_vector_meg", "assemble_vector_eeg",
    "LambdaSweep", "ParamChoice", "lambda_grid", "tikhonov_sweep", "SphereGrid",
    "FieldSamples", "nrmse", "ConfigError", "RunConfig", "load_config", "SplineInversion",
]
