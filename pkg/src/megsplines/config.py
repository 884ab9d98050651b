"""Run configuration: a single JSON document with defaults and validation."""

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .headmodel import ShellModel, default_three_shell, validate_shells
from .regsolve import METHODS

__all__ = ["ConfigError", "RunConfig", "DEFAULTS", "load_config"]


class ConfigError(ValueError):
    """Invalid run configuration."""


DEFAULTS = {
    "model": default_three_shell().to_dict(),
    "sensors": {"synthetic": {"count": 100, "radius": 0.115,
                              "max_colatitude_deg": 110.0, "face_gap": True}},
    "modality": "MEG",
    "method": "scalar-spline",
    "symbol": {"kind": "scalar-meg", "h": [0.85, 0.9, 0.95, 0.99], "N": 200},
    "test_case": {"kind": "spline-combo", "nodes": [5, 40], "weights": [1.0, 1.0],
                  "h_data": 0.8, "N": 500},
    "data": None,
    "noise_levels": [0, 1, 2, 5, 10],
    "route": "oracle",
    "qmc": {"points": 100_000},
    "oracle": {"rows": [0, 10, 30, 50, 80], "cols": [0, 10, 30, 50, 80]},
    "lambda_grid": {"count": 500, "lo": 1e-15, "hi": 10.0},
    "choose": ["lcurve-auto", "discrepancy", "quasi-optimality", "gcv"],
    "grid": {"n_theta": 181, "n_phi": 360, "radius_factor": 0.99},
    "beta": {"provider": "builtin", "N": None, "path": None},
    "output": "megsplines_out",
    "seed": 0,
}

_KNOWN = set(DEFAULTS)
_SYMBOL_FOR = {("MEG", "scalar-spline"): ("scalar-meg",),
               ("MEG", "vector-spline"): ("vector-i3",),
               ("EEG", "vector-spline"): ("vector-i2",)}


def _merge(base, over):
    out = copy.deepcopy(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key != "sensors":
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; ``raw`` holds the merged JSON document."""

    raw: dict
    base_dir: Path = Path(".")

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def model(self):
        return ShellModel.from_dict(self.raw["model"])

    @property
    def h_values(self):
        h = self.raw["symbol"]["h"]
        return [float(v) for v in (h if isinstance(h, list) else [h])]

    @property
    def has_truth(self):
        return self.raw.get("test_case") is not None

    def resolve(self, path):
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def digest(self):
        text = json.dumps(self.raw, sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def with_overrides(self, **kw):
        return RunConfig(_merge(self.raw, kw), self.base_dir)


def _fail(path, msg):
    raise ConfigError(f"{path}: {msg}")


def _validate(cfg, base_dir):
    unknown = set(cfg) - _KNOWN
    if unknown:
        _fail(sorted(unknown)[0], "unknown configuration key")
    try:
        model = ShellModel.from_dict(cfg["model"])
    except (KeyError, TypeError, ValueError) as exc:
        _fail("model", f"malformed shell model ({exc})")
    diag = validate_shells(model)
    if not diag["ok"]:
        _fail("model", "; ".join(diag["messages"]))
    mod, meth = cfg["modality"], cfg["method"]
    if mod not in ("MEG", "EEG"):
        _fail("modality", f"expected MEG or EEG, got {mod!r}")
    if meth not in ("scalar-spline", "vector-spline"):
        _fail("method", f"expected scalar-spline or vector-spline, got {meth!r}")
    if (mod, meth) not in _SYMBOL_FOR:
        _fail("method", "scalar-spline requires MEG")
    sym = cfg["symbol"]
    if sym.get("kind") not in _SYMBOL_FOR[(mod, meth)]:
        _fail("symbol.kind", f"{sym.get('kind')!r} does not fit {meth} for {mod}; "
                             f"use {_SYMBOL_FOR[(mod, meth)][0]!r}")
    hs = sym["h"] if isinstance(sym["h"], list) else [sym["h"]]
    if not hs or any(not isinstance(h, (int, float)) or not 0 < h < 1 for h in hs):
        _fail("symbol.h", "every h must lie in (0, 1)")
    if not isinstance(sym.get("N"), int) or sym["N"] < 1:
        _fail("symbol.N", "N must be a positive integer")
    sens = cfg["sensors"]
    if not isinstance(sens, dict) or not ({"file"} <= set(sens) or {"synthetic"} <= set(sens)):
        _fail("sensors", "give {'file': path} or {'synthetic': {...}}")
    if "file" in sens:
        p = Path(sens["file"])
        p = p if p.is_absolute() else base_dir / p
        if not p.exists():
            raise FileNotFoundError(f"sensor file not found: {p}")
    tc = cfg.get("test_case")
    if tc is not None:
        from .synthlab import TestCase
        try:
            TestCase.from_dict(dict(tc, modality=mod))
        except (TypeError, ValueError) as exc:
            _fail("test_case", str(exc))
    data = cfg.get("data")
    if data is not None:
        p = Path(data["file"]) if isinstance(data, dict) else Path(data)
        p = p if p.is_absolute() else base_dir / p
        if not p.exists():
            raise FileNotFoundError(f"data file not found: {p}")
    if tc is None and data is None:
        _fail("test_case", "either a test case or a measured data file is required")
    levels = cfg["noise_levels"]
    if not isinstance(levels, list) or any(not isinstance(v, (int, float)) or v < 0
                                           for v in levels):
        _fail("noise_levels", "list of nonnegative percentages expected")
    if cfg["route"] not in ("svd", "oracle"):
        _fail("route", "expected 'svd' or 'oracle'")
    if mod == "EEG" and cfg["route"] == "oracle":
        _fail("route", "the integral oracle exists for MEG only; use 'svd'")
    lg = cfg["lambda_grid"]
    if not (isinstance(lg.get("count"), int) and lg["count"] >= 2):
        _fail("lambda_grid.count", "need an integer >= 2")
    if not 0 < lg["lo"] < lg["hi"]:
        _fail("lambda_grid", "need 0 < lo < hi")
    for m in cfg["choose"]:
        if m not in METHODS or m == "nrmse-oracle":
            _fail("choose", f"unknown parameter-choice method {m!r}")
    g = cfg["grid"]
    if g["n_theta"] < 2 or g["n_phi"] < 1 or not 0 < g["radius_factor"] <= 1:
        _fail("grid", "need n_theta >= 2, n_phi >= 1 and 0 < radius_factor <= 1")
    if cfg["beta"]["provider"] not in ("builtin", "stub", "file"):
        _fail("beta.provider", "expected builtin, stub or file")
    if cfg["beta"]["provider"] == "file" and not cfg["beta"].get("path"):
        _fail("beta.path", "file provider needs a path")
    if not isinstance(cfg["seed"], int):
        _fail("seed", "integer expected")


def load_config(source=None, base_dir=None):
    """Merge a JSON document (path, text or dict) over the defaults and validate.

    Raises
    ------
    ConfigError
        With the offending key, or the JSON line and column on parse errors.
    FileNotFoundError
        For a missing configuration, sensor or data file.
    """
    base = Path(".") if base_dir is None else Path(base_dir)
    if source is None:
        user = {}
    elif isinstance(source, dict):
        user = source
    else:
        p = Path(source)
        if not p.exists():
            raise FileNotFoundError(f"configuration file not found: {p}")
        base = p.parent if base_dir is None else base
        try:
            user = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(user, dict):
        raise ConfigError("configuration must be a JSON object")
    merged = _merge(DEFAULTS, user)
    # method-dependent symbol defaults when the user did not give a symbol
    if "symbol" not in user:
        kind = _SYMBOL_FOR.get((merged["modality"], merged["method"]), ("scalar-meg",))[0]
        if kind == "vector-i3":
            merged["symbol"] = {"kind": kind, "h": 0.85**6, "N": 200}
        elif kind == "vector-i2":
            merged["symbol"] = {"kind": kind, "h": 0.85, "N": 300}
    if merged["modality"] == "EEG" and "route" not in user:
        merged["route"] = "svd"
    _validate(merged, base)
    return RunConfig(merged, base)
