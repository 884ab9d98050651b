"""Reproducible runs: synthetic data, inversion sweeps, oracle comparison
and the self-test suite."""

import csv
import json
import platform
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .assembly import (assemble_scalar_meg, assemble_vector_eeg, assemble_vector_meg,
                       meg_gram, scalar_meg_weights)
from .config import ConfigError
from .fieldeval import (FieldSamples, SphereGrid, eval_scalar_spline, eval_vector_spline,
                        export_deviation, export_field, nrmse, scalar_to_current)
from .forward import load_sensors, save_sensors
from .headmodel import (MU0, BetaFileProvider, MultiShellBetaProvider, StubBetaProvider,
                        beta_coefficients)
from .kernels import make_symbol
from .regsolve import (choose_by_nrmse, choose_discrepancy, choose_gcv, choose_lcurve_auto,
                       choose_lcurve_manual, choose_quasi_optimality, lambda_grid,
                       select_manual_lambda, tikhonov_sweep, write_choice_report)
from .synthlab import (NoiseSpec, QMCConfig, TestCase, add_noise, exact_current_for_case,
                       exact_scalar_for_case, generate_data, integral_oracle_block,
                       synthetic_eeg_sensors, synthetic_meg_sensors)

__all__ = [
    "provenance",
    "build_sensors",
    "build_beta",
    "build_case",
    "build_grid",
    "level_tag",
    "noise_seed",
    "write_data",
    "read_data",
    "run_synth",
    "run_invert",
    "run_oracle",
    "run_selftest",
]

DESK_POINT_LIMIT = 1_000_000


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def provenance(cfg, **extra):
    """Record that pins a file to its configuration and software versions."""
    rec = {"config_hash": cfg.digest(), "seed": cfg["seed"], "megsplines": __version__,
           "numpy": np.__version__, "scipy": scipy.__version__,
           "python": platform.python_version()}
    rec.update(extra)
    return rec


def _sidecar(path, record):
    side = Path(path).with_suffix(".provenance.json")
    side.write_text(json.dumps(record, indent=2, default=_jsonable))
    return side


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return str(v)


def build_sensors(cfg):
    spec = cfg["sensors"]
    mod = cfg["modality"]
    if "file" in spec:
        return load_sensors(cfg.resolve(spec["file"]), modality=mod)
    syn = dict(spec["synthetic"])
    if mod == "MEG":
        return synthetic_meg_sensors(**syn)
    syn.pop("radius", None)
    return synthetic_eeg_sensors(cfg.model, **syn)


def build_beta(cfg, N):
    b = cfg["beta"]
    provider = {"builtin": MultiShellBetaProvider, "stub": StubBetaProvider}.get(b["provider"])
    provider = BetaFileProvider(cfg.resolve(b["path"])) if provider is None else provider()
    return beta_coefficients(cfg.model, int(b.get("N") or N), provider)


def build_case(cfg):
    return TestCase.from_dict(dict(cfg["test_case"], modality=cfg["modality"]))


def build_grid(cfg):
    g = cfg["grid"]
    return SphereGrid.equiangular(g["radius_factor"] * cfg.model.rho0, g["n_theta"], g["n_phi"])


def level_tag(level):
    """File-name tag of a noise level: ``5 -> 'noise5'``, ``0.5 -> 'noise0.5'``."""
    return f"noise{float(level):g}"


def noise_seed(seed, level):
    """Seed of one noise level, derived deterministically from the run seed."""
    return int(seed) * 100_003 + int(round(float(level) * 1000))


def write_data(path, g):
    """Data CSV with header ``index,value``."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "value"])
        for i, v in enumerate(np.asarray(g, dtype=float)):
            w.writerow([i, repr(float(v))])
    return Path(path)


def read_data(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"data file not found: {path}")
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "value" not in rows[0]:
        raise ConfigError(f"{path}: expected a CSV with an 'value' column")
    return np.array([float(r["value"]) for r in rows])


def _assemble(cfg, sensors, h, data=None):
    sym = cfg["symbol"]
    symbol = make_symbol(sym["kind"], h, sym["N"])
    rho0 = cfg.model.rho0
    if cfg["method"] == "scalar-spline":
        return assemble_scalar_meg(sensors, symbol, rho0, data=data), None
    if cfg["modality"] == "MEG":
        return assemble_vector_meg(sensors, symbol, rho0, data=data), None
    beta = build_beta(cfg, sym["N"])
    return assemble_vector_eeg(sensors, symbol, cfg.model, beta, data=data), beta


def _qmc(cfg, points, paper_scale, dimension):
    n = int(cfg["qmc"]["points"] if points is None else points)
    if n > DESK_POINT_LIMIT and not paper_scale:
        raise ConfigError(f"qmc.points: {n} points exceed the desk budget of "
                          f"{DESK_POINT_LIMIT}; rerun with --paper-scale to allow it")
    return QMCConfig(point_count=n, dimension=dimension)


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def run_synth(cfg, out, levels=None, route=None, points=None, paper_scale=False):
    """Generate test-case data and write one CSV per noise level.

    Returns
    -------
    dict
        ``{level: (path, noise_norm)}``.
    """
    if not cfg.has_truth:
        raise ConfigError("test_case: synth needs a test-case block")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    case = build_case(cfg)
    sensors = build_sensors(cfg)
    model = cfg.model
    route = cfg["route"] if route is None else route
    if route == "oracle" and case.modality != "MEG":
        raise ConfigError("route: the integral oracle exists for MEG only")
    beta = build_beta(cfg, case.N) if case.modality == "EEG" else None
    if route == "oracle":
        qmc = _qmc(cfg, points, paper_scale, 6 if case.kind == "spline-combo" else 3)
        g, prov = generate_data(case, sensors, model, "integral-oracle", qmc)
    else:
        g, prov = generate_data(case, sensors, model, "svd-series", beta=beta)
    if "file" not in cfg["sensors"]:
        _sidecar(save_sensors(out / "sensors.csv", sensors), provenance(cfg))
    levels = cfg["noise_levels"] if levels is None else levels
    written = {}
    for level in levels:
        spec = NoiseSpec(float(level), noise_seed(cfg["seed"], level))
        noisy, nn = add_noise(g, spec)
        path = write_data(out / f"data_{level_tag(level)}.csv", noisy)
        rec = provenance(cfg, **prov, noise_level=float(level), noise_seed=spec.seed,
                         noise_norm=nn, data_norm=float(np.linalg.norm(g)),
                         qmc_points=prov.get("points"))
        path.with_suffix(".json").write_text(json.dumps(rec, indent=2, default=_jsonable))
        written[float(level)] = (path, nn)
    return written


# ---------------------------------------------------------------------------
# invert
# ---------------------------------------------------------------------------

def _load_level(cfg, out, level):
    """Data and noise norm of a level; measured data carry no noise record."""
    if cfg["data"] is not None:
        d = cfg["data"]
        path = cfg.resolve(d["file"] if isinstance(d, dict) else d)
        nn = d.get("noise_norm") if isinstance(d, dict) else None
        return read_data(path), nn
    path = Path(out) / f"data_{level_tag(level)}.csv"
    g = read_data(path)
    side = path.with_suffix(".json")
    nn = json.loads(side.read_text()).get("noise_norm") if side.exists() else None
    return g, nn


def _choices(sweep, methods, noise_norm, manual_lambda):
    out = []
    for m in methods:
        if m == "lcurve-auto":
            out.append(choose_lcurve_auto(sweep, noise_norm))
        elif m == "lcurve-manual":
            pass  # the curve is exported for every sweep; the pick comes back via --lambda
        elif m == "discrepancy":
            if noise_norm is None:
                continue
            out.append(choose_discrepancy(sweep, noise_norm))
        elif m == "quasi-optimality":
            out.append(choose_quasi_optimality(sweep))
        elif m == "gcv":
            out.append(choose_gcv(sweep))
    if manual_lambda is not None:
        out.append(select_manual_lambda(sweep, manual_lambda))
    if not out:
        raise ConfigError("choose: no parameter-choice method applicable to this data")
    return out


class _Truth:
    """Exact fields of the test case, shared by all h of one run."""

    def __init__(self, cfg, sensors, grid, beta):
        self.case = build_case(cfg)
        model = cfg.model
        self.current = exact_current_for_case(self.case, sensors, grid, model, beta)
        self.scalar = (exact_scalar_for_case(self.case, sensors, grid, model.rho0)
                       if cfg["method"] == "scalar-spline" else None)


def _evaluate(cfg, system, alphas, grid, beta):
    """Current (and for the scalar method ``A^(1)``) of stacked coefficients."""
    rho0 = cfg.model.rho0
    if cfg["method"] == "scalar-spline":
        J = scalar_to_current(alphas, system.sensors, system.symbol, grid, rho0)
        A = eval_scalar_spline(alphas, system.sensors, system.symbol, grid, rho0)
        return J, A
    J = eval_vector_spline(alphas, system.sensors, system.symbol, grid, cfg["modality"],
                           rho0=rho0, model=cfg.model, beta=beta)
    return J, None


def _fmt_table(rows, columns):
    def cell(v):
        if isinstance(v, float):
            return f"{v:.4e}"
        return str(v)
    body = [[cell(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(c), *(len(b[i]) for b in body)) if body else len(c)
              for i, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(b, widths)) for b in body]
    return "\n".join(lines) + "\n"


SUMMARY_COLUMNS = ["noise", "h", "rel_residual", "nrmse", "nrmse_scalar", "lambda", "pcm",
                   "selected"]


def run_invert(cfg, out, levels=None, manual_lambda=None, choose=None, export=True):
    """Sweep, choose parameters, evaluate and export every data set.

    With a known truth every requested choice is scored by its NRMSE on
    the grid and the best one is reported (``pcm`` names the winning
    method); without truth the first choice is reported.  With several
    ``h`` the row of smallest NRMSE is marked as selected.

    Returns
    -------
    list of dict
        Summary rows, one per noise level and ``h``.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    sensors = build_sensors(cfg)
    grid = build_grid(cfg)
    methods = list(cfg["choose"] if choose is None else choose)
    levels = (cfg["noise_levels"] if levels is None else levels) if cfg["data"] is None \
        else [None]
    lg = cfg["lambda_grid"]
    rows = []
    truth = None
    for level in levels:
        g, noise_norm = _load_level(cfg, out, level)
        if g.size != sensors.count:
            raise ConfigError(f"data: {g.size} values for {sensors.count} sensors")
        tag = level_tag(level) if level is not None else "measured"
        level_rows = []
        for h in cfg.h_values:
            system, beta = _assemble(cfg, sensors, h, data=g)
            if truth is None and cfg.has_truth and cfg["data"] is None:
                truth = _Truth(cfg, sensors, grid, beta)
            lam = lambda_grid(system, lg["count"], lg["lo"], lg["hi"])
            sweep = tikhonov_sweep(system, lam)
            stem = f"{tag}_h{h:g}"
            # export first so a rejected manual lambda can be looked up on the grid
            lpath = choose_lcurve_manual(sweep, out / f"lcurve_{stem}.csv")
            _sidecar(lpath, provenance(cfg, noise_level=level, h=h))
            choices = _choices(sweep, methods, noise_norm, manual_lambda)
            idx = sorted({c.index for c in choices})
            J, A = _evaluate(cfg, system, sweep.coefficients[idx], grid, beta)
            scores, scores_a = {}, {}
            if truth is not None:
                for k, i in enumerate(idx):
                    scores[i] = nrmse(FieldSamples("vector", J[k], grid), truth.current)
                    if A is not None:
                        scores_a[i] = nrmse(FieldSamples("scalar", A[k], grid), truth.scalar)
                final = choose_by_nrmse(sweep, choices, scores.__getitem__)
                pcm = final.diagnostics["winner"]
            else:
                final = choices[0]
                pcm = final.method
            report = choices + ([final] if final is not choices[0] or truth is not None else [])
            write_choice_report(out / f"choices_{stem}.json", report, sweep,
                                extra={"provenance": provenance(cfg, noise_level=level, h=h),
                                       "noise_norm": noise_norm,
                                       "nrmse": {str(float(sweep.lambdas[i])): s
                                                 for i, s in scores.items()}})
            row = {"noise": "-" if level is None else float(level), "h": float(h),
                   "rel_residual": float(sweep.relative_residuals[final.index]),
                   "nrmse": scores.get(final.index, float("nan")),
                   "nrmse_scalar": scores_a.get(final.index, float("nan")),
                   "lambda": float(final.chosen_lambda), "pcm": pcm, "selected": False,
                   "_fields": (J[idx.index(final.index)],
                               None if A is None else A[idx.index(final.index)],
                               stem, final)}
            level_rows.append(row)
        best = (min(level_rows, key=lambda r: r["nrmse"]) if truth is not None
                else level_rows[0])
        best["selected"] = True
        if export:
            _export_fields(cfg, out, grid, best, truth, level)
        rows.extend(level_rows)
    for r in rows:
        r.pop("_fields", None)
    _write_summary(cfg, out, rows)
    return rows


def _export_fields(cfg, out, grid, row, truth, level):
    Jv, Av, stem, final = row["_fields"]
    meta = {"modality": cfg["modality"], "method": cfg["method"], "lambda": final.chosen_lambda,
            "h": row["h"], "pcm": row["pcm"],
            "provenance": provenance(cfg, noise_level=level)}
    rec = FieldSamples("vector", Jv, grid)
    export_field(out / f"current_{stem}.csv", rec, meta)
    if truth is not None:
        export_deviation(out / f"current_deviation_{stem}.csv", rec, truth.current, meta)
    if Av is not None:
        srec = FieldSamples("scalar", Av, grid)
        export_field(out / f"scalar_{stem}.csv", srec, meta)
        if truth is not None:
            export_deviation(out / f"scalar_deviation_{stem}.csv", srec, truth.scalar, meta)


def _write_summary(cfg, out, rows):
    (out / "summary.txt").write_text(
        f"# {cfg['modality']} {cfg['method']}\n" + _fmt_table(rows, SUMMARY_COLUMNS))
    with (out / "summary.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    rec = provenance(cfg)
    _sidecar(out / "summary.csv", rec)


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------

def run_oracle(cfg, out, points=None, paper_scale=False, rows=None, cols=None):
    """Scalar MEG block by both routes and its element-wise relative deviation.

    Returns
    -------
    dict
        ``series``, ``oracle`` and ``deviation`` blocks and their ``mean``.
    """
    if cfg["modality"] != "MEG":
        raise ConfigError("modality: the oracle comparison covers scalar MEG")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    sensors = build_sensors(cfg)
    rows = cfg["oracle"]["rows"] if rows is None else rows
    cols = cfg["oracle"]["cols"] if cols is None else cols
    for name, ids in (("rows", rows), ("cols", cols)):
        if not ids or min(ids) < 0 or max(ids) >= sensors.count:
            raise ConfigError(f"oracle.{name}: indices must lie in 0..{sensors.count - 1}")
    h = float((cfg["test_case"] or {}).get("h_data", 0.8))
    N = int((cfg["test_case"] or {}).get("N", 500))
    rho0 = cfg.model.rho0
    qmc = _qmc(cfg, points, paper_scale, 6)
    t0 = time.perf_counter()
    series = meg_gram(sensors, scalar_meg_weights(make_symbol("data-gen-scalar", h, N)), rho0,
                      MU0**2 / rho0**3, rows=rows, cols=cols)
    oracle, diag = integral_oracle_block(sensors, rows, cols, h, rho0, MU0, qmc,
                                         allow_paper_scale=paper_scale)
    dev = np.abs(oracle - series) / np.abs(series)
    elapsed = time.perf_counter() - t0
    path = out / "oracle_deviation.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "series", "oracle", "relative_deviation"])
        for a, r in enumerate(rows):
            for b, c in enumerate(cols):
                w.writerow([r, c, repr(float(series[a, b])), repr(float(oracle[a, b])),
                            repr(float(dev[a, b]))])
    result = {"mean": float(dev.mean()), "max": float(dev.max()), "points": qmc.point_count,
              "seconds": elapsed, "h_data": h}
    _sidecar(path, provenance(cfg, **{**diag, **result}))
    result.update(series=series, oracle=oracle, deviation=dev)
    return result


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------

def _check(name, fn):
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crashing check is a failed check
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return {"name": name, "passed": bool(ok), "detail": detail,
            "seconds": time.perf_counter() - t0}


def run_selftest(stencil=None, seed=0):
    """Fast invariant suite.

    Parameters
    ----------
    stencil : array_like, optional
        Replacement second-derivative stencil for the finite-difference
        checks; lets tests confirm that a corrupted stencil is caught.

    Returns
    -------
    list of dict
        ``name``, ``passed``, ``detail`` and ``seconds`` per check.
    """
    from numpy.polynomial import legendre as npleg

    from .kernels import scalar_kernel_closed, scalar_kernel_series
    from .specfun import spherical_harmonics, vector_legendre, vector_spherical_harmonics
    from .synthlab import (STENCIL_D2_ORDER8, fd_laplacian, kernel_grad_km,
                           kernel_grad_km_series, kernel_laplace_closed)

    rng = np.random.default_rng(seed)
    weights = STENCIL_D2_ORDER8 if stencil is None else np.asarray(stencil, float)

    def unit(k):
        v = rng.normal(size=(k, 3))
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    def addition_scalar():
        xi, eta = unit(20), unit(20)
        Yx, Ye = spherical_harmonics(50, xi), spherical_harmonics(50, eta)
        t = np.sum(xi * eta, axis=1)
        err = 0.0
        for n in (1, 7, 25, 50):
            sl = slice(n * n, (n + 1) ** 2)
            lhs = np.sum(Yx[:, sl] * Ye[:, sl], axis=1)
            rhs = (2 * n + 1) / (4 * np.pi) * npleg.legval(t, np.eye(n + 1)[n])
            err = max(err, float(np.max(np.abs(lhs - rhs))))
        return err < 1e-11, f"max error {err:.2e}"

    def addition_vector():
        xi, eta = unit(20), unit(20)
        Ye = spherical_harmonics(25, eta)
        err = 0.0
        for i in (1, 2, 3):
            y = vector_spherical_harmonics(i, 25, xi)
            for n in (1, 5, 25):
                sl = slice(n * n, (n + 1) ** 2)
                lhs = np.einsum("pja,pj->pa", y[:, sl], Ye[:, sl])
                rhs = (2 * n + 1) / (4 * np.pi) * vector_legendre(i, n, xi, eta)
                err = max(err, float(np.max(np.abs(lhs - rhs))))
        return err < 1e-9, f"max error {err:.2e}"

    def fd_poly():
        x = rng.uniform(-0.5, 0.5, size=(20, 3))
        f = lambda p: p[:, 0] ** 8 + p[:, 1] ** 2 * p[:, 2] ** 3 + p[:, 2] ** 2  # noqa: E731
        exact = 56 * x[:, 0] ** 6 + 2 * x[:, 2] ** 3 + 6 * x[:, 1] ** 2 * x[:, 2] + 2
        err = float(np.max(np.abs(fd_laplacian(f, x, 0.1, weights=weights) - exact)))
        return err < 1e-9, f"max error {err:.2e}"

    def closed_laplace():
        rho0, h = 0.071, 0.8
        x = 0.04 * unit(5) * rng.uniform(0.3, 1, (5, 1))
        z = 0.04 * unit(5) * rng.uniform(0.3, 1, (5, 1))
        f = lambda p: np.linalg.norm(p, axis=1) * scalar_kernel_closed(h, rho0, x, p)  # noqa
        fd = fd_laplacian(f, z, 1e-3, weights=weights)
        cl = kernel_laplace_closed(h, rho0, x, z)
        err = float(np.max(np.abs(fd - cl) / np.abs(cl)))
        return err < 1e-6, f"max relative error {err:.2e}"

    def kernel_parity():
        from .kernels import make_symbol as mk
        rho0, h = 0.071, 0.8
        x = rho0 * unit(50) * rng.uniform(0, 1, (50, 1))
        z = rho0 * unit(50) * rng.uniform(0, 1, (50, 1))
        sym = mk("data-gen-scalar", h, 500)
        a, b = scalar_kernel_series(sym, rho0, x, z), scalar_kernel_closed(h, rho0, x, z)
        err = float(np.max(np.abs(a - b) / np.abs(b)))
        return err < 1e-10, f"max relative error {err:.2e}"

    def grad_km():
        y = 0.11 * unit(10)
        x = 0.07 * unit(10) * rng.uniform(0, 1, (10, 1))
        a, b = kernel_grad_km(x, y), kernel_grad_km_series(x, y, terms=400)
        err = float(np.max(np.linalg.norm(a - b, axis=1) / np.linalg.norm(b, axis=1)))
        return err < 1e-8, f"max relative error {err:.2e}"

    def gram_psd():
        sens = synthetic_meg_sensors(40)
        bad = []
        for sysm in (assemble_scalar_meg(sens, make_symbol("scalar-meg", 0.9, 200), 0.071),
                     assemble_vector_meg(sens, make_symbol("vector-i3", 0.377, 200), 0.071)):
            M = sysm.matrix
            sym_err = np.max(np.abs(M - M.T)) / np.max(np.abs(M))
            ev = np.linalg.eigvalsh(M)
            if sym_err > 1e-12 or ev[0] < -1e-10 * ev[-1]:
                bad.append(sysm.method)
        return not bad, "ok" if not bad else f"failed: {bad}"

    def monotone():
        sens = synthetic_meg_sensors(40)
        sysm = assemble_scalar_meg(sens, make_symbol("scalar-meg", 0.9, 200), 0.071,
                                   data=rng.normal(size=40))
        sw = tikhonov_sweep(sysm, lambda_grid(sysm, 100))
        ok = sw.diagnostics["residual_monotone"] and sw.diagnostics["hnorm_monotone"]
        return ok, "residual and norm monotone" if ok else "monotonicity violated"

    checks = [("scalar addition theorem", addition_scalar),
              ("vector addition theorem", addition_vector),
              ("fd stencil on polynomials", fd_poly),
              ("closed Laplacian vs fd", closed_laplace),
              ("kernel series vs closed form", kernel_parity),
              ("kernel gradient vs series", grad_km),
              ("gramian symmetric psd", gram_psd),
              ("tikhonov monotonicity", monotone)]
    return [_check(n, f) for n, f in checks]


def format_selftest(results):
    rows = [{"check": r["name"], "result": "PASS" if r["passed"] else "FAIL",
             "detail": r["detail"], "seconds": f"{r['seconds']:.2f}"} for r in results]
    return _fmt_table(rows, ["check", "result", "detail", "seconds"])
