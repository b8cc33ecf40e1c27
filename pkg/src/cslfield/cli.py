"""Scenario runner.

Usage::

    sim <study> --config run.yaml [--out DIR] [--threads N] [--timestamp]
    sim validate --config run.yaml

The config is a YAML (or JSON) mapping with a fixed schema; unknown keys
and missing physics parameters are errors.  Example::

    model:   {m: 1.0, lambda: 0.1, box_length: 200.0, k_max: 20.0}
    clumps:  {n_particles: 5, sigma: 2.0, left_center: -20.0, right_center: 20.0}
    times:   {t_final: 50.0, samples: 40, stroboscopic: false}
    numerics: {n_max: null, dt: null, tolerances: {tail: 1.0e-6, truncation: 1.0e-9}}
    output:  {directory: out, formats: [csv]}
    kernel:  {gamma1: 0.5, gamma2: 0.1, omega: 1.0}   # kernel study only

Exit codes: 0 success, 2 invalid config, 3 numerical-regime abort,
4 I/O failure.  Failures print a JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml
from scipy import constants

from . import __version__
from .clump_states import ClumpPair, ClumpProfile, chi_momentum, clump_overlap
from .field_density import (
    FieldProfile,
    clump_dm,
    gaussian_pair_integral,
    h0_field_element_log,
    h0_max_exponent,
    h_field_element_log,
    is_stroboscopic,
)
from .kernel_solution import KernelRegimeError, closed_moments, coeffs_exact, thermal_map
from .units_modes import ModelParams, build_mode_grid, dispersion, oscillation_period, stroboscopic_times

log = logging.getLogger("cslfield")

SCHEMA_VERSION = "1"
STUDIES = ("decoherence", "production", "kernel", "field-exponent", "oracle-check")
NEG_INF = "-inf"

EXIT_OK, EXIT_CONFIG, EXIT_REGIME, EXIT_IO = 0, 2, 3, 4

# section -> {key: (types, required)}
_NUM = (int, float)
SCHEMA = {
    "study": None,
    "model": {"m": (_NUM, True), "lambda": (_NUM, True), "box_length": (_NUM, True), "k_max": (_NUM, True)},
    "clumps": {
        "n_particles": (_NUM, True),
        "sigma": (_NUM, True),
        "left_center": (_NUM, True),
        "right_center": (_NUM, True),
    },
    "times": {"t_final": (_NUM, True), "samples": (int, True), "stroboscopic": (bool, True)},
    "numerics": {"n_max": ((int, type(None)), False), "dt": ((*_NUM, type(None)), False), "tolerances": (dict, False)},
    "output": {"directory": (str, False), "formats": (list, False)},
    "kernel": {"gamma1": (_NUM, True), "gamma2": (_NUM, True), "omega": (_NUM, True)},
}
REQUIRED_SECTIONS = ("model", "clumps", "times")
TOLERANCE_KEYS = {"tail": 1e-6, "truncation": 1e-9}
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    def __init__(self, errors):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class ScenarioConfig:
    raw: dict
    study: str | None
    params: ModelParams
    pair: ClumpPair
    t_final: float
    samples: int
    stroboscopic: bool
    n_max: int | None
    dt: float | None
    tolerances: dict
    directory: str
    formats: tuple
    kernel: dict | None


def nucleon_period_seconds(mass_kg: float = constants.m_p) -> float:
    """Oscillation period ``2 pi hbar / (m c^2)`` in seconds."""
    return oscillation_period(mass_kg * constants.c**2 / constants.hbar)


# ---------------------------------------------------------------- config


def _is_num(v, types):
    if isinstance(v, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        return False
    return isinstance(v, types)


def check_config(raw) -> tuple[list[str], list[str]]:
    """Schema and physics checks; returns ``(errors, warnings)``."""
    errors: list[str] = []
    warns: list[str] = []
    if not isinstance(raw, dict):
        return ["config must be a mapping"], warns
    for key in raw:
        if key not in SCHEMA:
            errors.append(f"unknown key '{key}'")
    for sec in REQUIRED_SECTIONS:
        if sec not in raw:
            errors.append(f"missing section '{sec}'")
    if "study" in raw and raw["study"] not in STUDIES:
        errors.append(f"study must be one of {list(STUDIES)}")
    for sec, fields in SCHEMA.items():
        if fields is None or sec not in raw:
            continue
        body = raw[sec]
        if not isinstance(body, dict):
            errors.append(f"section '{sec}' must be a mapping")
            continue
        for key in body:
            if key not in fields:
                errors.append(f"unknown key '{sec}.{key}'")
        for key, (types, required) in fields.items():
            if key not in body:
                if required:
                    errors.append(f"missing field '{sec}.{key}'")
                continue
            if not _is_num(body[key], types):
                errors.append(f"field '{sec}.{key}' has wrong type {type(body[key]).__name__}")
    tol = raw.get("numerics", {}).get("tolerances", {}) if isinstance(raw.get("numerics"), dict) else {}
    if isinstance(tol, dict):
        for key, v in tol.items():
            if key not in TOLERANCE_KEYS:
                errors.append(f"unknown key 'numerics.tolerances.{key}'")
            elif not _is_num(v, _NUM) or not v > 0:
                errors.append(f"'numerics.tolerances.{key}' must be a positive number")
    fmts = raw.get("output", {}).get("formats", []) if isinstance(raw.get("output"), dict) else []
    if isinstance(fmts, list):
        for f in fmts:
            if f not in FORMATS:
                errors.append(f"unknown output format {f!r}")
    if errors:
        return errors, warns

    mdl = raw["model"]
    try:
        params = ModelParams(float(mdl["m"]), float(mdl["lambda"]), float(mdl["box_length"]), float(mdl["k_max"]))
        build_mode_grid(params)
    except ValueError as exc:
        errors.append(f"model: {exc}")
        params = None
    cl = raw["clumps"]
    try:
        ClumpPair(
            ClumpProfile(float(cl["n_particles"]), float(cl["sigma"]), float(cl["left_center"])),
            ClumpProfile(float(cl["n_particles"]), float(cl["sigma"]), float(cl["right_center"])),
        )
    except ValueError as exc:
        errors.append(f"clumps: {exc}")
    if params is not None and float(cl["sigma"]) * params.m < 1.0:
        warns.append(
            f"clumps.sigma * m = {float(cl['sigma']) * params.m:.3g} < 1; clumps are meant to be wide, sigma >> 1/m"
        )
    tm = raw["times"]
    if not tm["t_final"] > 0:
        errors.append("times.t_final must be positive")
    if tm["samples"] < 1:
        errors.append("times.samples must be at least 1")
    num = raw.get("numerics", {})
    if num.get("n_max") is not None and num["n_max"] < 2:
        errors.append("numerics.n_max must be at least 2")
    if num.get("dt") is not None and not num["dt"] > 0:
        errors.append("numerics.dt must be positive")
    if raw.get("study") == "kernel" and "kernel" not in raw:
        errors.append("missing section 'kernel' (needed by the kernel study)")
    if "kernel" in raw and not raw["kernel"]["omega"] > 0:
        errors.append("kernel.omega must be positive")
    return errors, warns


def load_raw(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"cannot parse config: {exc}"]) from exc


def build_config(raw) -> ScenarioConfig:
    errors, warns = check_config(raw)
    if errors:
        raise ConfigError(errors)
    for w in warns:
        log.warning(w)
    mdl, cl, tm = raw["model"], raw["clumps"], raw["times"]
    num = raw.get("numerics", {})
    out = raw.get("output", {})
    params = ModelParams(float(mdl["m"]), float(mdl["lambda"]), float(mdl["box_length"]), float(mdl["k_max"]))
    pair = ClumpPair(
        ClumpProfile(float(cl["n_particles"]), float(cl["sigma"]), float(cl["left_center"])),
        ClumpProfile(float(cl["n_particles"]), float(cl["sigma"]), float(cl["right_center"])),
    )
    tol = dict(TOLERANCE_KEYS)
    tol.update(num.get("tolerances") or {})
    return ScenarioConfig(
        raw=raw,
        study=raw.get("study"),
        params=params,
        pair=pair,
        t_final=float(tm["t_final"]),
        samples=int(tm["samples"]),
        stroboscopic=bool(tm["stroboscopic"]),
        n_max=num.get("n_max"),
        dt=None if num.get("dt") is None else float(num["dt"]),
        tolerances=tol,
        directory=out.get("directory", "out"),
        formats=tuple(out.get("formats", ["csv"])),
        kernel=raw.get("kernel"),
    )


def time_points(cfg: ScenarioConfig) -> np.ndarray:
    if cfg.stroboscopic:
        st = stroboscopic_times(cfg.t_final, cfg.params.m, cfg.samples)
        if st.warning:
            log.warning(st.warning)
        return np.asarray(st.times, dtype=float)
    if cfg.samples == 1:
        return np.array([cfg.t_final])
    return np.linspace(0.0, cfg.t_final, cfg.samples)


# ---------------------------------------------------------------- output


def fmt(v) -> str:
    """17 significant digits; infinities as sentinels, NaN refused."""
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        raise ValueError("refusing to serialise NaN")
    if math.isinf(v):
        return NEG_INF if v < 0 else "inf"
    return f"{v:.17g}"


def header_lines(cfg: ScenarioConfig, stamp: bool) -> list[str]:
    grid = build_mode_grid(cfg.params)
    lines = [
        f"schema_version: {SCHEMA_VERSION}",
        f"package_version: {__version__}",
        f"study: {cfg.study}",
        f"dk: {fmt(grid.dk)}",
        f"k_max: {fmt(grid.k_max)}",
        f"mode_count: {grid.n_modes}",
        "config: " + json.dumps(cfg.raw, sort_keys=True),
    ]
    if stamp:
        lines.append("timestamp: " + time.strftime("%Y-%m-%dT%H:%M:%S%z"))
    return lines


def write_csv(path: Path, header: list[str], columns: list[str], rows) -> None:
    buf = io.StringIO()
    for line in header:
        buf.write("# " + line + "\n")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8", newline="")


def write_json(path: Path, header: list[str], payload: dict) -> None:
    meta = dict(line.split(": ", 1) for line in header)
    meta["config"] = json.loads(meta["config"])
    doc = {"header": meta, "result": payload}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- studies


def study_decoherence(cfg: ScenarioConfig):
    grid = build_mode_grid(cfg.params)
    rows = []
    for t in time_points(cfg):
        dm = clump_dm(t, cfg.pair, grid, cfg.params)
        rows.append((t, dm.elements[0, 0], dm.elements[0, 1], dm.ratio, dm.k_factor))
    return ["t", "diag", "offdiag", "ratio", "K"], rows


def study_production(cfg: ScenarioConfig):
    from .observables import mode_energy, mode_occupation

    p = cfg.params
    grid = build_mode_grid(p)
    rate = grid.dk * p.lam / (2.0 * math.pi)
    rows = []
    for t in time_points(cfg):
        na, nb = mode_occupation(t, grid.k_values, 0.0, 0.0, p)
        e = mode_energy(t, grid.k_values, 0.0, p)
        e = np.broadcast_to(e, grid.k_values.shape)
        for j, k in enumerate(grid.k_values):
            rows.append((t, k, na[j], nb[j], e[j], rate))
    return ["t", "k", "n_a", "n_b", "energy_per_mode", "energy_density_rate"], rows


def study_kernel(cfg: ScenarioConfig):
    kp = cfg.kernel
    g1, g2, w = float(kp["gamma1"]), float(kp["gamma2"]), float(kp["omega"])
    lam = cfg.params.lam
    rows = []
    for t in time_points(cfg):
        c = coeffs_exact(t, w, lam, g1, g2)
        mom = closed_moments(t, w, lam, g1, g2)
        kT = thermal_map(c.S, w, c.one_minus_S)[0] if c.S > 0 else 0.0
        rows.append(
            (
                t,
                c.S,
                c.one_minus_S,
                c.R.real,
                c.R.imag,
                c.beta1.real,
                c.beta1.imag,
                c.beta2_star.real,
                c.beta2_star.imag,
                c.C.real,
                c.C.imag,
                mom.n_mean.real,
                mom.trace.real,
                kT,
            )
        )
    cols = [
        "t", "S", "one_minus_S", "R_re", "R_im", "beta1_re", "beta1_im",
        "beta2_star_re", "beta2_star_im", "C_re", "C_im", "n_mean", "trace", "kT",
    ]
    return cols, rows


def study_field_exponent(cfg: ScenarioConfig):
    """Exponents for the two clump-shaped field profiles ``sqrt(2/m) chi_s``."""
    p = cfg.params
    grid = build_mode_grid(p)
    c = math.sqrt(2.0 / p.m)
    f1 = FieldProfile.from_tilde(c * chi_momentum(grid.k_values, cfg.pair[1]), grid)
    f2 = FieldProfile.from_tilde(c * chi_momentum(grid.k_values, cfg.pair[2]), grid)
    chi1 = chi_momentum(grid.k_values, cfg.pair[1])
    chi2 = chi_momentum(grid.k_values, cfg.pair[2])
    rows = []
    for t in time_points(cfg):
        h0 = h0_field_element_log(f1, f2, t, cfg.pair, grid, p)
        h = h_field_element_log(f1, f2, t, cfg.pair, grid, p)
        mx = math.fsum(grid.dk * h0_max_exponent(grid.k_values, t, chi1, chi2, p))
        rows.append((t, h0.log_magnitude, h.log_magnitude, mx, 1 if is_stroboscopic(t, p.m) else 0))
    return ["t", "log_element_h0", "log_element_h", "log_max_offdiag_h0", "stroboscopic"], rows


def _suite(name, err, tol):
    err = float(err)
    return {"name": name, "passed": bool(err < tol), "measured_error": err, "tolerance": tol}


def study_oracle_check(cfg: ScenarioConfig, threads: int = 1) -> dict:
    """Short versions of the cross-validation suites, as a JSON report."""
    from .fock_oracle import (
        coherent_overlap_oracle,
        dm_position_element,
        eigenstate_residual,
        evolve_lindblad,
        moments,
    )
    from .kernel_solution import coeffs_approx, x_matrix_element

    p = cfg.params
    grid = build_mode_grid(p)
    w = float(dispersion(grid.k_values[0], p.m))
    tol = cfg.tolerances
    kw = dict(tail_tol=tol["tail"], truncation_tol=tol["truncation"])

    def moment_suite():
        t = min(cfg.t_final, 5.0 / w)
        errs = []
        for g1, g2 in ((0.5, 0.5), (0.7, 0.2)):
            dm = evolve_lindblad(g1, g2, p.lam, w, [t], n_max=cfg.n_max, dt=cfg.dt, **kw)[-1]
            errs.append(moments(dm).max_abs_diff(closed_moments(t, w, p.lam, g1, g2)))
        return _suite("moment_laws", max(errs), 1e-6)

    def kernel_suite():
        t = 2.0 * math.pi / w
        g1, g2 = 0.5, 0.1
        dm = evolve_lindblad(g1, g2, p.lam, w, [t], n_max=cfg.n_max, dt=cfg.dt, **kw)[-1]
        X = np.linspace(-2.0, 2.0, 9)
        ref = x_matrix_element(X[:, None], X[None, :], coeffs_approx(t, w, p.lam, g1, g2, stroboscopic=True))
        got = dm_position_element(dm, X, X)
        return _suite("kernel_cross_validation", np.max(np.abs(got - ref)), 1e-5)

    def thermal_suite():
        rng = np.random.default_rng(0)
        errs = []
        for _ in range(100):
            lam_t = rng.uniform(0.01, 100.0)
            om = rng.uniform(0.1, 10.0)
            a = lam_t / (2.0 * om)
            _, mean_n = thermal_map(a / (1.0 + a), om, 1.0 / (1.0 + a))
            errs.append(abs(mean_n - a) / a)
        return _suite("thermal_mapping", max(errs), 1e-12)

    def gaussian_suite():
        from scipy.integrate import dblquad

        args = (0.7, 0.3, -0.2, 0.5, 0.1)
        a, A, B, C, D = args
        f = lambda y, x: math.exp(-a * (x - y) ** 2 - (x - A) ** 2 - (x - B) ** 2 - (y - C) ** 2 - (y - D) ** 2)
        num, _ = dblquad(f, -12, 12, -12, 12, epsabs=1e-13, epsrel=1e-12)
        return _suite("gaussian_integral", abs(num - gaussian_pair_integral(*args)), 1e-6)

    def overlap_suite():
        small = ClumpPair(ClumpProfile(2.0, 1.0, -1.0), ClumpProfile(2.0, 1.0, 1.0))
        g = build_mode_grid(ModelParams(1.0, 0.0, 40.0, 8.0))
        got = coherent_overlap_oracle(small.left, small.right, g, 30)
        return _suite("coherent_overlap", abs(got - clump_overlap(small.left, small.right)), 1e-6)

    def eigen_suite():
        res = [eigenstate_residual(0.0, 1.0, n) for n in (10, 20, 30, 40)]
        return _suite("eigenstate_residual_vacuum", res[-1], 1e-3)

    def eigen_sweep_suite():
        res = [eigenstate_residual(0.3 + 0.1j, 1.0, n) for n in (10, 20, 30, 40)]
        out = _suite("eigenstate_residual_sweep", res[-1], 1e-3)
        out["residuals"] = res
        out["monotone"] = all(b < a for a, b in zip(res, res[1:]))
        out["passed"] = out["passed"] and out["monotone"]
        return out

    suites = [moment_suite, kernel_suite, thermal_suite, gaussian_suite, overlap_suite, eigen_suite, eigen_sweep_suite]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        results = list(ex.map(lambda fn: fn(), suites))
    return {"suites": results, "all_passed": all(r["passed"] for r in results)}


CSV_STUDIES = {
    "decoherence": study_decoherence,
    "production": study_production,
    "kernel": study_kernel,
    "field-exponent": study_field_exponent,
}


def run_scenario(cfg: ScenarioConfig, out_dir: str | None = None, threads: int = 1, timestamp: bool = False) -> list[Path]:
    """Run the configured study and write its artifacts; returns the paths."""
    study = cfg.study
    if study not in STUDIES:
        raise ConfigError([f"study must be one of {list(STUDIES)}"])
    directory = Path(out_dir if out_dir is not None else cfg.directory)
    directory.mkdir(parents=True, exist_ok=True)
    header = header_lines(cfg, timestamp)
    written = []
    stem = study.replace("-", "_")
    if study == "oracle-check":
        path = directory / f"{stem}.json"
        write_json(path, header, study_oracle_check(cfg, threads))
        return [path]
    cols, rows = CSV_STUDIES[study](cfg)
    if "csv" in cfg.formats:
        path = directory / f"{stem}.csv"
        write_csv(path, header, cols, rows)
        written.append(path)
    if "json" in cfg.formats:
        path = directory / f"{stem}.json"
        payload = {"columns": cols, "rows": [[fmt(v) for v in r] for r in rows]}
        write_json(path, header, payload)
        written.append(path)
    return written


def validate_config(path) -> dict:
    """Parse-only check: ``{"errors": [...], "warnings": [...]}``."""
    try:
        raw = load_raw(path)
    except ConfigError as exc:
        return {"errors": exc.errors, "warnings": []}
    errors, warns = check_config(raw)
    return {"errors": errors, "warnings": warns}


# ---------------------------------------------------------------- entry point


def _fail(code: int, kind: str, message, extra=None) -> int:
    doc = {"error": kind, "exit_code": code, "message": message}
    if extra:
        doc.update(extra)
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")
    return code


def resolve_threads(arg) -> int:
    if arg is not None:
        return max(1, int(arg))
    env = os.environ.get("SIM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer SIM_THREADS=%r", env)
    return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sim", description="Collapse-model scenario runner.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in STUDIES:
        sp = sub.add_parser(name, help=f"run the {name} study")
        sp.add_argument("--config", required=True, help="YAML or JSON scenario file")
        sp.add_argument("--out", default=None, help="output directory (overrides output.directory)")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (fallback: SIM_THREADS)")
        sp.add_argument("--timestamp", action="store_true", help="add a timestamp line to headers")
    vp = sub.add_parser("validate", help="check a config without running it")
    vp.add_argument("--config", required=True)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    if args.command == "validate":
        try:
            report = validate_config(args.config)
        except OSError as exc:
            return _fail(EXIT_IO, "io", str(exc))
        print(json.dumps(report, indent=2, sort_keys=True))
        return EXIT_CONFIG if report["errors"] else EXIT_OK

    try:
        raw = load_raw(args.config)
        if isinstance(raw, dict):
            raw = dict(raw)
            if raw.setdefault("study", args.command) != args.command:
                raise ConfigError([f"config study '{raw['study']}' does not match command '{args.command}'"])
        cfg = build_config(raw)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", exc.errors[0], {"errors": exc.errors})
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))

    from .fock_oracle import TruncationError

    try:
        paths = run_scenario(cfg, args.out, resolve_threads(args.threads), args.timestamp)
    except TruncationError as exc:
        return _fail(EXIT_REGIME, "truncation", str(exc), {"n_max_hint": exc.hint})
    except KernelRegimeError as exc:
        return _fail(EXIT_REGIME, "regime", str(exc))
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
