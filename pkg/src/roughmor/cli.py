"""Experiment runner.

Subcommands: ``reduce`` (build, Gramians, two-stage reduction, shared-path
simulation of full and reduced models), ``sweep`` (lossy rank sweep),
``probes`` (bundled verification probes on builtin fixtures), ``simulate``
(integrate the full model), ``gramian`` (solve both algebraic Gramians and
dump spectra).

Configuration comes from a flat key=value file plus command-line overrides;
every run echoes the resolved config into the output directory. All artifacts
are CSV or JSON, written atomically, and bitwise deterministic given (config,
seed); wall-clock timings go to stdout only.

Exit codes: 0 success, 1 argument/precondition/stability failure,
2 numerical failure, 3 probe failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import (ArgumentError, CapabilityError, ConvergenceError,
                     EmptyBasisError, IntegrationOverflowError,
                     NumericalError, PreconditionError, RoughmorError,
                     StepFailureError)
from ._fixtures import (decoupled_observability_system, mild_stable_system,
                        scalar_noise_system, unstable_system)
from ._util import atomic_write_text, fmt
from .drivers import (DriverPath, read_path_csv, sample_fbm_path,
                      smooth_path_from_function, write_path_csv)
from .gramians import (gramian_spectrum, integrate_gramian_ode,
                       monte_carlo_second_moment, solve_algebraic_gramian,
                       write_spectrum_csv)
from .heat import Heat1dConfig, build_heat1d, builtin_coefficient, \
    default_heat1d_config
from .reduction import (DEFAULT_TOL_P, DEFAULT_TOL_Q, PIPELINE_GRAMIAN_TOL,
                        check_kernel_preservation, greedy_rank_sweep,
                        kernel_preservation_scale, truncate_psd_spectrum,
                        two_stage_reduce, write_stage_metadata_csv)
from .solver import (pointwise_relative_error, relative_L2_error,
                     rough_rk_simulate, smooth_quadratic_form_probe,
                     write_error_csv, write_states_csv, write_trajectory_csv)
from .system import (BilinearRoughSystem, is_mean_square_stable,
                     positivity_scale, resolvent_positivity_probe)

_DEFAULTS = {
    "model": "heat1d",
    "model_file": None,
    "n": 100,
    "hurst": 0.4,
    "horizon": 0.5,
    "step_exp": 10,
    "seed": 2023,
    "tol_p": DEFAULT_TOL_P,
    "tol_q": DEFAULT_TOL_Q,
    "ranks": None,
    "out": "roughmor-run",
    "path_file": None,
    "beta": None,
    "gamma": None,
    "init": None,
    "fixture": "stable",
    "states": False,
}

_INT_KEYS = {"n", "step_exp", "seed"}
_FLOAT_KEYS = {"hurst", "horizon", "tol_p", "tol_q"}
_BOOL_KEYS = {"states"}


@dataclass(frozen=True)
class RunConfig:
    """Resolved run parameters (defaults, then config file, then flags)."""

    mode: str
    model: str
    model_file: Optional[str]
    n: int
    hurst: float
    horizon: float
    step_exponent: int
    seed: int
    tol_P: float
    tol_Q: float
    target_ranks: Optional[tuple]
    output_dir: str
    path_file: Optional[str]
    beta: Optional[str]
    gamma: Optional[str]
    init: Optional[str]
    fixture: str
    dump_states: bool

    def __post_init__(self):
        if self.model not in ("heat1d", "file"):
            raise ArgumentError(
                f"model must be 'heat1d' or 'file', got {self.model!r}")
        if self.model == "file" and not self.model_file:
            raise ArgumentError("--model file requires --model-file")
        if self.n < 2:
            raise ArgumentError(f"need n >= 2, got {self.n}")
        if not (0.0 < self.hurst < 1.0):
            raise ArgumentError(
                f"Hurst index must lie in (0, 1), got {self.hurst}")
        if not (self.horizon > 0.0):
            raise ArgumentError(f"need horizon > 0, got {self.horizon}")
        if self.step_exponent < 0 or 2.0 ** (-self.step_exponent) > self.horizon:
            raise ArgumentError(
                f"step 2^-{self.step_exponent} exceeds the horizon "
                f"{self.horizon}")
        for name, tol in (("tol-p", self.tol_P), ("tol-q", self.tol_Q)):
            if not (0.0 < tol < 1.0):
                raise ArgumentError(
                    f"{name} must lie in (0, 1), got {tol}")
        if self.fixture not in ("stable", "unstable"):
            raise ArgumentError(
                f"fixture must be 'stable' or 'unstable', got {self.fixture!r}")

    def echo_lines(self):
        """Flat key=value lines of the resolved configuration, sorted."""
        def render(value):
            if value is None:
                return ""
            if isinstance(value, bool):
                return "true" if value else "false"
            if isinstance(value, float):
                return fmt(value)
            if isinstance(value, tuple):
                return ",".join(str(v) for v in value)
            return str(value)

        items = {
            "beta": self.beta, "fixture": self.fixture, "gamma": self.gamma,
            "horizon": self.horizon, "hurst": self.hurst, "init": self.init,
            "mode": self.mode, "model": self.model,
            "model_file": self.model_file, "n": self.n,
            "out": self.output_dir, "path_file": self.path_file,
            "ranks": self.target_ranks, "seed": self.seed,
            "states": self.dump_states, "step_exp": self.step_exponent,
            "tol_p": self.tol_P, "tol_q": self.tol_Q,
        }
        return [f"{key}={render(items[key])}" for key in sorted(items)]


def _parse_config_file(path):
    entries = {}
    try:
        with open(path) as handle:
            for lineno, raw in enumerate(handle, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ArgumentError(
                        f"{path}:{lineno}: expected key=value, got {line!r}")
                key, _, value = line.partition("=")
                key = key.strip()
                if key not in _DEFAULTS:
                    raise ArgumentError(
                        f"{path}:{lineno}: unknown config key {key!r}")
                entries[key] = value.strip()
    except OSError as exc:
        raise ArgumentError(f"cannot read config file {path}: {exc}") from exc
    return entries


def _coerce(key, value):
    if value is None or not isinstance(value, str):
        return value
    if value == "":
        return None
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _BOOL_KEYS:
            if value.lower() in ("true", "1", "yes"):
                return True
            if value.lower() in ("false", "0", "no"):
                return False
            raise ValueError(value)
        if key == "ranks":
            return tuple(int(tok) for tok in value.split(",") if tok.strip())
    except ValueError as exc:
        raise ArgumentError(
            f"could not parse config value {key}={value!r}") from exc
    return value


def resolve_config(args) -> RunConfig:
    resolved = dict(_DEFAULTS)
    if getattr(args, "config", None):
        for key, value in _parse_config_file(args.config).items():
            resolved[key] = _coerce(key, value)
    for key in _DEFAULTS:
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            resolved[key] = _coerce(key, cli_value)
    return RunConfig(
        mode=args.command,
        model=resolved["model"],
        model_file=resolved["model_file"],
        n=resolved["n"],
        hurst=resolved["hurst"],
        horizon=resolved["horizon"],
        step_exponent=resolved["step_exp"],
        seed=resolved["seed"],
        tol_P=resolved["tol_p"],
        tol_Q=resolved["tol_q"],
        target_ranks=resolved["ranks"],
        output_dir=resolved["out"],
        path_file=resolved["path_file"],
        beta=resolved["beta"],
        gamma=resolved["gamma"],
        init=resolved["init"],
        fixture=resolved["fixture"],
        dump_states=bool(resolved["states"]),
    )


def read_system_file(path) -> BilinearRoughSystem:
    """Load a system from the plain-text matrix format.

    Header line ``n d p``, then the entries of A, N_1..N_d, K, C, x0 in
    row-major order; whitespace and line breaks are free, lines starting
    with # are comments.
    """
    try:
        with open(path) as handle:
            tokens = []
            for line in handle:
                line = line.split("#", 1)[0]
                tokens.extend(line.split())
    except OSError as exc:
        raise ArgumentError(f"cannot read model file {path}: {exc}") from exc
    if len(tokens) < 3:
        raise ArgumentError(f"{path}: missing 'n d p' header")
    try:
        n, d, p = (int(tokens[i]) for i in range(3))
    except ValueError as exc:
        raise ArgumentError(f"{path}: malformed 'n d p' header") from exc
    need = n * n * (1 + d) + d * d + p * n + n
    body = tokens[3:]
    if len(body) != need:
        raise ArgumentError(
            f"{path}: expected {need} matrix entries for n={n}, d={d}, "
            f"p={p}, found {len(body)}")
    try:
        values = np.array([float(tok) for tok in body])
    except ValueError as exc:
        raise ArgumentError(f"{path}: non-numeric matrix entry") from exc
    pos = 0

    def take(rows, cols):
        nonlocal pos
        block = values[pos:pos + rows * cols].reshape(rows, cols)
        pos += rows * cols
        return block

    A = take(n, n)
    N = tuple(take(n, n) for _ in range(d))
    K = take(d, d)
    C = take(p, n)
    x0 = take(1, n).reshape(-1)
    return BilinearRoughSystem(A=A, N=N, K=K, C=C, x0=x0)


def write_system_file(model_sys: BilinearRoughSystem, path) -> None:
    """Write a system in the plain-text matrix format read_system_file reads."""
    lines = [f"{model_sys.n} {model_sys.d} {model_sys.p}"]

    def block(label, M):
        lines.append(f"# {label}")
        for row in np.atleast_2d(M):
            lines.append(" ".join(fmt(v) for v in row))

    block("A", model_sys.A)
    for i, Ni in enumerate(model_sys.N):
        block(f"N{i + 1}", Ni)
    block("K", model_sys.K)
    block("C", model_sys.C)
    block("x0", model_sys.x0)
    atomic_write_text(path, "\n".join(lines) + "\n")


def build_model(cfg: RunConfig) -> BilinearRoughSystem:
    if cfg.model == "file":
        return read_system_file(cfg.model_file)
    if cfg.beta is None and cfg.gamma is None and cfg.init is None:
        return build_heat1d(default_heat1d_config(cfg.n))
    if (cfg.beta is None) != (cfg.gamma is None):
        raise ArgumentError(
            "beta and gamma overrides must be given together (one "
            "coefficient per channel, ';'-separated)")
    if cfg.beta is not None:
        beta = [builtin_coefficient(s) for s in cfg.beta.split(";")]
        gamma = [builtin_coefficient(s) for s in cfg.gamma.split(";")]
    else:
        default = default_heat1d_config(cfg.n)
        beta, gamma = list(default.beta), list(default.gamma)
    init = builtin_coefficient(cfg.init) if cfg.init is not None \
        else default_heat1d_config(cfg.n).initial_profile
    return build_heat1d(Heat1dConfig(
        n=cfg.n, beta=beta, gamma=gamma, initial_profile=init,
        K=np.eye(len(beta))))


def resolve_driver(cfg: RunConfig, d: int) -> DriverPath:
    if cfg.path_file:
        path = read_path_csv(cfg.path_file)
        if path.d != d:
            raise ArgumentError(
                f"stored path has {path.d} components but the model "
                f"drives {d}")
        span = path.T - path.t0
        if abs(span - cfg.horizon) > 1e-9 * max(cfg.horizon, 1.0):
            raise ArgumentError(
                f"stored path spans {span} but the horizon is {cfg.horizon}")
        return path
    # step exponent m means step 2^-m, so the count is horizon / 2^-m
    steps = cfg.horizon * 2.0 ** cfg.step_exponent
    if abs(steps - round(steps)) > 1e-9:
        raise ArgumentError(
            f"horizon {cfg.horizon} is not a multiple of the step "
            f"2^-{cfg.step_exponent}")
    return sample_fbm_path(cfg.hurst, d, cfg.horizon, int(round(steps)),
                           cfg.seed)


def _ensure_outdir(cfg: RunConfig) -> str:
    os.makedirs(cfg.output_dir, exist_ok=True)
    return cfg.output_dir

def _echo_config(cfg: RunConfig, outdir) -> str:
    atomic_write_text(os.path.join(outdir, "config.txt"),
                      "\n".join(cfg.echo_lines()) + "\n")
    return "config.txt"


def _write_summary(outdir, payload) -> None:
    atomic_write_text(os.path.join(outdir, "summary.json"),
                      json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _stability_gate(model_sys: BilinearRoughSystem) -> None:
    report = is_mean_square_stable(model_sys, method="iterative")
    if not report.is_mean_square_stable:
        detail = "drift spectrum reaches the closed right half plane" \
            if report.rho is None \
            else f"splitting spectral radius {report.rho:.6g} >= 1"
        raise PreconditionError(
            f"model is not mean-square asymptotically stable ({detail}); "
            "Gramian-based reduction does not apply")


def run_exact_reduction(cfg: RunConfig) -> int:
    outdir = _ensure_outdir(cfg)
    artifacts = [_echo_config(cfg, outdir)]
    t0 = time.perf_counter()
    model_sys = build_model(cfg)
    _stability_gate(model_sys)
    t1 = time.perf_counter()
    model, meta = two_stage_reduce(model_sys, tol_P=cfg.tol_P,
                                   tol_Q=cfg.tol_Q)
    t2 = time.perf_counter()
    if meta.notice:
        print(f"notice: {meta.notice}")

    path = resolve_driver(cfg, model_sys.d)
    write_path_csv(path, os.path.join(outdir, "driver_path.csv"))
    artifacts.append("driver_path.csv")

    full = rough_rk_simulate(model_sys, path)
    reduced = rough_rk_simulate(model, path)
    t3 = time.perf_counter()

    rel = relative_L2_error(full.outputs, reduced.outputs, full.times)
    pw = pointwise_relative_error(full.outputs, reduced.outputs, full.times)

    write_spectrum_csv(meta.p_spectrum,
                       os.path.join(outdir, "gramian_spectrum_p.csv"))
    artifacts.append("gramian_spectrum_p.csv")
    if meta.q_spectrum is not None:
        write_spectrum_csv(meta.q_spectrum,
                           os.path.join(outdir, "gramian_spectrum_q.csv"))
        artifacts.append("gramian_spectrum_q.csv")
    write_stage_metadata_csv(meta, os.path.join(outdir, "stage_metadata.csv"))
    artifacts.append("stage_metadata.csv")
    write_trajectory_csv(full, os.path.join(outdir, "output_full.csv"))
    artifacts.append("output_full.csv")
    write_trajectory_csv(reduced, os.path.join(outdir, "output_reduced.csv"))
    artifacts.append("output_reduced.csv")
    write_error_csv(pw.times, pw.values,
                    os.path.join(outdir, "pointwise_error.csv"))
    artifacts.append("pointwise_error.csv")
    if cfg.dump_states:
        write_states_csv(full, os.path.join(outdir, "states_full.csv"))
        artifacts.append("states_full.csv")

    artifacts.append("summary.json")
    _write_summary(outdir, {
        "status": "ok",
        "command": "reduce",
        "orders": list(meta.orders),
        "relative_l2_error": float(rel),
        "error_is_absolute": rel.is_absolute,
        "gramian": {
            "p_iterations": meta.p_iterations,
            "p_residual": meta.p_residual,
            "q_iterations": meta.q_iterations,
            "q_residual": meta.q_residual,
        },
        "solver": {
            "max_newton_iterations_full": full.max_newton_iterations,
            "max_newton_iterations_reduced": reduced.max_newton_iterations,
            "max_linear_residual_full": full.max_linear_residual,
            "max_linear_residual_reduced": reduced.max_linear_residual,
        },
        "notice": meta.notice,
        "artifacts": artifacts,
        "config": cfg.echo_lines(),
    })

    orders_txt = " -> ".join(str(r) for r in meta.orders)
    print(f"orders: {orders_txt}")
    print(f"relative L2 error (full vs reduced): {float(rel):.6e}"
          + (" [absolute: reference output is zero]" if rel.is_absolute
             else ""))
    print(f"timings: build+gate {t1 - t0:.2f} s, reduction {t2 - t1:.2f} s, "
          f"simulation {t3 - t2:.2f} s")
    print(f"artifacts in {outdir}")
    return 0


def run_sweep(cfg: RunConfig) -> int:
    outdir = _ensure_outdir(cfg)
    artifacts = [_echo_config(cfg, outdir)]
    t0 = time.perf_counter()
    model_sys = build_model(cfg)
    if model_sys.drift_nonlinearity is not None:
        raise PreconditionError("the rank sweep requires f = 0")
    _stability_gate(model_sys)
    model, meta = two_stage_reduce(model_sys, tol_P=cfg.tol_P,
                                   tol_Q=cfg.tol_Q)
    ranks = cfg.target_ranks
    if not ranks:
        ranks = tuple(range(5, model.r + 1, 2))
    entries = greedy_rank_sweep(model, ranks)
    t1 = time.perf_counter()

    path = resolve_driver(cfg, model_sys.d)
    write_path_csv(path, os.path.join(outdir, "driver_path.csv"))
    artifacts.append("driver_path.csv")
    full = rough_rk_simulate(model_sys, path)

    rows = []
    for entry in entries:
        res = rough_rk_simulate(entry.system, path)
        err = relative_L2_error(full.outputs, res.outputs, full.times)
        rows.append((entry.requested_rank, entry.actual_rank, float(err)))
    t2 = time.perf_counter()

    lines = ["r,rel_L2_error"]
    for requested, _actual, err in rows:
        lines.append(f"{requested},{fmt(err)}")
    atomic_write_text(os.path.join(outdir, "sweep_errors.csv"),
                      "\n".join(lines) + "\n")
    artifacts.append("sweep_errors.csv")

    artifacts.append("summary.json")
    _write_summary(outdir, {
        "status": "ok",
        "command": "sweep",
        "orders": list(meta.orders),
        "table": [{"r": requested, "actual_r": actual, "rel_L2_error": err}
                  for requested, actual, err in rows],
        "artifacts": artifacts,
        "config": cfg.echo_lines(),
    })

    print(f"exact orders: {' -> '.join(str(r) for r in meta.orders)}")
    for requested, actual, err in rows:
        clamp = "" if requested == actual else f" (clamped to {actual})"
        print(f"  r = {requested:3d}{clamp}: rel L2 error = {err:.6e}")
    print(f"timings: reduction+sweep {t1 - t0:.2f} s, "
          f"simulations {t2 - t1:.2f} s")
    print(f"artifacts in {outdir}")
    return 0


def run_probes(cfg: RunConfig) -> int:
    outdir = _ensure_outdir(cfg)
    artifacts = [_echo_config(cfg, outdir)]
    t0 = time.perf_counter()
    checks = []

    mild = mild_stable_system(3, 1, seed=99)
    stability_target = unstable_system() if cfg.fixture == "unstable" \
        else mild
    report = is_mean_square_stable(stability_target, method="iterative")
    rho = report.rho if report.rho is not None else math.inf
    checks.append(("mean_square_stability", rho, 1.0,
                   report.is_mean_square_stable))

    value = resolvent_positivity_probe(mild, trials=10_000, seed=7)
    bound = -1e-10 * positivity_scale(mild)
    checks.append(("resolvent_positivity", value, bound, value >= bound))

    dec = decoupled_observability_system()
    Q = solve_algebraic_gramian(dec, "obs", tol=1e-12)
    wq, Vq = scipy.linalg.eigh((Q.matrix + Q.matrix.T) / 2)
    z = Vq[:, 0]
    triple = check_kernel_preservation(dec, Q.matrix, z)
    scale = kernel_preservation_scale(dec, Q.matrix, z)
    value = max(triple)
    bound = 1e-8 * scale
    checks.append(("kernel_preservation", value, bound, value <= bound))

    scalar = scalar_noise_system()
    sine = smooth_path_from_function(lambda t: np.array([math.sin(t)]),
                                     0.5, 64, name="sine")
    probe = smooth_quadratic_form_probe(scalar, sine, 0.5, 512)
    bound = -1e-6 * probe.xbar_final_norm
    checks.append(("gronwall_quadratic_form", probe.min_eigenvalue, bound,
                   probe.min_eigenvalue >= bound))

    ode = integrate_gramian_ode(mild, "reach", T=1.0, steps=1000)
    mc = monte_carlo_second_moment(mild, "reach", T=1.0, n_paths=100_000,
                                   dt=1e-3, seed=4242)
    dev = np.abs(mc.integral - ode.matrix) / np.where(
        mc.integral_se > 0, mc.integral_se, 1.0)
    frac = float((dev <= 3.0).mean())
    checks.append(("mc_gramian_cross_check", frac, 0.95, frac >= 0.95))
    t1 = time.perf_counter()

    lines = ["name,value,bound,status"]
    for name, value, bound, passed in checks:
        lines.append(f"{name},{fmt(value)},{fmt(bound)},"
                     f"{'pass' if passed else 'fail'}")
    atomic_write_text(os.path.join(outdir, "probes_report.csv"),
                      "\n".join(lines) + "\n")
    artifacts.append("probes_report.csv")

    all_passed = all(passed for _, _, _, passed in checks)
    artifacts.append("summary.json")
    _write_summary(outdir, {
        "status": "ok" if all_passed else "probe_failure",
        "command": "probes",
        "fixture": cfg.fixture,
        "checks": [{"name": name, "value": value, "bound": bound,
                    "passed": passed}
                   for name, value, bound, passed in checks],
        "artifacts": artifacts,
        "config": cfg.echo_lines(),
    })

    for name, value, bound, passed in checks:
        print(f"{'PASS' if passed else 'FAIL'}  {name}: value {value:.6e}, "
              f"bound {bound:.6e}")
    print(f"probe suite finished in {t1 - t0:.2f} s; artifacts in {outdir}")
    return 0 if all_passed else 3


def run_simulate(cfg: RunConfig) -> int:
    outdir = _ensure_outdir(cfg)
    artifacts = [_echo_config(cfg, outdir)]
    t0 = time.perf_counter()
    model_sys = build_model(cfg)
    path = resolve_driver(cfg, model_sys.d)
    write_path_csv(path, os.path.join(outdir, "driver_path.csv"))
    artifacts.append("driver_path.csv")
    result = rough_rk_simulate(model_sys, path)
    t1 = time.perf_counter()
    write_trajectory_csv(result, os.path.join(outdir, "output_full.csv"))
    artifacts.append("output_full.csv")
    if cfg.dump_states:
        write_states_csv(result, os.path.join(outdir, "states_full.csv"))
        artifacts.append("states_full.csv")
    artifacts.append("summary.json")
    _write_summary(outdir, {
        "status": "ok",
        "command": "simulate",
        "steps": path.M,
        "solver": {
            "max_newton_iterations": result.max_newton_iterations,
            "max_linear_residual": result.max_linear_residual,
        },
        "artifacts": artifacts,
        "config": cfg.echo_lines(),
    })
    print(f"simulated {path.M} steps in {t1 - t0:.2f} s; "
          f"artifacts in {outdir}")
    return 0


def run_gramian(cfg: RunConfig) -> int:
    outdir = _ensure_outdir(cfg)
    artifacts = [_echo_config(cfg, outdir)]
    t0 = time.perf_counter()
    model_sys = build_model(cfg)
    _stability_gate(model_sys)
    P = solve_algebraic_gramian(model_sys, "reach",
                                tol=PIPELINE_GRAMIAN_TOL, polish=True)
    Q = solve_algebraic_gramian(model_sys, "obs",
                                tol=PIPELINE_GRAMIAN_TOL, polish=True)
    t1 = time.perf_counter()
    write_spectrum_csv(gramian_spectrum(P.matrix),
                       os.path.join(outdir, "gramian_spectrum_p.csv"))
    artifacts.append("gramian_spectrum_p.csv")
    write_spectrum_csv(gramian_spectrum(Q.matrix),
                       os.path.join(outdir, "gramian_spectrum_q.csv"))
    artifacts.append("gramian_spectrum_q.csv")

    def numerical_rank(G, tol):
        try:
            return truncate_psd_spectrum(G, tol).r
        except EmptyBasisError:
            return 0

    artifacts.append("summary.json")
    _write_summary(outdir, {
        "status": "ok",
        "command": "gramian",
        "reach": {"residual": P.residual, "iterations": P.iterations,
                  "numerical_rank": numerical_rank(P.matrix, cfg.tol_P)},
        "obs": {"residual": Q.residual, "iterations": Q.iterations,
                "numerical_rank": numerical_rank(Q.matrix, cfg.tol_Q)},
        "artifacts": artifacts,
        "config": cfg.echo_lines(),
    })
    print(f"reach: residual {P.residual:.3e} after {P.iterations} sweeps, "
          f"numerical rank {numerical_rank(P.matrix, cfg.tol_P)} "
          f"at tol {cfg.tol_P:g}")
    print(f"obs:   residual {Q.residual:.3e} after {Q.iterations} sweeps, "
          f"numerical rank {numerical_rank(Q.matrix, cfg.tol_Q)} "
          f"at tol {cfg.tol_Q:g}")
    print(f"timings: solves {t1 - t0:.2f} s; artifacts in {outdir}")
    return 0


_RUNNERS = {
    "reduce": run_exact_reduction,
    "sweep": run_sweep,
    "probes": run_probes,
    "simulate": run_simulate,
    "gramian": run_gramian,
}


class _Parser(argparse.ArgumentParser):
    # exit code 1 for bad usage (argparse defaults to 2, which this tool
    # reserves for numerical failures)
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat key=value configuration file")
    common.add_argument("--model", choices=["heat1d", "file"],
                        help="builtin heat model or matrices from a file")
    common.add_argument("--model-file", dest="model_file",
                        help="matrix file ('n d p' header, then A, N_1..N_d, "
                             "K, C, x0 row-major)")
    common.add_argument("--n", type=int, help="interior grid size (heat1d)")
    common.add_argument("--hurst", type=float,
                        help="Hurst index of the fBm driver")
    common.add_argument("--horizon", type=float, help="time horizon T")
    common.add_argument("--step-exp", dest="step_exp", type=int,
                        help="step exponent m, step = 2^-m")
    common.add_argument("--seed", type=int, help="driver seed")
    common.add_argument("--tol-p", dest="tol_p", type=float,
                        help="relative truncation threshold, reach stage")
    common.add_argument("--tol-q", dest="tol_q", type=float,
                        help="relative truncation threshold, obs stage")
    common.add_argument("--ranks", help="comma-separated target ranks "
                                        "(sweep), e.g. 5,7,9")
    common.add_argument("--out", help="output directory")
    common.add_argument("--path-file", dest="path_file",
                        help="reuse a stored driver path CSV")
    common.add_argument("--states", action="store_const", const=True,
                        default=None, help="also dump the state trajectory")
    common.add_argument("--fixture", choices=["stable", "unstable"],
                        help="probe fixture selection (probes)")

    parser = _Parser(
        prog="roughmor",
        description="Gramian-based dimension reduction of bilinear rough "
                    "differential equations")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)
    sub.add_parser("reduce", parents=[common],
                   help="two-stage exact reduction with shared-path "
                        "verification")
    sub.add_parser("sweep", parents=[common],
                   help="lossy rank sweep below the exact order")
    sub.add_parser("probes", parents=[common],
                   help="run the verification probe suite")
    sub.add_parser("simulate", parents=[common],
                   help="integrate the full model along a driver path")
    sub.add_parser("gramian", parents=[common],
                   help="solve both algebraic Gramians and dump spectra")
    return parser


def _mark_incomplete(cfg: Optional[RunConfig], exc: Exception) -> None:
    if cfg is None or not os.path.isdir(cfg.output_dir):
        return
    try:
        _write_summary(cfg.output_dir, {
            "status": "failed",
            "command": cfg.mode,
            "error": str(exc),
            "config": cfg.echo_lines(),
        })
    except OSError:
        pass


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = None
    try:
        cfg = resolve_config(args)
        return _RUNNERS[cfg.mode](cfg)
    except (ArgumentError, PreconditionError, CapabilityError) as exc:
        _mark_incomplete(cfg, exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConvergenceError, NumericalError, IntegrationOverflowError,
            StepFailureError, EmptyBasisError, RoughmorError,
            np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        _mark_incomplete(cfg, exc)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
