"""Time integration along rough and smooth drivers, plus error metrics.

The integrator is a two-stage diagonally implicit Runge-Kutta scheme driven by
the increments of the time-augmented path (dt, dW): each stage solves

    Z_i = z_k + sum_j a_ij [G Z_j + dt f(Z_j)],   G = A dt + sum_m s_m N_m,

with s = K^{1/2} dW, one LU factorization per distinct diagonal entry per
step, and Newton iteration when the drift nonlinearity is present. No
iterated integrals of the driver enter: the scheme uses increments only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import (ArgumentError, GuardedScalar, IntegrationOverflowError,
                     StepFailureError)
from ._util import atomic_write_text, fmt
from .drivers import DriverKind, DriverPath, piecewise_linear_derivative
from .gramians import integrate_gramian_ode
from .reduction import ReducedModel
from .system import BilinearRoughSystem, drift_f

DEFAULT_NEWTON_TOL = 1e-12
DEFAULT_NEWTON_MAX = 50


@dataclass(frozen=True)
class ButcherTableau:
    """Coefficients of a diagonally implicit Runge-Kutta method."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ArgumentError(f"a must be square, got shape {a.shape}")
        s = a.shape[0]
        if b.shape != (s,):
            raise ArgumentError(f"b must have length {s}, got shape {b.shape}")
        if np.any(np.triu(a, 1) != 0.0):
            raise ArgumentError(
                "tableau is not diagonally implicit (a_ij != 0 above the "
                "diagonal)")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def s(self) -> int:
        return self.a.shape[0]


def crouzeix_tableau() -> ButcherTableau:
    """The A-stable two-stage DIRK with a11 = a22 = 1/2 + sqrt(3)/6."""
    g = 0.5 + math.sqrt(3.0) / 6.0
    a = np.array([[g, 0.0],
                  [-math.sqrt(3.0) / 3.0, g]])
    b = np.array([0.5, 0.5])
    return ButcherTableau(a=a, b=b)


@dataclass(frozen=True)
class SimulationResult:
    """A sampled trajectory with its output and solver diagnostics."""

    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray
    max_newton_iterations: int
    max_linear_residual: float


def _as_system(model) -> BilinearRoughSystem:
    if isinstance(model, ReducedModel):
        return model.system
    if isinstance(model, BilinearRoughSystem):
        return model
    raise ArgumentError(
        f"expected a BilinearRoughSystem or ReducedModel, got {type(model)!r}")


def rough_rk_simulate(
        model, path: DriverPath, tableau: Optional[ButcherTableau] = None,
        newton_tol: float = DEFAULT_NEWTON_TOL,
        newton_max: int = DEFAULT_NEWTON_MAX) -> SimulationResult:
    """Integrate the system along the path with the DIRK scheme.

    The path is augmented with time internally: each step consumes the pair
    (dt, dW_k). Stage systems are solved by LU for f = 0 and by Newton with
    the analytic Jacobian I - a_ii (G + dt (g(Z) I + Z grad_g(Z)^T))
    otherwise. Raises StepFailureError on a singular stage matrix or a
    non-convergent Newton iteration, naming the step.
    """
    sys = _as_system(model)
    if tableau is None:
        tableau = crouzeix_tableau()
    if path.d != sys.d:
        raise ArgumentError(
            f"path has {path.d} components but the system drives {sys.d}")
    n = sys.n
    M = path.M
    dt = (path.T - path.t0) / M
    dW = np.diff(path.values, axis=0)
    a, b, s_count = tableau.a, tableau.b, tableau.s
    nl = sys.drift_nonlinearity
    eye = np.eye(n)
    eps = np.finfo(float).eps

    states = np.empty((M + 1, n))
    states[0] = sys.x0
    max_newton = 0
    max_lin_res = 0.0

    for k in range(M):
        s_vec = sys.K_sqrt @ dW[k]
        G = sys.A * dt
        for m_i in range(sys.d):
            G = G + s_vec[m_i] * sys.N[m_i]
        z = states[k]
        lus = {}
        stage_F = []
        for i in range(s_count):
            c = z.copy()
            for j in range(i):
                c += a[i, j] * stage_F[j]
            if not np.all(np.isfinite(c)):
                raise IntegrationOverflowError(
                    f"state overflowed at step {k + 1} of {M}", step=k + 1)
            aii = a[i, i]
            if aii == 0.0:
                Zi = c
            else:
                if aii not in lus:
                    Mstage = eye - aii * G
                    lu = lu_factor(Mstage)
                    if np.abs(np.diag(lu[0])).min() <= \
                            eps * n * np.linalg.norm(Mstage, 1):
                        raise StepFailureError(
                            f"singular stage matrix at step {k} "
                            f"(diagonal a = {aii:.6g}); consider refining "
                            "the grid", step=k)
                    lus[aii] = lu
                Zi = lu_solve(lus[aii], c)
                if nl is None:
                    with np.errstate(over="ignore", invalid="ignore"):
                        res = np.linalg.norm(Zi - aii * (G @ Zi) - c)
                        res /= max(1.0, np.linalg.norm(c))
                    if np.isfinite(res):
                        max_lin_res = max(max_lin_res, res)
                else:
                    Zi, iters = _newton_stage(sys, G, dt, aii, c, Zi,
                                              newton_tol, newton_max, k)
                    max_newton = max(max_newton, iters)
            stage_F.append(G @ Zi + dt * drift_f(sys, Zi))
        z_next = z.copy()
        for i in range(s_count):
            z_next = z_next + b[i] * stage_F[i]
        if not np.all(np.isfinite(z_next)):
            raise IntegrationOverflowError(
                f"state overflowed at step {k + 1} of {M}", step=k + 1)
        states[k + 1] = z_next

    outputs = states @ sys.C.T
    return SimulationResult(times=path.times, states=states, outputs=outputs,
                            max_newton_iterations=max_newton,
                            max_linear_residual=max_lin_res)


def _newton_stage(sys, G, dt, aii, c, Z, newton_tol, newton_max, k):
    """Solve Z = c + aii (G Z + dt f(Z)) by Newton from the linear guess."""
    nl = sys.drift_nonlinearity
    eye = np.eye(len(c))
    for it in range(1, newton_max + 1):
        F = Z - aii * (G @ Z + dt * (Z * float(nl.g(Z)))) - c
        res = np.linalg.norm(F)
        if res <= newton_tol * max(1.0, np.linalg.norm(Z)):
            return Z, it - 1
        J = eye - aii * (G + dt * (float(nl.g(Z)) * eye
                                   + np.outer(Z, nl.grad_g(Z))))
        try:
            delta = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise StepFailureError(
                f"singular Newton Jacobian at step {k}", step=k,
                residual=res) from exc
        Z = Z + delta
    F = Z - aii * (G @ Z + dt * (Z * float(nl.g(Z)))) - c
    res = float(np.linalg.norm(F))
    if res <= newton_tol * max(1.0, np.linalg.norm(Z)):
        return Z, newton_max
    raise StepFailureError(
        f"Newton did not converge at step {k} (residual {res:.3e} after "
        f"{newton_max} iterations)", step=k, residual=res)


@dataclass(frozen=True)
class SmoothProbeResult:
    """Outcome of the quadratic-form comparison along a smooth driver.

    The Gronwall argument bounds the outer product x(t) x(t)^T by
    exp(int_0^t ||W_dot||^2) Z(t); ``min_eigenvalue`` is the smallest
    eigenvalue of that gap over the grid and should not fall below
    -tol * ``xbar_final_norm`` for a small discretization slack tol.
    """

    min_eigenvalue: float
    xbar_final_norm: float


def smooth_quadratic_form_probe(
        sys: BilinearRoughSystem, path: DriverPath, T: float,
        M: int) -> SmoothProbeResult:
    """Check x(t) x(t)^T <= exp(int ||W_dot||^2) Z(t) along a smooth driver.

    The driver must carry derivative data (smooth_analytic or
    piecewise_linear_interp kind): its per-interval slopes drive a classical
    RK4 for x on a fine grid of M total steps (a multiple of the path grid),
    Z comes from the Gramian ODE on the same grid, and the exponential factor
    uses the cumulative squared slope integral. Returns the minimum gap
    eigenvalue over the path nodes.
    """
    if path.kind not in (DriverKind.SMOOTH_ANALYTIC,
                         DriverKind.PIECEWISE_LINEAR_INTERP):
        raise ArgumentError(
            "the probe needs a smooth driver with derivative data "
            f"(smooth_analytic or piecewise_linear_interp), got kind "
            f"{path.kind.value!r}")
    if path.d != sys.d:
        raise ArgumentError(
            f"path has {path.d} components but the system drives {sys.d}")
    span = path.T - path.t0
    if abs(T - span) > 1e-12 * max(abs(T), 1.0):
        raise ArgumentError(
            f"probe horizon {T} does not match the path span {span}")
    if M < path.M or M % path.M != 0:
        raise ArgumentError(
            f"fine step count {M} must be a positive multiple of the path "
            f"grid M = {path.M}")
    sub = M // path.M
    dt = span / path.M
    hh = dt / sub
    slopes, _ = piecewise_linear_derivative(path)
    l2cum = np.concatenate(
        [[0.0], np.cumsum(np.sum(slopes ** 2, axis=1) * dt)])

    zres = integrate_gramian_ode(sys, "reach", T, M, return_trajectory=True)
    Ztraj = zres.trajectory

    def rhs(x, s_vec):
        v = sys.A @ x + drift_f(sys, x)
        for m_i in range(sys.d):
            v = v + s_vec[m_i] * (sys.N[m_i] @ x)
        return v

    x = sys.x0.copy()
    min_eig = math.inf
    for k in range(path.M):
        s_vec = sys.K_sqrt @ slopes[k]
        for _ in range(sub):
            k1 = rhs(x, s_vec)
            k2 = rhs(x + 0.5 * hh * k1, s_vec)
            k3 = rhs(x + 0.5 * hh * k2, s_vec)
            k4 = rhs(x + hh * k3, s_vec)
            x = x + (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise IntegrationOverflowError(
                f"smooth simulation overflowed in interval {k + 1}",
                step=k + 1)
        Xbar = math.exp(l2cum[k + 1]) * Ztraj[(k + 1) * sub]
        gap = Xbar - np.outer(x, x)
        min_eig = min(min_eig, float(np.linalg.eigvalsh(gap)[0]))
    xbar_final = math.exp(l2cum[-1]) * Ztraj[-1]
    return SmoothProbeResult(
        min_eigenvalue=min_eig,
        xbar_final_norm=float(np.linalg.norm(xbar_final, 2)))


def _as_output_series(y, times):
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2 or y.shape[0] != len(times):
        raise ArgumentError(
            f"output series of shape {y.shape} does not match {len(times)} "
            "time nodes")
    return y


def relative_L2_error(y_full, y_red, times) -> GuardedScalar:
    """||y - y_r|| / ||y|| in the time-L2 norm (composite trapezoid).

    Output components enter through the pointwise Euclidean norm. A zero
    reference trips the division guard: the absolute L2 error comes back
    with ``is_absolute`` set.
    """
    times = np.asarray(times, dtype=float)
    y_full = _as_output_series(y_full, times)
    y_red = _as_output_series(y_red, times)
    if y_full.shape != y_red.shape:
        raise ArgumentError(
            f"output series shapes differ: {y_full.shape} vs {y_red.shape}")
    diff_sq = np.sum((y_full - y_red) ** 2, axis=1)
    ref_sq = np.sum(y_full ** 2, axis=1)
    num = math.sqrt(max(float(np.trapezoid(diff_sq, times)), 0.0))
    den = math.sqrt(max(float(np.trapezoid(ref_sq, times)), 0.0))
    if den == 0.0:
        return GuardedScalar(num, is_absolute=True)
    return GuardedScalar(num / den, is_absolute=False)


@dataclass(frozen=True)
class PointwiseErrorSeries:
    """Per-node relative output error; absolute where the reference is 0."""

    times: np.ndarray
    values: np.ndarray
    absolute_flags: np.ndarray


def pointwise_relative_error(y_full, y_red, times) -> PointwiseErrorSeries:
    """|y(t_k) - y_r(t_k)| / |y(t_k)| per node (Euclidean over components).

    Nodes with zero reference norm report the absolute error and are flagged.
    """
    times = np.asarray(times, dtype=float)
    y_full = _as_output_series(y_full, times)
    y_red = _as_output_series(y_red, times)
    if y_full.shape != y_red.shape:
        raise ArgumentError(
            f"output series shapes differ: {y_full.shape} vs {y_red.shape}")
    num = np.linalg.norm(y_full - y_red, axis=1)
    den = np.linalg.norm(y_full, axis=1)
    flags = den == 0.0
    values = np.where(flags, num, num / np.where(flags, 1.0, den))
    return PointwiseErrorSeries(times=times, values=values,
                                absolute_flags=flags)


def write_trajectory_csv(result: SimulationResult, file) -> None:
    """Dump the output trajectory as ``t, y1, ..., yp`` rows."""
    p = result.outputs.shape[1]
    lines = ["t," + ",".join(f"y{j + 1}" for j in range(p))]
    for k in range(len(result.times)):
        lines.append(",".join([fmt(result.times[k])]
                              + [fmt(v) for v in result.outputs[k]]))
    atomic_write_text(file, "\n".join(lines) + "\n")


def write_states_csv(result: SimulationResult, file) -> None:
    """Dump the state trajectory as ``t, x1, ..., xn`` rows."""
    n = result.states.shape[1]
    lines = ["t," + ",".join(f"x{j + 1}" for j in range(n))]
    for k in range(len(result.times)):
        lines.append(",".join([fmt(result.times[k])]
                              + [fmt(v) for v in result.states[k]]))
    atomic_write_text(file, "\n".join(lines) + "\n")


def write_error_csv(times, values, file) -> None:
    """Dump an error series as ``t, rel_err`` rows."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    lines = ["t,rel_err"]
    for k in range(len(times)):
        lines.append(f"{fmt(times[k])},{fmt(values[k])}")
    atomic_write_text(file, "\n".join(lines) + "\n")
