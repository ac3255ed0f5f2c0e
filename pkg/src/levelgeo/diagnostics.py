"""Error metrics, optimality residuals, and the Lyapunov functional.

Everything here is a pure function of a solver state; nothing mutates.

The equilibrium residuals discretize the stationary conditions of the
primal-dual flow:

    R_lambda(t_i) = -eps * lambda_i + phi(gamma_i)
    R_gamma(t_i)  = gamma''_i - ((1 - alpha*eps) * lambda_i
                                 + alpha * phi(gamma_i)) * grad phi(gamma_i)

with alpha reconstructed from the config: cfg.alpha for Var2, and
(1 + omega) * tau_gamma otherwise (tau_gamma stands in for
tau_lambda / (1 + eps*tau_lambda); when the two differ the solver logs the
mismatch once and diagnostics proceed with tau_gamma).

The Lyapunov functional of the convergence theory is

    J = dt * sum R_lambda^2 + mu * dt * sum |R_gamma|^2,   mu = 1/(1 - alpha*eps),

defined only in the regime alpha*eps < 1.

Surface error |sum_i lambda_i phi(gamma_i)| is kept unweighted (no dt) to
match its usual inner-product form; the Lyapunov terms are dt-weighted
because they discretize integrals.  Signed cancellation inside surface error
is possible and intentional.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .curve import DiscreteCurve, curve_length, second_difference

__all__ = [
    "TraceRow",
    "IterationTrace",
    "absolute_error",
    "surface_error",
    "surface_error_values",
    "effective_alpha",
    "equilibrium_residuals",
    "lyapunov",
    "geodesic_defect",
    "tangency_defect",
    "first_difference",
    "trace_row",
    "write_trace_csv",
    "read_trace_csv",
    "TRACE_CSV_HEADER",
]

TRACE_CSV_HEADER = (
    "iteration,length,absolute_error,relative_error,surface_error,"
    "lyapunov_J,lambda_residual,gamma_residual,geodesic_defect"
)


@dataclass
class TraceRow:
    iteration: int
    length: float
    absolute_error: float | None
    relative_error: float | None
    surface_error: float
    lyapunov_J: float
    lambda_residual: float
    gamma_residual: float
    geodesic_defect: float
    # raw max |gamma'' . gamma'| without the (1 + |gamma'|^2) normalization;
    # kept in memory, not part of the CSV schema
    geodesic_defect_raw: float = math.nan


class IterationTrace:
    """Diagnostics rows ordered by strictly increasing iteration."""

    def __init__(self, rows=None):
        self.rows: list[TraceRow] = []
        for row in rows or []:
            self.append(row)

    def append(self, row: TraceRow):
        if self.rows and row.iteration <= self.rows[-1].iteration:
            raise ValueError(
                f"trace iterations must increase: {row.iteration} after "
                f"{self.rows[-1].iteration}"
            )
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @property
    def final(self) -> TraceRow:
        return self.rows[-1]

    def column(self, name: str) -> np.ndarray:
        """Column as a float array; missing optionals become nan."""
        vals = [getattr(r, name) for r in self.rows]
        return np.array(
            [math.nan if v is None else float(v) for v in vals], dtype=float
        )


def absolute_error(curve: DiscreteCurve, d: float) -> float:
    """| length(curve) - d | against a reference distance d > 0."""
    if not d > 0:
        raise ValueError("reference distance must be positive")
    return abs(curve_length(curve) - d)


def surface_error_values(lam: np.ndarray, phi: np.ndarray) -> float:
    """|sum_i lambda_i phi_i| from raw arrays (no dt weighting)."""
    return float(abs(np.dot(lam, phi)))


def surface_error(state, surface) -> float:
    """|sum_i lambda_i phi(gamma_i)| over the interior nodes."""
    phi = surface.value(state.curve.interior)
    return surface_error_values(state.multiplier.values, phi)


def effective_alpha(cfg) -> float:
    """Relaxation alpha implied by a config: cfg.alpha for Var2, else (1+omega)*tau_gamma."""
    name = getattr(cfg.scheme, "value", cfg.scheme)
    if name == "var2":
        return cfg.alpha
    if name == "gda":
        return cfg.tau_gamma
    omega = 0.0 if name == "regularized" else cfg.omega
    return (1.0 + omega) * cfg.tau_gamma


def _residual_fields(state, cfg, surface):
    interior = state.curve.interior
    lam = state.multiplier.values
    phi = surface.value(interior)
    grad = surface.grad(interior)
    alpha = effective_alpha(cfg)
    eps = cfg.epsilon
    r_lambda = -eps * lam + phi
    coeff = (1.0 - alpha * eps) * lam + alpha * phi
    r_gamma = second_difference(state.curve) - coeff[:, None] * grad
    return r_lambda, r_gamma, alpha


def equilibrium_residuals(state, cfg, surface) -> tuple[float, float]:
    """Discrete L2 norms (sqrt(dt * sum .^2)) of the two stationarity residuals."""
    r_lambda, r_gamma, _ = _residual_fields(state, cfg, surface)
    dt = state.curve.dt
    norm_l = math.sqrt(dt * float(np.dot(r_lambda, r_lambda)))
    norm_g = math.sqrt(dt * float(np.einsum("ij,ij->", r_gamma, r_gamma)))
    return norm_l, norm_g


def lyapunov(state, cfg, surface) -> float:
    """J = dt sum R_lambda^2 + mu dt sum |R_gamma|^2 with mu = 1/(1 - alpha*eps).

    Raises ValueError outside the regime alpha*eps < 1 where mu is undefined
    or negative.
    """
    r_lambda, r_gamma, alpha = _residual_fields(state, cfg, surface)
    ae = alpha * cfg.epsilon
    if ae >= 1.0:
        raise ValueError(f"Lyapunov functional needs alpha*eps < 1, got {ae:g}")
    mu = 1.0 / (1.0 - ae)
    dt = state.curve.dt
    return dt * float(np.dot(r_lambda, r_lambda)) + mu * dt * float(
        np.einsum("ij,ij->", r_gamma, r_gamma)
    )


def first_difference(curve: DiscreteCurve) -> np.ndarray:
    """Velocity estimates at all m+1 nodes: central interior, one-sided at the ends."""
    pts = curve.points
    m = curve.m
    vel = np.empty_like(pts)
    vel[1:-1] = (pts[2:] - pts[:-2]) * (m / 2.0)
    vel[0] = (pts[1] - pts[0]) * m
    vel[-1] = (pts[-1] - pts[-2]) * m
    return vel


def geodesic_defect(curve: DiscreteCurve, normalized: bool = True) -> float:
    """max_i |gamma''_i . gamma'_i|, over interior nodes.

    Geodesics run at constant speed, so this inner product vanishes along
    them.  The normalized form divides by (1 + |gamma'_i|^2) to stay finite
    on degenerate curves.
    """
    sd = second_difference(curve)
    vel = first_difference(curve)[1:-1]
    dots = np.abs(np.einsum("ij,ij->i", sd, vel))
    if normalized:
        dots = dots / (1.0 + np.einsum("ij,ij->i", vel, vel))
    return float(dots.max())


def tangency_defect(state, surface) -> float:
    """max_i |gamma'_i . grad phi(gamma_i)| / |gamma'_i|: 0 when the velocity is tangent."""
    vel = first_difference(state.curve)[1:-1]
    grad = surface.grad(state.curve.interior)
    speed = np.linalg.norm(vel, axis=1)
    dots = np.abs(np.einsum("ij,ij->i", vel, grad))
    mask = speed > 0
    if not mask.any():
        return 0.0
    return float((dots[mask] / speed[mask]).max())


def trace_row(state, cfg, surface, reference_distance: float | None = None) -> TraceRow:
    """Assemble one diagnostics row for the current state."""
    length = curve_length(state.curve)
    if reference_distance is not None:
        abs_err = abs(length - reference_distance)
        rel_err = abs_err / reference_distance
    else:
        abs_err = rel_err = None
    norm_l, norm_g = equilibrium_residuals(state, cfg, surface)
    try:
        J = lyapunov(state, cfg, surface)
    except ValueError:
        J = math.nan
    return TraceRow(
        iteration=state.iteration,
        length=length,
        absolute_error=abs_err,
        relative_error=rel_err,
        surface_error=surface_error(state, surface),
        lyapunov_J=J,
        lambda_residual=norm_l,
        gamma_residual=norm_g,
        geodesic_defect=geodesic_defect(state.curve),
        geodesic_defect_raw=geodesic_defect(state.curve, normalized=False),
    )


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def write_trace_csv(trace: IterationTrace, path):
    """Write the pinned CSV schema; optional columns serialize as empty fields."""
    with open(path, "w", newline="") as fh:
        fh.write(TRACE_CSV_HEADER + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        for r in trace:
            writer.writerow(
                [
                    r.iteration,
                    _fmt(r.length),
                    _fmt(r.absolute_error),
                    _fmt(r.relative_error),
                    _fmt(r.surface_error),
                    _fmt(r.lyapunov_J),
                    _fmt(r.lambda_residual),
                    _fmt(r.gamma_residual),
                    _fmt(r.geodesic_defect),
                ]
            )


def read_trace_csv(path) -> IterationTrace:
    trace = IterationTrace()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if ",".join(header) != TRACE_CSV_HEADER:
            raise ValueError(f"unexpected trace header: {header}")
        for fields in reader:
            it, length, a, r, s, j, rl, rg, gd = fields
            trace.append(
                TraceRow(
                    iteration=int(it),
                    length=float(length),
                    absolute_error=float(a) if a else None,
                    relative_error=float(r) if r else None,
                    surface_error=float(s),
                    lyapunov_J=float(j),
                    lambda_residual=float(rl),
                    gamma_residual=float(rg),
                    geodesic_defect=float(gd),
                )
            )
    return trace
