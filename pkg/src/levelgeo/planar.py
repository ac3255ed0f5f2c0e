"""The planar special case phi(gamma) = a . gamma, where everything is exact.

With a linear constraint the curve update can be made semi-implicit: taking
relaxation omega = 1,

    lambda_{k+1} = (lambda_k + tau_l * (a . gamma_k)) / (1 + eps * tau_l)
    (I - tau_g * D^2) gamma_{k+1} = gamma_k - tau_g * (2 lambda_{k+1} - lambda_k) a

with D^2 the three-point second-difference matrix under Dirichlet endpoint
data.  The continuous inverse of (1 - tau_g d^2/dt^2) on [0,1] with zero
boundary is the kernel

    G(t,s) = sqrt(tau_g)/sinh(1/sqrt(tau_g)) * sinh(min(t,s)/sqrt(tau_g))
                                             * sinh((1-max(t,s))/sqrt(tau_g)),

which serves as the analytic oracle for the discrete solver.

This scheme is an exact proximal primal-dual iteration for the discrete
Lagrangian, so the classical ergodic rate applies: whenever
tau_l * tau_g * |a|^2 < 1, the running averages over iterates 1..k satisfy

    L_eps(avg gamma_k, lam) - L_eps(gamma, avg lambda_k)
        <= ||xi_0 - xi||_A^2 / (2k)

for ANY comparison pair xi = (lambda, gamma), where the A-norm is the
dt-weighted block form  sum_i [dl_i^2/tau_l + 2 dl_i (a . dg_i) + |dg_i|^2/tau_g] * dt.
run_planar records the gap and this bound at dyadic iteration counts.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .curve import DiscreteCurve, MultiplierField, init_straight_line
from .schemes import SolverState, DivergenceError

__all__ = [
    "PlanarProblem",
    "ErgodicRecord",
    "thomas",
    "implicit_gamma_solve",
    "greens_function",
    "run_planar",
    "lagrangian_eps",
    "kinetic_energy",
    "write_ergodic_csv",
    "read_ergodic_csv",
    "ERGODIC_CSV_HEADER",
]

ERGODIC_CSV_HEADER = "k,gap,bound"


def thomas(lower, diag, upper, rhs):
    """Solve a tridiagonal system by forward elimination and back substitution.

    lower/upper have length n-1, diag length n; rhs is (n,) or (n, k).
    No pivoting: intended for the diagonally dominant systems arising here.
    """
    a = np.asarray(lower, dtype=float)
    b = np.asarray(diag, dtype=float)
    c = np.asarray(upper, dtype=float)
    d = np.asarray(rhs, dtype=float)
    n = len(b)
    if len(a) != n - 1 or len(c) != n - 1:
        raise ValueError("off-diagonals must have length n-1")
    if d.shape[0] != n:
        raise ValueError("rhs length does not match the diagonal")
    cp = np.empty(n - 1) if n > 1 else np.empty(0)
    dp = d.copy()
    bp = b.copy()
    for i in range(1, n):
        w = a[i - 1] / bp[i - 1]
        bp[i] = b[i] - w * c[i - 1]
        dp[i] = dp[i] - w * dp[i - 1]
    x = np.empty_like(dp)
    x[n - 1] = dp[n - 1] / bp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = (dp[i] - c[i] * x[i + 1]) / bp[i]
    return x


def implicit_gamma_solve(rhs, tau_gamma: float):
    """Solve (I - tau_gamma * D^2) x = rhs with Dirichlet data rhs[0], rhs[-1].

    rhs is (m+1,) or (m+1, k) grid data whose first and last entries are the
    boundary values of the solution.  The system is symmetric positive
    definite for tau_gamma > 0; solved exactly by the Thomas algorithm.
    """
    if not tau_gamma > 0:
        raise ValueError("tau_gamma must be positive")
    b = np.asarray(rhs, dtype=float)
    squeeze = b.ndim == 1
    if squeeze:
        b = b[:, None]
    m = len(b) - 1
    if m < 2:
        raise ValueError("need at least m = 2 intervals")
    c = tau_gamma * m * m
    interior = b[1:-1].copy()
    interior[0] += c * b[0]
    interior[-1] += c * b[-1]
    n = m - 1
    x = thomas(
        np.full(n - 1, -c),
        np.full(n, 1.0 + 2.0 * c),
        np.full(n - 1, -c),
        interior,
    )
    out = np.empty_like(b)
    out[0], out[-1] = b[0], b[-1]
    out[1:-1] = x
    return out[:, 0] if squeeze else out


def _logsinh(z: np.ndarray) -> np.ndarray:
    """log(sinh(z)) for z >= 0, overflow-free; -inf at z = 0."""
    out = np.full(np.shape(z), -np.inf)
    pos = z > 0
    zp = np.asarray(z)[pos]
    with np.errstate(divide="ignore"):
        out[pos] = zp + np.log1p(-np.exp(-2.0 * zp)) - math.log(2.0)
    return out


def greens_function(t, s, tau_gamma: float):
    """Analytic kernel of (1 - tau_gamma d^2)^{-1} on [0,1], zero boundary.

    Vectorized over broadcastable t, s in [0,1].  Evaluated in log space so
    tiny tau_gamma (huge sinh arguments) cannot overflow.
    """
    if not tau_gamma > 0:
        raise ValueError("tau_gamma must be positive")
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(t < 0) or np.any(t > 1) or np.any(s < 0) or np.any(s > 1):
        raise ValueError("t and s must lie in [0, 1]")
    root = math.sqrt(tau_gamma)
    lo = np.minimum(t, s)
    hi = np.maximum(t, s)
    log_g = (
        math.log(root)
        + _logsinh(lo / root)
        + _logsinh((1.0 - hi) / root)
        - _logsinh(np.asarray(1.0 / root))
    )
    g = np.exp(log_g)
    return float(g) if g.ndim == 0 else g


@dataclass
class PlanarProblem:
    """Endpoints in the plane a.x = 0 plus step sizes; checks the rate condition."""

    a: np.ndarray
    p: np.ndarray
    q: np.ndarray
    m: int = 100
    tau_gamma: float = 0.01
    tau_lambda: float = 0.7
    epsilon: float = 0.01

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        if self.a.shape != (3,) or not np.linalg.norm(self.a) > 0:
            raise ValueError("a must be a nonzero 3-vector")
        for name, pt in (("p", self.p), ("q", self.q)):
            if pt.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            if abs(float(self.a @ pt)) > 1e-12:
                raise ValueError(f"{name} must satisfy a.{name} = 0 (within 1e-12)")
        if self.m < 2:
            raise ValueError("m must be at least 2")
        if not (self.tau_gamma > 0 and self.tau_lambda > 0):
            raise ValueError("step sizes must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        # Rate condition tau_l tau_g |a|^2 < 1 <=> the 4x4 block matrix
        # [[1/tau_l, a^T], [a, I/tau_g]] is positive definite; check both.
        block = np.zeros((4, 4))
        block[0, 0] = 1.0 / self.tau_lambda
        block[0, 1:] = self.a
        block[1:, 0] = self.a
        block[1:, 1:] = np.eye(3) / self.tau_gamma
        self.a_matrix_min_eig = float(np.linalg.eigvalsh(block).min())
        if self.step_condition_ok:
            assert self.a_matrix_min_eig > 0, (
                "step product < 1 must imply a positive definite A-norm"
            )

    @property
    def step_product(self) -> float:
        return self.tau_lambda * self.tau_gamma * float(self.a @ self.a)

    @property
    def step_condition_ok(self) -> bool:
        return self.step_product < 1.0


@dataclass
class ErgodicRecord:
    k: int
    gap: float
    bound: float


def kinetic_energy(curve: DiscreteCurve) -> float:
    """(1/2) sum |gamma_{i+1} - gamma_i|^2 / dt."""
    diffs = np.diff(curve.points, axis=0)
    return 0.5 * float(np.einsum("ij,ij->", diffs, diffs)) * curve.m


def lagrangian_eps(curve: DiscreteCurve, multiplier: MultiplierField, surface,
                   epsilon: float) -> float:
    """Discrete L_eps = kinetic + dt sum lam*phi(gamma) - (eps/2) dt sum lam^2."""
    lam = multiplier.values
    phi = surface.value(curve.interior)
    dt = curve.dt
    return (
        kinetic_energy(curve)
        + dt * float(np.dot(lam, phi))
        - 0.5 * epsilon * dt * float(np.dot(lam, lam))
    )


def _a_norm_sq(problem: PlanarProblem, d_lam: np.ndarray, d_gam: np.ndarray) -> float:
    """dt-weighted ||(d_lam, d_gam)||_A^2 over the interior nodes."""
    a = problem.a
    dt = 1.0 / problem.m
    cross = d_gam @ a
    return dt * float(
        np.dot(d_lam, d_lam) / problem.tau_lambda
        + 2.0 * np.dot(d_lam, cross)
        + np.einsum("ij,ij->", d_gam, d_gam) / problem.tau_gamma
    )


class _PlaneField:
    """Minimal phi(x) = a.x used for Lagrangian evaluation inside this module."""

    def __init__(self, a):
        self.a = np.asarray(a, dtype=float)

    def value(self, x):
        return np.asarray(x, dtype=float) @ self.a


def run_planar(problem: PlanarProblem, max_iters: int, init=None, comparison=None):
    """Iterate the semi-implicit planar scheme, recording the ergodic gap.

    init : optional (DiscreteCurve, MultiplierField); defaults to the saddle
        itself (straight segment, zero multiplier).
    comparison : optional (DiscreteCurve, MultiplierField) pair the gap is
        measured against; defaults to the saddle, which is exact here because
        a.p = a.q = 0 makes the straight segment feasible with lambda = 0.

    Returns (final SolverState, list of ErgodicRecord at k = 1, 2, 4, ...).
    A violated step condition only warns; iteration proceeds and divergence,
    if it happens, raises DivergenceError with the records gathered so far.
    """
    if max_iters < 0:
        raise ValueError("max_iters must be nonnegative")
    if not problem.step_condition_ok:
        warnings.warn(
            f"step product tau_l*tau_g*|a|^2 = {problem.step_product:.3g} >= 1; "
            "the ergodic bound does not apply",
            stacklevel=2,
        )

    if init is None:
        curve, mult = init_straight_line(problem.p, problem.q, problem.m)
    else:
        curve, mult = init[0].copy(), init[1].copy()
    if curve.m != problem.m or mult.m != problem.m:
        raise ValueError("init resolution does not match problem.m")

    if comparison is None:
        comparison = init_straight_line(problem.p, problem.q, problem.m)
    ref_curve, ref_mult = comparison
    field = _PlaneField(problem.a)

    bound_base = _a_norm_sq(
        problem,
        mult.values - ref_mult.values,
        curve.interior - ref_curve.interior,
    )

    a = problem.a
    shrink = 1.0 / (1.0 + problem.epsilon * problem.tau_lambda)
    pts = curve.points.copy()
    lam = mult.values.copy()
    gamma_sum = np.zeros_like(pts[1:-1])
    lam_sum = np.zeros_like(lam)
    records: list[ErgodicRecord] = []
    next_record = 1

    for k in range(1, max_iters + 1):
        lam_new = (lam + problem.tau_lambda * (pts[1:-1] @ a)) * shrink
        rhs = pts.copy()
        rhs[1:-1] -= problem.tau_gamma * np.outer(2.0 * lam_new - lam, a)
        pts = implicit_gamma_solve(rhs, problem.tau_gamma)
        lam = lam_new
        gamma_sum += pts[1:-1]
        lam_sum += lam

        if not (np.isfinite(pts).all() and np.isfinite(lam).all()):
            raise DivergenceError(k, "non-finite planar iterate", trace=records)

        if k == next_record or k == max_iters:
            avg_pts = pts.copy()
            avg_pts[1:-1] = gamma_sum / k
            avg_curve = DiscreteCurve(avg_pts)
            avg_mult = MultiplierField(lam_sum / k, problem.m)
            gap = lagrangian_eps(
                avg_curve, ref_mult, field, problem.epsilon
            ) - lagrangian_eps(ref_curve, avg_mult, field, problem.epsilon)
            records.append(ErgodicRecord(k=k, gap=gap, bound=bound_base / (2.0 * k)))
            while next_record <= k:
                next_record *= 2

    final = SolverState(
        curve=DiscreteCurve(pts),
        multiplier=MultiplierField(lam, problem.m),
        iteration=max_iters,
    )
    return final, records


def write_ergodic_csv(records, path):
    with open(path, "w", newline="") as fh:
        fh.write(ERGODIC_CSV_HEADER + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        for r in records:
            writer.writerow([r.k, repr(float(r.gap)), repr(float(r.bound))])


def read_ergodic_csv(path):
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if ",".join(header) != ERGODIC_CSV_HEADER:
            raise ValueError(f"unexpected ergodic header: {header}")
        for k, gap, bound in reader:
            records.append(ErgodicRecord(k=int(k), gap=float(gap), bound=float(bound)))
    return records
