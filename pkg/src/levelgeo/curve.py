"""Discrete curves gamma: [0,1] -> R^3 on a uniform grid, and their multipliers.

The grid is t_i = i/m for i = 0..m.  Endpoints points[0] = p and points[m] = q
are pinned: no operation in this package ever rewrites them.  The Lagrange
multiplier lambda lives at the m-1 interior nodes only, because phi(p) =
phi(q) = 0 by problem setup.
"""

from __future__ import annotations

import json

import numpy as np

__all__ = [
    "DiscreteCurve",
    "MultiplierField",
    "init_straight_line",
    "init_randomized",
    "second_difference",
    "curve_length",
    "speed_profile",
    "curve_to_json",
    "curve_from_json",
]


class DiscreteCurve:
    """m+1 points in R^3 with pinned endpoints; Delta t = 1/m."""

    __slots__ = ("points",)

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"curve points must be (m+1, 3), got {pts.shape}")
        if len(pts) < 3:
            raise ValueError("curve needs m >= 2 (at least 3 points)")
        self.points = pts

    @property
    def m(self) -> int:
        return len(self.points) - 1

    @property
    def dt(self) -> float:
        return 1.0 / self.m

    @property
    def p(self):
        return self.points[0]

    @property
    def q(self):
        return self.points[-1]

    @property
    def interior(self):
        return self.points[1:-1]

    def copy(self) -> "DiscreteCurve":
        return DiscreteCurve(self.points.copy())


class MultiplierField:
    """Scalar multiplier values at the m-1 interior grid nodes."""

    __slots__ = ("values", "m")

    def __init__(self, values, m: int | None = None):
        vals = np.asarray(values, dtype=float)
        if vals.ndim != 1:
            raise ValueError("multiplier values must be a 1-d array")
        self.values = vals
        self.m = len(vals) + 1 if m is None else int(m)
        if self.m - 1 != len(vals):
            raise ValueError(f"multiplier length {len(vals)} does not match m={self.m}")

    @classmethod
    def zeros(cls, m: int) -> "MultiplierField":
        return cls(np.zeros(m - 1), m)

    def copy(self) -> "MultiplierField":
        return MultiplierField(self.values.copy(), self.m)


def _grid(m: int):
    return np.arange(m + 1) / m


def init_straight_line(p, q, m: int):
    """gamma_0(t) = p(1-t) + q t with a zero multiplier."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if m < 2:
        raise ValueError("grid resolution m must be at least 2")
    t = _grid(m)[:, None]
    pts = p * (1.0 - t) + q * t
    pts[0], pts[-1] = p, q  # exact endpoints, no roundoff from the blend
    return DiscreteCurve(pts), MultiplierField.zeros(m)


def init_randomized(p, q, m: int, surface, tau_r: float = 4.0, seed: int = 0):
    """gamma_0(t) = p(1-t) + tau_r * r * (1-t) t + q t, r random on the surface.

    The bump term vanishes at the endpoints, so they stay exact.  Deterministic
    for a fixed seed.
    """
    if tau_r < 0:
        raise ValueError("tau_r must be nonnegative")
    curve, mult = init_straight_line(p, q, m)
    r = surface.surface_point(np.random.default_rng(seed))
    t = _grid(m)[:, None]
    curve.points[1:-1] += tau_r * np.asarray(r) * ((1.0 - t) * t)[1:-1]
    return curve, mult


def second_difference(curve: DiscreteCurve, i: int | None = None):
    """Central second difference (gamma_{i+1} - 2 gamma_i + gamma_{i-1}) / dt^2.

    With i given, returns the (3,) vector at interior node i (1 <= i <= m-1);
    without i, returns all interior values as an (m-1, 3) array.
    """
    pts = curve.points
    if i is not None:
        if not 1 <= i <= curve.m - 1:
            raise IndexError(f"i must be an interior index in [1, {curve.m - 1}]")
        return (pts[i + 1] - 2.0 * pts[i] + pts[i - 1]) * curve.m**2
    return (pts[2:] - 2.0 * pts[1:-1] + pts[:-2]) * curve.m**2


def curve_length(curve: DiscreteCurve) -> float:
    """Piecewise-linear length: sum of chord lengths."""
    return float(np.linalg.norm(np.diff(curve.points, axis=0), axis=1).sum())


def speed_profile(curve: DiscreteCurve):
    """Forward-difference speeds |gamma_{i+1} - gamma_i| / dt, length m."""
    return np.linalg.norm(np.diff(curve.points, axis=0), axis=1) * curve.m


def curve_to_json(curve: DiscreteCurve) -> str:
    """Serialize as {"m": int, "points": [[x, y, z], ...]}; exact round-trip."""
    return json.dumps({"m": curve.m, "points": curve.points.tolist()})


def curve_from_json(text: str) -> DiscreteCurve:
    data = json.loads(text)
    pts = np.asarray(data["points"], dtype=float)
    if len(pts) != data["m"] + 1:
        raise ValueError(
            f"curve JSON claims m={data['m']} but has {len(pts)} points"
        )
    return DiscreteCurve(pts)
