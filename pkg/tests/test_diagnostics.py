"""Error measures, residuals, the Lyapunov functional and trace serialization."""

import math

import numpy as np
import pytest

from levelgeo.curve import DiscreteCurve, MultiplierField, init_straight_line
from levelgeo.diagnostics import (
    TRACE_CSV_HEADER,
    IterationTrace,
    absolute_error,
    effective_alpha,
    equilibrium_residuals,
    geodesic_defect,
    lyapunov,
    read_trace_csv,
    surface_error,
    surface_error_values,
    tangency_defect,
    trace_row,
    write_trace_csv,
)
from levelgeo.levelset import Plane, SphereQuadratic
from levelgeo.schemes import SolverConfig, SolverState, run


def planar_saddle(m=10):
    surface = Plane(normal=(0.0, 0.0, 1.0))
    p = np.array([1.0, 0.0, 0.0])
    q = np.array([0.0, 1.0, 0.0])
    curve, mult = init_straight_line(p, q, m)
    return surface, SolverState(curve=curve, multiplier=mult)


def test_surface_error_is_signed_sum_not_sum_of_magnitudes():
    lam = np.array([1.0, 2.0])
    phi = np.array([0.5, -0.25])
    assert surface_error_values(lam, phi) == 0.0
    assert surface_error_values(lam, -phi) == 0.0
    assert surface_error_values(np.array([1.0, 1.0]), phi) == 0.25


def test_absolute_error_validates_reference():
    curve, _ = init_straight_line(np.zeros(3), np.array([2.0, 0.0, 0.0]), 10)
    assert absolute_error(curve, 2.0) == 0.0
    assert abs(absolute_error(curve, 1.5) - 0.5) < 1e-15
    with pytest.raises(ValueError):
        absolute_error(curve, 0.0)


def test_effective_alpha_per_scheme():
    assert effective_alpha(SolverConfig(scheme="var2", alpha=42.0)) == 42.0
    assert effective_alpha(SolverConfig(scheme="gda", tau_gamma=1e-3)) == 1e-3
    assert effective_alpha(
        SolverConfig(scheme="base-pdhg", omega=3.0, tau_gamma=1e-3)
    ) == pytest.approx(4e-3)
    # the regularized scheme drops omega no matter what the config says
    assert effective_alpha(
        SolverConfig(scheme="regularized", omega=99.0, tau_gamma=1e-3)
    ) == pytest.approx(1e-3)


def test_residuals_vanish_at_planar_saddle():
    surface, state = planar_saddle()
    cfg = SolverConfig()
    norm_l, norm_g = equilibrium_residuals(state, cfg, surface)
    assert norm_l == 0.0
    # the affine blend leaves ~1e-13 of stencil noise in gamma''
    assert norm_g < 1e-9
    assert lyapunov(state, cfg, surface) < 1e-18


def test_lambda_perturbation_scales_with_epsilon():
    # at the saddle phi = 0, so R_lambda = -eps * delta and the dt-weighted
    # norm is eps * sqrt(dt) * |delta|_2
    surface, state = planar_saddle(m=10)
    delta = np.linspace(-1.0, 1.0, 9)
    state = SolverState(curve=state.curve, multiplier=MultiplierField(delta.copy()))
    for eps in (0.01, 0.5):
        cfg = SolverConfig(epsilon=eps)
        norm_l, norm_g = equilibrium_residuals(state, cfg, surface)
        expected = eps * math.sqrt(0.1) * np.linalg.norm(delta)
        assert norm_l == pytest.approx(expected, rel=1e-12)
        # R_gamma picks up the multiplier force against the plane normal
        assert norm_g > 0.0


def test_lyapunov_combines_residuals_with_mu_weight():
    surface = SphereQuadratic()
    p = np.array([0.0, 0.0, 1.0])
    q = np.array([1.0, 0.0, 0.0])
    curve, mult = init_straight_line(p, q, 20)
    state = SolverState(curve=curve, multiplier=mult)
    cfg = SolverConfig(scheme="var2", alpha=75.0, epsilon=0.01)  # alpha*eps = 0.75
    norm_l, norm_g = equilibrium_residuals(state, cfg, surface)
    mu = 1.0 / (1.0 - 0.75)
    expected = norm_l**2 + mu * norm_g**2
    assert lyapunov(state, cfg, surface) == pytest.approx(expected, rel=1e-12)


def test_lyapunov_outside_regime_raises():
    surface, state = planar_saddle()
    cfg = SolverConfig(scheme="var2", alpha=200.0, epsilon=0.01)  # alpha*eps = 2
    with pytest.raises(ValueError):
        lyapunov(state, cfg, surface)
    # trace_row degrades the same situation to nan instead of raising
    row = trace_row(state, cfg, surface)
    assert math.isnan(row.lyapunov_J)


def test_geodesic_defect_zero_on_affine_curves():
    curve, _ = init_straight_line(np.zeros(3), np.array([1.0, 2.0, 3.0]), 30)
    assert geodesic_defect(curve) < 1e-10
    assert geodesic_defect(curve, normalized=False) < 1e-10


def test_geodesic_defect_on_quadratic_curve():
    # gamma(t) = (t^2, 0, 0): gamma'' = 2, gamma' = 2t; the stencil and the
    # central difference are exact, so the raw defect is max 4t over the
    # interior nodes.
    m = 10
    t = np.arange(m + 1) / m
    pts = np.zeros((m + 1, 3))
    pts[:, 0] = t**2
    curve = DiscreteCurve(pts)
    t_int = t[1:-1]
    raw_expected = np.max(2.0 * 2.0 * t_int)
    norm_expected = np.max(4.0 * t_int / (1.0 + 4.0 * t_int**2))
    assert geodesic_defect(curve, normalized=False) == pytest.approx(raw_expected, rel=1e-12)
    assert geodesic_defect(curve) == pytest.approx(norm_expected, rel=1e-12)


def test_geodesic_defect_rotation_invariant():
    rng = np.random.default_rng(14)
    pts = rng.normal(size=(25, 3))
    base = DiscreteCurve(pts)
    rot, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    rotated = DiscreteCurve(pts @ rot.T)
    assert geodesic_defect(rotated) == pytest.approx(geodesic_defect(base), rel=1e-9)
    assert geodesic_defect(rotated, normalized=False) == pytest.approx(
        geodesic_defect(base, normalized=False), rel=1e-9
    )


def test_tangency_defect_zero_for_tangent_motion():
    # uniform arc on the unit circle: central differences are exactly
    # orthogonal to the radius, which is parallel to grad phi
    surface = SphereQuadratic()
    m = 24
    t = np.arange(m + 1) / m
    theta = 0.5 * np.pi * t
    pts = np.stack([np.cos(theta), np.sin(theta), np.zeros_like(theta)], axis=1)
    state = SolverState(DiscreteCurve(pts), MultiplierField.zeros(m))
    assert tangency_defect(state, surface) < 1e-12

    # radial segment: velocity parallel to grad phi, defect = |gamma| on nodes
    seg = np.zeros((m + 1, 3))
    seg[:, 0] = 1.0 + t
    state = SolverState(DiscreteCurve(seg), MultiplierField.zeros(m))
    assert tangency_defect(state, surface) == pytest.approx(2.0 - 1.0 / m)


def test_surface_error_of_state():
    surface = SphereQuadratic()
    curve, _ = init_straight_line(
        np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, -1.0]), 4
    )
    lam = MultiplierField(np.array([1.0, 1.0, 1.0]))
    state = SolverState(curve, lam)
    phi = surface.value(curve.interior)
    assert surface_error(state, surface) == pytest.approx(abs(phi.sum()))


def test_trace_csv_round_trip(tmp_path):
    surface = SphereQuadratic()
    p = np.array([0.0, 0.0, 1.0])
    q = np.array([1.0, 0.0, 0.0])
    init = init_straight_line(p, q, 20)
    _, trace = run(
        SolverConfig(max_iters=40, record_every=10), surface, init,
        reference_distance=np.pi / 2,
    )
    path = tmp_path / "trace.csv"
    write_trace_csv(trace, path)
    header = path.read_text().splitlines()[0]
    assert header == TRACE_CSV_HEADER

    back = read_trace_csv(path)
    assert len(back) == len(trace)
    for a, b in zip(trace, back):
        assert a.iteration == b.iteration
        assert a.length == b.length  # repr round-trips floats exactly
        assert a.absolute_error == b.absolute_error
        assert a.surface_error == b.surface_error


def test_trace_csv_blank_optionals(tmp_path):
    surface = SphereQuadratic()
    init = init_straight_line(np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]), 10)
    _, trace = run(SolverConfig(max_iters=10, record_every=5), surface, init)
    path = tmp_path / "trace.csv"
    write_trace_csv(trace, path)
    body = path.read_text().splitlines()[1]
    # no reference distance: absolute and relative error columns stay empty
    assert ",,," in body
    back = read_trace_csv(path)
    assert back.rows[0].absolute_error is None
    assert back.rows[0].relative_error is None


def test_trace_column_and_final():
    surface = SphereQuadratic()
    init = init_straight_line(np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]), 10)
    _, trace = run(SolverConfig(max_iters=20, record_every=10), surface, init)
    iters = trace.column("iteration")
    assert list(iters) == [0, 10, 20]
    assert trace.final.iteration == 20
    # absolute_error missing -> nan column
    assert np.isnan(trace.column("absolute_error")).all()
    with pytest.raises(IndexError):
        IterationTrace().final


def test_read_trace_csv_rejects_foreign_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("iteration,length\n0,1.0\n")
    with pytest.raises(ValueError):
        read_trace_csv(path)
