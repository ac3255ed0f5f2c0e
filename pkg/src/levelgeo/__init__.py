"""Geodesics on implicit surfaces by regularized primal-dual relaxation.

The solver looks for a curve gamma between two fixed points on a level set
{phi = 0} that minimizes the kinetic energy 0.5 * integral |gamma'|^2 while
a multiplier field lambda enforces phi(gamma) = 0.  A small quadratic
penalty on lambda (weight epsilon) regularizes the saddle problem, and an
extrapolation step (omega) accelerates the multiplier ascent.

Layout:

* :mod:`levelgeo.levelset`    surface catalogue and band sampling checks
* :mod:`levelgeo.curve`       discrete curves, inits, stencils
* :mod:`levelgeo.schemes`     the five iteration rules and the run loop
* :mod:`levelgeo.diagnostics` residuals, errors, Lyapunov value, trace CSV
* :mod:`levelgeo.planar`      plane-constraint model problem and its
  ergodic convergence-rate check
* :mod:`levelgeo.harness`     experiment orchestration and artifact files
* :mod:`levelgeo.cli`         the ``levelgeo`` command
"""

from .curve import (
    DiscreteCurve,
    MultiplierField,
    curve_from_json,
    curve_length,
    curve_to_json,
    init_randomized,
    init_straight_line,
    second_difference,
    speed_profile,
)
from .diagnostics import (
    IterationTrace,
    TraceRow,
    absolute_error,
    equilibrium_residuals,
    geodesic_defect,
    lyapunov,
    read_trace_csv,
    surface_error,
    tangency_defect,
    trace_row,
    write_trace_csv,
)
from .harness import ConfigError, ExperimentSpec
from .levelset import (
    AssumptionAReport,
    LevelSet,
    Plane,
    PointCloud,
    PointCloudFormatError,
    SamplingError,
    SingularityError,
    SphereQuadratic,
    SphereSDF,
    Torus,
    check_assumption_a,
    load_point_cloud,
)
from .planar import (
    ErgodicRecord,
    PlanarProblem,
    greens_function,
    implicit_gamma_solve,
    lagrangian_eps,
    read_ergodic_csv,
    run_planar,
    thomas,
    write_ergodic_csv,
)
from .schemes import (
    DivergenceError,
    Scheme,
    SolverConfig,
    SolverState,
    run,
    step,
    step_base,
    step_gda,
    step_var1,
    step_var2,
)

__version__ = "0.1.0"

__all__ = [
    "DiscreteCurve",
    "MultiplierField",
    "curve_from_json",
    "curve_length",
    "curve_to_json",
    "init_randomized",
    "init_straight_line",
    "second_difference",
    "speed_profile",
    "IterationTrace",
    "TraceRow",
    "absolute_error",
    "equilibrium_residuals",
    "geodesic_defect",
    "lyapunov",
    "read_trace_csv",
    "surface_error",
    "tangency_defect",
    "trace_row",
    "write_trace_csv",
    "ConfigError",
    "ExperimentSpec",
    "AssumptionAReport",
    "LevelSet",
    "Plane",
    "PointCloud",
    "PointCloudFormatError",
    "SamplingError",
    "SingularityError",
    "SphereQuadratic",
    "SphereSDF",
    "Torus",
    "check_assumption_a",
    "load_point_cloud",
    "ErgodicRecord",
    "PlanarProblem",
    "greens_function",
    "implicit_gamma_solve",
    "lagrangian_eps",
    "read_ergodic_csv",
    "run_planar",
    "thomas",
    "write_ergodic_csv",
    "DivergenceError",
    "Scheme",
    "SolverConfig",
    "SolverState",
    "run",
    "step",
    "step_base",
    "step_gda",
    "step_var1",
    "step_var2",
    "__version__",
]
