"""Accelerated first-order optimization with velocity-level constraint cones.

Instead of projecting iterates onto the feasible set, the solvers here impose
each constraint on the iterate increment through a local polyhedral cone and
project the momentum onto that cone.  This keeps every inner problem convex,
sparse and low dimensional even for nonconvex feasible sets, and specializes
to closed-form O(n log n) updates for lp-ball constrained least squares.
"""

from .core import (
    ConstantStep,
    DiminishingStep,
    IterateState,
    Problem,
    ResolvedParams,
    SolverParams,
    VelocityCone,
    build_global_cone,
    build_local_cone,
    constraint_velocity,
    lagrangian_value,
    quadratic_problem,
    schedule_params,
    stationarity_residual,
)
from .polyproj import (
    DegenerateConeWarning,
    InfeasibleCone,
    MaxIterationsError,
    ProjectionResult,
    project,
    project_halfspace,
)
from .solvers import (
    StoppingRule,
    Trace,
    TraceRecord,
    accelerated_constant_params,
    agd_global_step,
    agd_local_step,
    cgd_step,
    effective_smoothness,
    run,
)
from .wsimplex import WeightedSimplexInstance, project_l1_ball, project_weighted_simplex

__version__ = "0.1.0"

__all__ = [
    "ConstantStep",
    "DegenerateConeWarning",
    "DiminishingStep",
    "InfeasibleCone",
    "IterateState",
    "MaxIterationsError",
    "Problem",
    "ProjectionResult",
    "ResolvedParams",
    "SolverParams",
    "StoppingRule",
    "Trace",
    "TraceRecord",
    "VelocityCone",
    "WeightedSimplexInstance",
    "accelerated_constant_params",
    "agd_global_step",
    "agd_local_step",
    "build_global_cone",
    "build_local_cone",
    "cgd_step",
    "constraint_velocity",
    "effective_smoothness",
    "lagrangian_value",
    "project",
    "project_halfspace",
    "project_l1_ball",
    "project_weighted_simplex",
    "quadratic_problem",
    "run",
    "schedule_params",
    "stationarity_residual",
]
