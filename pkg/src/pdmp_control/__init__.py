"""Optimal control of piecewise deterministic Markov processes.

The package solves the discounted control problem three independent ways
and checks that they agree:

  hjb       dynamic programming on a grid (exponential time discretization)
  bsde      penalized switching systems on the action-randomized pair
            process, by grid fixed point or by Monte Carlo regression
  girsanov  dual bounds from intensity controls via change of measure

simulate provides exact samplers for every process involved; model holds
the problem description and its sanity checks.
"""

from .model import (
    ACTION_JUMP,
    STATE_JUMP,
    ActionMeasure,
    ActionSet,
    Bounds,
    Box,
    Grid,
    GridValueFunction,
    HypothesisReport,
    IntensityControl,
    LocalCharacteristics,
    MarkedPointPath,
    PiecewiseOpenLoopPolicy,
    TransitionKernel,
    builtin_benchmark,
    validate_hypotheses,
)
from .flow import FlowSolverConfig, flow, flow_policy, integrated_hazard
from .simulate import (
    SimulationConfig,
    compensator_residual,
    discounted_cost,
    mean_and_se,
    run_control,
    run_primal,
    run_randomized,
    sample_control_path,
    sample_primal_path,
    sample_randomized_path,
)
from .hjb import (
    GridSolverConfig,
    HJBSolution,
    PolicyExtract,
    hamiltonian,
    policy_extract,
    solve_hjb,
)
from .bsde import (
    BasisConfig,
    MaximalLimit,
    PenalizedGridSolution,
    PicardRun,
    constraint_violation,
    maximal_limit,
    penalized_grid_solve,
    picard_mc_solve,
)
from .girsanov import (
    a_shift_experiment,
    density_along_path,
    density_means,
    dual_battery_reweighted,
    dual_cost_direct,
    dual_cost_reweighted,
    epsilon_shift_control,
    zsign_bang_bang,
)

__version__ = "0.1.0"

__all__ = [
    "ACTION_JUMP",
    "STATE_JUMP",
    "ActionMeasure",
    "ActionSet",
    "BasisConfig",
    "Bounds",
    "Box",
    "FlowSolverConfig",
    "Grid",
    "GridSolverConfig",
    "GridValueFunction",
    "HJBSolution",
    "HypothesisReport",
    "IntensityControl",
    "LocalCharacteristics",
    "MarkedPointPath",
    "MaximalLimit",
    "PenalizedGridSolution",
    "PicardRun",
    "PiecewiseOpenLoopPolicy",
    "PolicyExtract",
    "SimulationConfig",
    "TransitionKernel",
    "a_shift_experiment",
    "builtin_benchmark",
    "compensator_residual",
    "constraint_violation",
    "density_along_path",
    "density_means",
    "discounted_cost",
    "dual_battery_reweighted",
    "dual_cost_direct",
    "dual_cost_reweighted",
    "epsilon_shift_control",
    "flow",
    "flow_policy",
    "hamiltonian",
    "integrated_hazard",
    "maximal_limit",
    "mean_and_se",
    "penalized_grid_solve",
    "picard_mc_solve",
    "policy_extract",
    "run_control",
    "run_primal",
    "run_randomized",
    "sample_control_path",
    "sample_primal_path",
    "sample_randomized_path",
    "solve_hjb",
    "validate_hypotheses",
    "zsign_bang_bang",
    "__version__",
]
