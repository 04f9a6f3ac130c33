"""Delayed SIS meta-population toolkit.

Build a weighted contact network, check its spectral stability box,
quantify steady-state noise amplification and node centrality,
integrate the delayed dynamics, and reallocate traffic budgets
optimally or robustly. The ``delaysis`` console script exposes the
same pipeline from the shell.
"""

from .errors import (
    ConvergenceError,
    DelaysisError,
    InfeasibleError,
    SingularityError,
    UnstableSystemError,
    ValidationError,
)
from .network import (
    EpidemicNetwork,
    assemble_system_matrix,
    build_three_star_fixture,
    edge_basis,
    fixture_document,
    load_network,
    network_from_document,
    network_to_document,
    save_network,
)
from .optimize import (
    SWEEP_COLUMNS,
    OptimizationKind,
    OptimizationProblem,
    OptimizationResult,
    SweepRow,
    WorstCaseNoise,
    budget_feasibility_ceiling,
    gradient_objective,
    inner_worst_case,
    objective_value,
    solve_optimal,
    solve_robust,
    sweep_budget,
)
from .performance import (
    CentralityVector,
    NoiseKind,
    NoiseModel,
    PerformanceValue,
    centrality,
    performance_approx,
    performance_closed_form,
    performance_frequency_oracle,
)
from .simulate import (
    SimulationMode,
    Trajectory,
    TrajectoryConfig,
    decay_rate_estimate,
    random_initial_state,
    simulate,
)
from .spectral import (
    DEFAULT_EPSILON,
    StabilityReport,
    SystemMatrix,
    check_stability,
    delay_margin_bound,
    eigendecompose,
    guarded_reciprocal,
    matrix_function,
)

__version__ = "0.1.0"

__all__ = [
    "CentralityVector",
    "ConvergenceError",
    "DEFAULT_EPSILON",
    "DelaysisError",
    "EpidemicNetwork",
    "InfeasibleError",
    "NoiseKind",
    "NoiseModel",
    "OptimizationKind",
    "OptimizationProblem",
    "OptimizationResult",
    "PerformanceValue",
    "SWEEP_COLUMNS",
    "SimulationMode",
    "SingularityError",
    "StabilityReport",
    "SweepRow",
    "SystemMatrix",
    "Trajectory",
    "TrajectoryConfig",
    "UnstableSystemError",
    "ValidationError",
    "WorstCaseNoise",
    "assemble_system_matrix",
    "budget_feasibility_ceiling",
    "build_three_star_fixture",
    "centrality",
    "check_stability",
    "decay_rate_estimate",
    "delay_margin_bound",
    "edge_basis",
    "eigendecompose",
    "fixture_document",
    "gradient_objective",
    "guarded_reciprocal",
    "inner_worst_case",
    "load_network",
    "matrix_function",
    "network_from_document",
    "network_to_document",
    "objective_value",
    "performance_approx",
    "performance_closed_form",
    "performance_frequency_oracle",
    "random_initial_state",
    "save_network",
    "simulate",
    "solve_optimal",
    "solve_robust",
    "sweep_budget",
    "__version__",
]
