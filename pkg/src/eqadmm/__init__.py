"""Diagonal equilibration and diagonally scaled ADMM."""

from .consensus import (
    ConsensusProblem,
    ConsensusTrace,
    convergence_rate_bound,
    equilibrate_gram_inverse,
    optimal_scalar_rho,
    solve_consensus,
)
from .equilibration import (
    DiagonalScaling,
    DivergenceError,
    EquilibrationReport,
    equilibration_residual,
    ruiz,
    ruiz_symmetric,
    sinkhorn_knopp,
)
from .graph import (
    GraphState,
    ProjectionCache,
    ScalingPlan,
    SolverConfig,
    SolveTrace,
    adapt_step,
    graph_project,
    plan_scaling,
    solve_graph_form,
    sweep,
)
from .metrics import (
    ConditionMetrics,
    DegenerateInputError,
    InvalidInputError,
    condition_metrics,
    condition_number,
    psi_metric,
    row_col_ratios,
    spectral_norm,
)
from .problems import (
    GraphFormProblem,
    SeparableFunction,
    gen_gaussian,
    gen_lasso,
    gen_lp,
    lasso_oracle,
    scaled_prox,
)

__version__ = "0.1.0"
