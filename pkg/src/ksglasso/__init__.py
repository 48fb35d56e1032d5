"""Sparse Kronecker-sum inverse covariance estimation.

A feature graph and a sample graph are estimated jointly from matrix-variate
data by a proximal Newton method that works entirely through the two small
eigendecompositions, with an optional truncated Hessian for scale and a
trace-ratio rule that pins the unidentifiable diagonal gauge once at the end.
"""

from .core import (
    EigenSystem,
    Gradient,
    KsModel,
    SampleStats,
    adjust_trace_ratio,
    eigendecompose,
    gradient,
    gradient_oracle,
    identify_diagonals,
    kron_sum_dense,
    ks_logdet,
    objective,
    sample_stats,
)
from .evaluate import PRPoint, bic, error_norm, pr_auc, pr_curve
from .exceptions import (
    DegenerateGaugeError,
    GenerationError,
    InputError,
    KsglassoError,
    LineSearchError,
    NotPositiveDefiniteError,
    NumericalError,
    ResourceLimitError,
)
from .hessian import (
    ApproxHessianRep,
    ExactHessianRep,
    build_approx,
    build_exact,
    eig_bounds,
    hessian_oracle_full,
)
from .simulate import GraphSpec, gen_cluster_graph, gen_random_graph, sample_data
from .solver import (
    ActiveSets,
    DirectionPair,
    SolverConfig,
    SolverTrace,
    cd_direction,
    check_convergence,
    detect_active_sets,
    fit,
    line_search,
    screen_blocks,
)

__version__ = "0.1.0"

__all__ = [
    "ActiveSets",
    "ApproxHessianRep",
    "DegenerateGaugeError",
    "DirectionPair",
    "EigenSystem",
    "ExactHessianRep",
    "GenerationError",
    "Gradient",
    "GraphSpec",
    "InputError",
    "KsModel",
    "KsglassoError",
    "LineSearchError",
    "NotPositiveDefiniteError",
    "NumericalError",
    "PRPoint",
    "ResourceLimitError",
    "SampleStats",
    "SolverConfig",
    "SolverTrace",
    "adjust_trace_ratio",
    "bic",
    "build_approx",
    "build_exact",
    "cd_direction",
    "check_convergence",
    "detect_active_sets",
    "eig_bounds",
    "eigendecompose",
    "error_norm",
    "fit",
    "gen_cluster_graph",
    "gen_random_graph",
    "gradient",
    "gradient_oracle",
    "hessian_oracle_full",
    "identify_diagonals",
    "kron_sum_dense",
    "ks_logdet",
    "line_search",
    "objective",
    "pr_auc",
    "pr_curve",
    "sample_data",
    "sample_stats",
    "screen_blocks",
]
