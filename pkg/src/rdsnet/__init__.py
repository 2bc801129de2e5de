"""Reconstruction of the hidden social network behind an RDS study.

The observed recruitment forest, reported degrees, interview times, and
coupon usage place a tractable probability distribution on the unobserved
subgraph connecting the sampled subjects.  This package simulates the
recruitment process, evaluates its waiting-time likelihood with cheap
single-edge updates, samples the joint posterior over (subgraph, rate),
and searches for the joint MAP estimate by simulated annealing.
"""

from .graphs import (
    CompatibilityError,
    CouponMatrix,
    InfeasibleCouponsError,
    ObservedData,
    RecruitmentGraph,
    Violation,
    build_coupon_matrix,
    check_compatibility,
    pendant_counts,
)
from .likelihood import (
    TimingCache,
    apply_add,
    apply_remove,
    delta_time,
    lambda_mle,
    log_likelihood,
    log_ratio_add,
    log_ratio_remove,
    susceptible_counts,
)
from .metrics import ReconstructionScore, SummaryRow, score, summarize_replications
from .sampler import (
    AnnealSchedule,
    ChainConfig,
    ChainTrace,
    MapResult,
    PosteriorResult,
    PriorBounds,
    PriorSpec,
    empirical_prior_bounds,
    enumerate_feasible_moves,
    mh_step_graph,
    mh_step_lambda,
    propose_move,
    run_map,
    run_posterior,
)
from .simulate import (
    PopulationGraph,
    RecruitmentModel,
    SimulationResult,
    generate_er_graph,
    load_population_graph,
    simulate_rds,
    simulate_turn_taking,
)
from .state import Move, SubgraphState

__version__ = "0.1.0"

__all__ = [
    "AnnealSchedule",
    "ChainConfig",
    "ChainTrace",
    "CompatibilityError",
    "CouponMatrix",
    "InfeasibleCouponsError",
    "MapResult",
    "Move",
    "ObservedData",
    "PopulationGraph",
    "PosteriorResult",
    "PriorBounds",
    "PriorSpec",
    "ReconstructionScore",
    "RecruitmentGraph",
    "RecruitmentModel",
    "SimulationResult",
    "SubgraphState",
    "SummaryRow",
    "TimingCache",
    "Violation",
    "apply_add",
    "apply_remove",
    "build_coupon_matrix",
    "check_compatibility",
    "delta_time",
    "empirical_prior_bounds",
    "enumerate_feasible_moves",
    "generate_er_graph",
    "lambda_mle",
    "load_population_graph",
    "log_likelihood",
    "log_ratio_add",
    "log_ratio_remove",
    "mh_step_graph",
    "mh_step_lambda",
    "pendant_counts",
    "propose_move",
    "run_map",
    "run_posterior",
    "score",
    "simulate_rds",
    "simulate_turn_taking",
    "summarize_replications",
    "susceptible_counts",
]
