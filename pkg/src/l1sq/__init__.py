"""Nearest l1 subspace search with Cauchy sketches.

Exact l1 point-to-subspace distances (an interior-point LP under the hood),
a two-stage sketch-then-refine search engine, and a Monte Carlo lab for the
distributional facts the sketching step leans on.
"""

from .cauchy import (
    check_l1_stability,
    derive_seed,
    generator,
    half_cauchy_cdf,
    half_cauchy_quantile,
    half_cauchy_sample,
    half_cauchy_sums,
    half_cauchy_tail,
    sample_cauchy_matrix,
    tail_bounds,
)
from .engine import (
    GapReport,
    QueryConfig,
    QueryResult,
    SearchIndex,
    argmin_labels,
    build_index,
    build_pool,
    default_labels,
    distance_gap,
    exhaustive_search,
    load_index,
    query,
    save_index,
)
from .lab import make_database, make_scenario, success_curve, wilson_interval
from .linalg import Subspace, l1_norm, orthonormalize
from .regression import (
    RegressionSolution,
    SolverConfig,
    point_to_subspace_distance,
    solve_l1,
    solve_l1_many,
    solve_l1_oracle,
)

__all__ = [
    "GapReport",
    "QueryConfig",
    "QueryResult",
    "RegressionSolution",
    "SearchIndex",
    "SolverConfig",
    "Subspace",
    "argmin_labels",
    "build_index",
    "build_pool",
    "check_l1_stability",
    "default_labels",
    "derive_seed",
    "distance_gap",
    "exhaustive_search",
    "generator",
    "half_cauchy_cdf",
    "half_cauchy_quantile",
    "half_cauchy_sample",
    "half_cauchy_sums",
    "half_cauchy_tail",
    "l1_norm",
    "load_index",
    "make_database",
    "make_scenario",
    "orthonormalize",
    "point_to_subspace_distance",
    "query",
    "sample_cauchy_matrix",
    "save_index",
    "solve_l1",
    "solve_l1_many",
    "solve_l1_oracle",
    "success_curve",
    "tail_bounds",
    "wilson_interval",
]
