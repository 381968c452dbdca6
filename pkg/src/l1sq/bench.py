"""Wall-clock benchmarks: solver scaling in the ambient dimension, and the
two-level search against the exhaustive baseline.

Protocol: every timed operation gets one untimed warm-up call, then the
median of >= 5 repetitions is reported — single numbers at small sizes are
noise.  Instance construction is deterministic in the seed, so re-running a
sweep re-times exactly the same problems (the times differ; the data does
not).  Thread count defaults to 1 so numbers are comparable across machines
with different core counts; pass threads=0 to leave the BLAS pool alone.
"""

from __future__ import annotations

import contextlib
import statistics
import time
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .cauchy import derive_seed, generator
from .engine import QueryConfig, build_index, exhaustive_search, query
from .errors import ConfigInvalid, DomainError
from .lab import make_scenario
from .linalg import orthonormalize
from .regression import SolverConfig, solve_l1

MIN_REPETITIONS = 5


@dataclass(frozen=True)
class BenchRecord:
    """One timed operation.

    wall_time_s is the median over ``repetitions`` timed runs.  For a single
    solve, solver_iterations is the interior-point iteration count; for
    composite operations (exhaustive_search, query) it is the number of
    exact-solver invocations the operation performed.  ``d`` is the
    dimension the solves ran in — equal to D for ambient operations, the
    sketch dimension for the two-level query.
    """

    operation: str
    D: int
    d: int
    r: int
    n: int
    wall_time_s: float
    solver_iterations: int
    repetitions: int

    def __post_init__(self):
        if self.wall_time_s <= 0:
            raise DomainError(f"wall_time_s must be positive, got {self.wall_time_s}")
        if self.repetitions < MIN_REPETITIONS:
            raise ConfigInvalid(
                f"medians need >= {MIN_REPETITIONS} repetitions, got {self.repetitions}"
            )


def _median_time(fn, repetitions: int) -> float:
    fn()  # warm-up: first call pays allocator and code-path setup costs
    times = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def _thread_scope(threads: int):
    """threadpool_limits scope, or a no-op when threads == 0 (leave as-is)."""
    if threads == 0:
        return contextlib.nullcontext()
    return threadpool_limits(limits=threads)


def make_regression_instance(
    big_d: int, r: int, theta: float, seed
) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal Gaussian basis and a peak-normalized corrupted target.

    The instance family mirrors the synthetic recognition scenarios: a point
    on the subspace scaled to unit peak, plus round(theta * D) uniform
    corruptions.  Deterministic in (seed, big_d).
    """
    if r < 1:
        raise DomainError(f"need r >= 1, got {r}")
    if not 0.0 <= theta <= 1.0:
        raise DomainError(f"theta must lie in [0, 1], got {theta}")
    rng = generator(seed, big_d)
    basis = orthonormalize(rng.standard_normal((big_d, r))).basis
    y = basis @ rng.standard_normal(r)
    y = y / np.abs(y).max()
    n_corrupt = int(round(theta * big_d))
    if n_corrupt > 0:
        idx = rng.choice(big_d, size=n_corrupt, replace=False)
        y[idx] += rng.uniform(-1.0, 1.0, size=n_corrupt)
    return basis, y


def bench_regression(
    d_list,
    r: int = 10,
    theta: float = 0.2,
    repetitions: int = MIN_REPETITIONS,
    seed=0,
    config: SolverConfig | None = None,
    threads: int = 1,
) -> list[BenchRecord]:
    """Median solve_l1 wall time at each ambient dimension in d_list.

    d_list must be ascending (a sweep, not a grab bag).  Returns one record
    per dimension; fit_loglog_slope turns them into a scaling exponent.
    """
    dims = [int(v) for v in d_list]
    if not dims:
        raise ConfigInvalid("d_list is empty")
    if any(b <= a for a, b in zip(dims, dims[1:])):
        raise ConfigInvalid(f"d_list must be strictly ascending, got {dims}")
    if repetitions < MIN_REPETITIONS:
        raise ConfigInvalid(
            f"medians need >= {MIN_REPETITIONS} repetitions, got {repetitions}"
        )
    records = []
    with _thread_scope(threads):
        for big_d in dims:
            a, q = make_regression_instance(big_d, r, theta, seed)
            med = _median_time(lambda: solve_l1(a, q, config), repetitions)
            sol = solve_l1(a, q, config)
            records.append(
                BenchRecord(
                    operation="solve_l1",
                    D=big_d,
                    d=big_d,
                    r=r,
                    n=1,
                    wall_time_s=med,
                    solver_iterations=sol.iterations,
                    repetitions=repetitions,
                )
            )
    return records


def fit_loglog_slope(records) -> float:
    """Least-squares slope of log(wall_time_s) against log(D)."""
    recs = list(records)
    if len(recs) < 2:
        raise DomainError("need at least two records to fit a slope")
    lx = np.log([rec.D for rec in recs])
    ly = np.log([rec.wall_time_s for rec in recs])
    return float(np.polyfit(lx, ly, 1)[0])


@dataclass(frozen=True)
class TwoLevelReport:
    """Exhaustive-vs-two-level timing comparison on one synthetic database."""

    speedup: float
    records: list[BenchRecord]
    winner_match: bool
    eta: float


def bench_two_level(
    n: int = 38,
    big_d: int = 16384,
    d: int = 100,
    r: int = 10,
    n_rep: int = 5,
    n_back: int = 5,
    theta: float = 0.2,
    repetitions: int = MIN_REPETITIONS,
    seed=0,
    config: SolverConfig | None = None,
    threads: int = 1,
) -> TwoLevelReport:
    """Time exhaustive_search against the two-stage query on the same data.

    speedup = exhaustive median / query median.  Index construction is
    untimed — it is offline preprocessing amortized over all queries, which
    is the regime the two-level design targets.
    """
    if not 1 <= d < big_d:
        raise ConfigInvalid(f"need 1 <= d < D, got d={d}, D={big_d}")
    scenario = make_scenario(n, big_d, r, theta, seed, config)
    index = build_index(
        scenario.subspaces,
        scenario.labels,
        k=n_rep,
        d=d,
        master_seed=derive_seed(seed, 1),
    )
    qcfg = QueryConfig(
        n_rep=n_rep, n_back=n_back, rng_seed=derive_seed(seed, 2), solver=config
    )

    with _thread_scope(threads):
        med_exh = _median_time(
            lambda: exhaustive_search(
                scenario.subspaces, scenario.labels, scenario.query, config
            ),
            repetitions,
        )
        exh = exhaustive_search(
            scenario.subspaces, scenario.labels, scenario.query, config
        )
        med_query = _median_time(lambda: query(index, scenario.query, qcfg), repetitions)
        result = query(index, scenario.query, qcfg)

    records = [
        BenchRecord(
            operation="exhaustive_search",
            D=big_d,
            d=big_d,
            r=r,
            n=n,
            wall_time_s=med_exh,
            solver_iterations=n,
            repetitions=repetitions,
        ),
        BenchRecord(
            operation="query",
            D=big_d,
            d=d,
            r=r,
            n=n,
            wall_time_s=med_query,
            solver_iterations=result.stage1_solves + result.stage2_solves,
            repetitions=repetitions,
        ),
    ]
    return TwoLevelReport(
        speedup=med_exh / med_query,
        records=records,
        winner_match=result.winner == exh.winner,
        eta=scenario.eta,
    )


def records_to_rows(records) -> tuple[list[str], list[list]]:
    """CSV header and rows for a sequence of BenchRecords."""
    header = [
        "operation",
        "D",
        "d",
        "r",
        "n",
        "wall_time_s",
        "solver_iterations",
        "repetitions",
    ]
    rows = [
        [
            rec.operation,
            rec.D,
            rec.d,
            rec.r,
            rec.n,
            rec.wall_time_s,
            rec.solver_iterations,
            rec.repetitions,
        ]
        for rec in records
    ]
    return header, rows
