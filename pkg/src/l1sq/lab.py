"""Monte Carlo laboratory for the probabilistic guarantees behind the engine.

The two-stage search works because a d x D iid Cauchy matrix P treats l1
norms predictably: for any fixed w, ||Pw||_1 is distributed as ||w||_1 times
a sum of d iid half-Cauchy variates.  Everything here probes consequences of
that reduction empirically:

  expansion_probability   How often the sketch does NOT dilate a vector
                          beyond the (2/pi) d ln d scale.  The probability
                          has a d-free floor (about 1/3 in the limit; the
                          finite-d product bound is
                          ((2/pi) arctan((2/pi) ln d))^d).
  lower_tail_probability  How often the sketch contracts below a
                          (1-alpha)(1-delta) fraction of that scale —
                          exponentially rare, with explicit bound
                          d^(1-alpha) exp(-delta^2 d^alpha / (2 pi)).
  lower_tail_tightness    The matching lower estimate: sums do dip below
                          (2/pi) beta d ln d + 2d with probability at least
                          exp(-C d^(1-beta))/(1 + ln d) for some C.
  lipschitz_probe         The sketch's restriction to a subspace has a
                          bounded Lipschitz constant: certified lower bound
                          by sampled directions, tail bound
                          min_B [2 d m/(pi B) + (2d/(pi t)) ln sqrt(1+B^2)]
                          for the event {L > t m} on an m-dimensional
                          subspace.
  success_curve           End-to-end: probability that the sketched argmin
                          recovers the ambient nearest subspace, as a
                          function of sketch dimension d.
  arctan_sum_check        The elementary inequality sum_{j<=k} arctan(1/j)
                          >= ln(k+1) used by the tail analysis, verified in
                          double precision over a k range.

Every probability comes back as a ProbeReport with a 95% Wilson interval.
Trial i of any experiment draws from stream (seed, <experiment>, i), so
reports are reproducible bit-for-bit regardless of scheduling.

Scenario generation follows the synthetic recognition protocol: n random
r-dimensional subspaces in R^D, a query built from a true member, peak-
normalized, then a round(theta*D)-entry uniform corruption.  eta (second/
nearest exact distance) measures how identifiable the true subspace is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .cauchy import _cauchy_block, derive_seed, generator, half_cauchy_sums
from .engine import argmin_labels, default_labels, distance_gap, exhaustive_search
from .errors import DomainError, TooFewSubspaces, ZeroVector
from .linalg import Subspace, as_matrix, as_vector, orthonormalize
from .regression import SolverConfig, solve_l1_many

_WILSON_Z = 1.959963984540054  # two-sided 95%

# Stream ids, so distinct experiments sharing a seed stay independent.
_S_DATABASE = 0
_S_QUERY = 1
_S_CURVE = 2
_S_DIRECTIONS = 3
_S_FRESH_P = 4


def wilson_interval(successes: int, trials: int, z: float = _WILSON_Z) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise DomainError(f"trials must be positive, got {trials}")
    if not 0 <= successes <= trials:
        raise DomainError(f"successes {successes} outside [0, {trials}]")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    # at the extremes, center and half agree mathematically but differ by an
    # ulp of sqrt rounding; the exact endpoint is the right answer
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class ProbeReport:
    """One Monte Carlo estimate with its trial budget and Wilson interval."""

    name: str
    trials: int
    successes: int
    p_hat: float
    wilson_low: float
    wilson_high: float
    parameters: dict

    @property
    def wilson_width(self) -> float:
        return (self.wilson_high - self.wilson_low) / 2.0


def _report(name: str, successes: int, trials: int, parameters: dict) -> ProbeReport:
    lo, hi = wilson_interval(successes, trials)
    return ProbeReport(
        name=name,
        trials=trials,
        successes=int(successes),
        p_hat=successes / trials,
        wilson_low=lo,
        wilson_high=hi,
        parameters=parameters,
    )


def cdf_sup_distance(samples, cdf) -> float:
    """Kolmogorov-Smirnov sup distance between a sample and a cdf callable."""
    x = np.sort(as_vector(samples, "samples"))
    n = x.shape[0]
    fx = np.asarray(cdf(x), dtype=np.float64)
    upper = np.arange(1, n + 1) / n - fx
    lower = fx - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


# ---------------------------------------------------------------------------
# Half-Cauchy sum tails.

def expansion_scale(d: int) -> float:
    """(2/pi) d ln d, the dilation threshold for a d-row sketch."""
    if d < 2:
        raise DomainError(f"need d >= 2 for a positive ln d scale, got {d}")
    return (2.0 / math.pi) * d * math.log(d)


def expansion_lower_bound(d: int) -> float:
    """Explicit finite-d floor ((2/pi) arctan((2/pi) ln d))^d for the
    no-dilation probability."""
    if d < 2:
        raise DomainError(f"need d >= 2, got {d}")
    per_coord = (2.0 / math.pi) * math.atan((2.0 / math.pi) * math.log(d))
    return per_coord**d


def expansion_probability(w, d: int, trials: int, seed) -> ProbeReport:
    """P[ ||Pw||_1 <= (2/pi) d ln d ||w||_1 ] by simulation.

    By l1 stability the event depends on w only through its (nonzero) norm,
    so w is validated and then enters only the report parameters.  The
    estimate should sit above expansion_lower_bound(d) and, for large d,
    near the limiting value ~ 1/3.
    """
    w = as_vector(w, "w")
    if not np.abs(w).sum() > 0:
        raise ZeroVector("expansion probability needs a nonzero direction")
    threshold = expansion_scale(d)
    sums = half_cauchy_sums(d, trials, seed)
    successes = int((sums <= threshold).sum())
    return _report(
        "expansion",
        successes,
        trials,
        {
            "d": d,
            "threshold": threshold,
            "explicit_lower_bound": expansion_lower_bound(d),
            "limit_reference": 0.3,
            "seed": seed,
        },
    )


def lower_tail_bound(d: int, alpha: float, delta: float) -> float:
    """Analytic bound d^(1-alpha) exp(-delta^2 d^alpha / (2 pi))."""
    if d < 2:
        raise DomainError(f"need d >= 2, got {d}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    return d ** (1.0 - alpha) * math.exp(-delta * delta * d**alpha / (2.0 * math.pi))


def lower_tail_probability(
    d: int, alpha: float, delta: float, trials: int, seed
) -> ProbeReport:
    """P[ sum of d half-Cauchys < (1-alpha)(1-delta)(2/pi) d ln d ].

    The report's parameters carry the analytic bound; the empirical rate
    must stay below it (the bound can exceed 1, in which case it says
    nothing and the trial merely documents that).
    """
    bound = lower_tail_bound(d, alpha, delta)
    threshold = (1.0 - alpha) * (1.0 - delta) * expansion_scale(d)
    sums = half_cauchy_sums(d, trials, seed)
    successes = int((sums < threshold).sum())
    return _report(
        "lower_tail",
        successes,
        trials,
        {
            "d": d,
            "alpha": alpha,
            "delta": delta,
            "threshold": threshold,
            "bound": bound,
            "seed": seed,
        },
    )


def lower_tail_tightness(d: int, beta: float, trials: int, seed) -> ProbeReport:
    """P[ sum of d half-Cauchys <= (2/pi) beta d ln d + 2d ].

    The matching estimate says this probability is at least
    exp(-C d^(1-beta)) / (1 + ln d) for a constant C independent of d; use
    calibrate_tightness_constant to back C out of one report and verify the
    form on a fresh seed.
    """
    if d < 2:
        raise DomainError(f"need d >= 2, got {d}")
    if not 0.0 < beta < 1.0:
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    threshold = (2.0 / math.pi) * beta * d * math.log(d) + 2.0 * d
    sums = half_cauchy_sums(d, trials, seed)
    successes = int((sums <= threshold).sum())
    return _report(
        "lower_tail_tightness",
        successes,
        trials,
        {"d": d, "beta": beta, "threshold": threshold, "seed": seed},
    )


def calibrate_tightness_constant(p_hat: float, d: int, beta: float) -> float:
    """Smallest C with p_hat >= exp(-C d^(1-beta))/(1 + ln d).

    Negative C means the observed rate beats even the C = 0 form; the value
    is still the correct calibration to reuse on other runs.
    """
    if not 0.0 < p_hat <= 1.0:
        raise DomainError(f"p_hat must lie in (0, 1], got {p_hat}")
    if d < 2:
        raise DomainError(f"need d >= 2, got {d}")
    if not 0.0 < beta < 1.0:
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    return -math.log(p_hat * (1.0 + math.log(d))) / d ** (1.0 - beta)


def arctan_sum_check(k_max: int) -> bool:
    """Verify sum_{j=1}^{k} arctan(1/j) >= ln(k+1) for every k <= k_max."""
    if k_max < 1:
        raise DomainError(f"k_max must be >= 1, got {k_max}")
    j = np.arange(1, k_max + 1, dtype=np.float64)
    partial = np.cumsum(np.arctan(1.0 / j))
    return bool(np.all(partial >= np.log(j + 1.0)))


# ---------------------------------------------------------------------------
# Lipschitz constant of a sketch restricted to a subspace.

def lipschitz_tail_bound(d: int, m: int, t: float) -> tuple[float, float]:
    """min over B > 0 of  2 d m/(pi B) + (2 d/(pi t)) ln sqrt(1 + B^2).

    Bounds P[L > t m] where L is the best l1->l1 Lipschitz constant of a
    d-row Cauchy sketch restricted to an m-dimensional subspace.  Returns
    (bound, argmin B).
    """
    if d < 1 or m < 1:
        raise DomainError(f"need d, m >= 1, got d={d}, m={m}")
    if t <= 0:
        raise DomainError(f"need t > 0, got t={t}")

    def g(log_b: float) -> float:
        b = math.exp(log_b)
        return 2.0 * d * m / (math.pi * b) + (2.0 * d / (math.pi * t)) * math.log(
            math.sqrt(1.0 + b * b)
        )

    opt = scipy.optimize.minimize_scalar(g, bounds=(-2.0, 60.0), method="bounded")
    return float(opt.fun), float(math.exp(opt.x))


def _unit_l1_directions(subspace: Subspace, samples: int, seed) -> np.ndarray:
    """Columns: +-(basis columns) and random combinations, all l1-normalized."""
    basis = subspace.basis
    m = subspace.rank
    coeffs = generator(seed, _S_DIRECTIONS).standard_normal((m, samples))
    w = basis @ coeffs  # (D, samples)
    w = np.concatenate([w, basis, -basis], axis=1)
    norms = np.abs(w).sum(axis=0)
    keep = norms > 0
    return w[:, keep] / norms[keep]


@dataclass(frozen=True)
class LipschitzReport:
    """Certified lower bound for one sketch plus the tail-bound check.

    l_hat maximizes ||P w||_1 over sampled unit-l1 directions w in the
    subspace, so l_hat <= L always: a certified lower bound.  bound_check
    reports how often fresh sketches exceed the threshold t * m, to compare
    against the analytic tail bound in its parameters.
    """

    l_hat: float
    threshold: float
    analytic_bound: float
    best_b: float
    bound_check: ProbeReport


def lipschitz_probe(
    p_matrix,
    subspace: Subspace,
    samples: int,
    seed,
    t: float | None = None,
    trials: int = 200,
) -> LipschitzReport:
    """Probe the l1 Lipschitz constant of w -> P w on a subspace.

    If t is not given it is chosen (per d and the subspace dimension) so the
    analytic tail bound equals roughly 0.05, which makes the bound_check
    informative without needing enormous trial counts.
    """
    p = as_matrix(p_matrix, "sketch matrix")
    if p.shape[1] != subspace.ambient_dim:
        raise DomainError(
            f"sketch has {p.shape[1]} columns but the subspace lives in "
            f"R^{subspace.ambient_dim}"
        )
    if samples < 1:
        raise DomainError(f"need at least one sampled direction, got {samples}")
    d = p.shape[0]
    m = subspace.rank

    if t is None:
        lo, hi = 1.0, 2.0
        while lipschitz_tail_bound(d, m, hi)[0] > 0.05 and hi < 1e12:
            hi *= 2.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if lipschitz_tail_bound(d, m, mid)[0] > 0.05:
                lo = mid
            else:
                hi = mid
        t = hi
    bound, best_b = lipschitz_tail_bound(d, m, t)
    threshold = t * m

    dirs = _unit_l1_directions(subspace, samples, seed)
    l_hat = float(np.abs(p @ dirs).sum(axis=0).max())

    violations = 0
    for i in range(trials):
        fresh = _cauchy_block(
            generator(seed, _S_FRESH_P, i), (d, subspace.ambient_dim)
        )
        if float(np.abs(fresh @ dirs).sum(axis=0).max()) > threshold:
            violations += 1
    check = _report(
        "lipschitz_tail",
        violations,
        trials,
        {
            "d": d,
            "m": m,
            "t": t,
            "threshold": threshold,
            "bound": bound,
            "best_b": best_b,
            "samples": samples,
            "seed": seed,
        },
    )
    return LipschitzReport(
        l_hat=l_hat,
        threshold=threshold,
        analytic_bound=bound,
        best_b=best_b,
        bound_check=check,
    )


# ---------------------------------------------------------------------------
# Synthetic recognition scenarios and the success curve.

@dataclass(frozen=True)
class Scenario:
    """One synthetic recognition instance.

    query = clean_query + uniform corruption on round(theta * D) entries,
    where clean_query lies on subspace true_label and is scaled so its
    largest |entry| is 1.  eta and nearest_label come from an exact
    exhaustive search: eta > 1 means the nearest subspace is unambiguous,
    and nearest_label can differ from true_label when the corruption is
    strong enough to defeat exact recovery too.
    """

    subspaces: list[Subspace]
    labels: list[str]
    query: np.ndarray = field(repr=False)
    clean_query: np.ndarray = field(repr=False)
    true_label: str
    theta: float
    eta: float
    nearest_label: str
    distances: dict[str, float] = field(repr=False)


def make_database(n: int, ambient_dim: int, rank: int, seed) -> tuple[list[Subspace], list[str]]:
    """n independent uniformly-oriented rank-r subspaces of R^D.

    Subspace i orthonormalizes a Gaussian D x r draw from stream (seed, i).
    """
    if n < 1:
        raise DomainError(f"need n >= 1 subspaces, got {n}")
    subspaces = [
        orthonormalize(generator(seed, i).standard_normal((ambient_dim, rank)))
        for i in range(n)
    ]
    return subspaces, default_labels(n)


def make_scenario(
    n: int,
    ambient_dim: int,
    rank: int,
    theta: float,
    seed,
    config: SolverConfig | None = None,
) -> Scenario:
    """Database + corrupted query + exact gap diagnostics.

    theta is the corrupted fraction: round(theta * D) entries of the
    peak-normalized on-subspace query get independent U[-1, 1] additions.
    """
    if n < 2:
        raise TooFewSubspaces(f"a scenario needs n >= 2 subspaces, got {n}")
    if not 0.0 <= theta < 1.0:
        raise DomainError(f"theta must lie in [0, 1), got {theta}")
    subspaces, labels = make_database(
        n, ambient_dim, rank, derive_seed(seed, _S_DATABASE)
    )
    rng = generator(seed, _S_QUERY)
    true_idx = int(rng.integers(n))
    basis = subspaces[true_idx].basis
    while True:
        clean = basis @ rng.standard_normal(rank)
        peak = np.abs(clean).max()
        if peak > 0:
            break
    clean = clean / peak
    query = clean.copy()
    n_corrupt = int(round(theta * ambient_dim))
    if n_corrupt > 0:
        idx = rng.choice(ambient_dim, size=n_corrupt, replace=False)
        query[idx] += rng.uniform(-1.0, 1.0, size=n_corrupt)

    exh = exhaustive_search(subspaces, labels, query, config)
    gap = distance_gap(exh.distances)
    return Scenario(
        subspaces=subspaces,
        labels=labels,
        query=query,
        clean_query=clean,
        true_label=labels[true_idx],
        theta=theta,
        eta=gap.eta,
        nearest_label=gap.nearest,
        distances=exh.distances,
    )


def success_curve(
    scenario_params: dict,
    d_list,
    trials: int,
    seed,
    config: SolverConfig | None = None,
) -> list[ProbeReport]:
    """Sketched-argmin recovery probability per sketch dimension d.

    scenario_params needs n, D, r, theta and optionally 'scenarios' (how
    many independent scenarios to rotate through; default trials // 10,
    at least 1).  Trial u of dimension d draws a fresh d x D Cauchy matrix
    from stream (seed, curve, d, u), sketches scenario u mod scenarios, and
    succeeds when the sketched argmin label set intersects the exact ambient
    argmin set (sets, so exact ties — duplicated subspaces — count as
    recovered whichever copy wins).
    """
    if trials < 1:
        raise DomainError(f"trials must be positive, got {trials}")
    n = int(scenario_params["n"])
    ambient_dim = int(scenario_params["D"])
    rank = int(scenario_params["r"])
    theta = float(scenario_params["theta"])
    n_scen = int(scenario_params.get("scenarios", max(1, trials // 10)))

    scenarios = [
        make_scenario(
            n, ambient_dim, rank, theta, derive_seed(seed, _S_DATABASE, s), config
        )
        for s in range(n_scen)
    ]
    ambient_sets = [argmin_labels(sc.distances) for sc in scenarios]
    stacks = [np.stack([s.basis for s in sc.subspaces]) for sc in scenarios]
    etas = sorted(sc.eta for sc in scenarios)
    eta_median = etas[len(etas) // 2]

    reports = []
    for d in d_list:
        d = int(d)
        successes = 0
        for u in range(trials):
            sc = scenarios[u % n_scen]
            p = _cauchy_block(
                generator(seed, _S_CURVE, d, u), (d, ambient_dim)
            )
            proj = np.matmul(p[None, :, :], stacks[u % n_scen])
            pq = p @ sc.query
            sols = solve_l1_many(proj, pq, config)
            dists = {
                lab: s.objective for lab, s in zip(sc.labels, sols)
            }
            if argmin_labels(dists) & ambient_sets[u % n_scen]:
                successes += 1
        reports.append(
            _report(
                "success_curve",
                successes,
                trials,
                {
                    "d": d,
                    "n": n,
                    "D": ambient_dim,
                    "r": rank,
                    "theta": theta,
                    "scenarios": n_scen,
                    "eta_median": eta_median,
                    "seed": seed,
                },
            )
        )
    return reports


def success_curve_for_database(
    subspaces,
    labels,
    query,
    d_list,
    trials: int,
    seed,
    config: SolverConfig | None = None,
) -> list[ProbeReport]:
    """Success curve over an explicit database and a fixed query.

    Same success rule as success_curve — the sketched argmin label set must
    intersect the exact ambient argmin set — so exact ties (a duplicated
    subspace, say) count as recovered no matter which copy the sketch picks.
    """
    if trials < 1:
        raise DomainError(f"trials must be positive, got {trials}")
    query = as_vector(query, "query")
    ambient = exhaustive_search(subspaces, labels, query, config)
    ambient_set = argmin_labels(ambient.distances)
    stack = np.stack([s.basis for s in subspaces])
    ambient_dim = stack.shape[1]

    reports = []
    for d in d_list:
        d = int(d)
        successes = 0
        for u in range(trials):
            p = _cauchy_block(generator(seed, _S_CURVE, d, u), (d, ambient_dim))
            sols = solve_l1_many(np.matmul(p[None, :, :], stack), p @ query, config)
            dists = {lab: s.objective for lab, s in zip(labels, sols)}
            if argmin_labels(dists) & ambient_set:
                successes += 1
        reports.append(
            _report(
                "success_curve",
                successes,
                trials,
                {"d": d, "n": len(labels), "D": ambient_dim, "seed": seed},
            )
        )
    return reports
