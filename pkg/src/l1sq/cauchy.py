"""Cauchy random matrices and half-Cauchy distribution facts.

Sampling discipline
-------------------
All randomness flows through numpy's SeedSequence, which is splittable: a
stream is identified by a 64-bit master seed plus a tuple of nonnegative
integer stream ids, and distinct tuples give statistically independent
streams.  Anything that runs many trials derives one stream per trial from
(seed, trial_index), so results are bit-identical no matter how trials are
scheduled or parallelized.

A standard Cauchy variate is generated as the ratio of two independent
standard normals; if a denominator falls below 1e-300 in magnitude it is
redrawn, so the ratio never overflows.  This is the package-wide generation
route — every Cauchy entry anywhere comes from _cauchy_block below.

Half-Cauchy reference facts used throughout the Monte Carlo lab, for X = |C|
with C standard Cauchy:

    density        (2/pi) / (1 + x^2)            on x >= 0
    cdf            F(x) = (2/pi) arctan(x)
    tail           P[X >= t] = (2/pi) arctan(1/t)
    tail brackets  1/(pi t) <= P[X >= t] <= 2/(pi t)   for t >= 1
    quantile       F^{-1}(p) = tan(pi p / 2)
    median         1
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ZeroVector
from .linalg import as_vector

#: Denominators smaller than this in magnitude are redrawn.
DENOMINATOR_FLOOR = 1e-300

#: Quantile levels reported by check_l1_stability.
STABILITY_QUANTILES = (0.25, 0.5, 0.75, 0.9)


def validate_seed(seed) -> int:
    """Check that ``seed`` is an integer representable in 64 unsigned bits."""
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise DomainError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise DomainError(f"seed must lie in [0, 2^64), got {seed}")
    return seed


def generator(seed, *stream: int) -> np.random.Generator:
    """PCG64 generator for the stream (seed, *stream)."""
    entropy = (validate_seed(seed),) + tuple(int(s) for s in stream)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def derive_seed(seed, *stream: int) -> int:
    """Collapse (seed, *stream) to a single 64-bit seed.

    generator(derive_seed(s, i)) and generator(s, i) are different streams;
    this exists so a child seed can be stored or logged as one integer while
    remaining a pure function of the parent stream id.
    """
    entropy = (validate_seed(seed),) + tuple(int(s) for s in stream)
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def _cauchy_block(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard Cauchy array via the normal-ratio construction."""
    num = rng.standard_normal(shape)
    den = rng.standard_normal(shape)
    while True:
        small = np.abs(den) < DENOMINATOR_FLOOR
        n_small = int(small.sum())
        if n_small == 0:
            break
        den[small] = rng.standard_normal(n_small)
    return num / den


def sample_cauchy_matrix(d: int, ambient_dim: int, seed) -> np.ndarray:
    """A d x ambient_dim matrix of iid standard Cauchy entries.

    Bit-identical output for equal arguments; entries are generated row-major
    so a prefix of rows agrees with a taller request only by accident (do not
    rely on that).
    """
    if d < 1 or ambient_dim < 1:
        raise DomainError(f"matrix shape must be positive, got {d}x{ambient_dim}")
    rng = generator(seed)
    return _cauchy_block(rng, (d, ambient_dim))


def half_cauchy_sample(n: int, seed) -> np.ndarray:
    """n iid half-Cauchy variates |a/b| from one stream."""
    if n < 1:
        raise DomainError(f"sample size must be positive, got {n}")
    return np.abs(_cauchy_block(generator(seed), n))


def half_cauchy_sums(d: int, trials: int, seed) -> np.ndarray:
    """``trials`` independent sums of d iid half-Cauchy variates.

    Trial i draws from stream (seed, i), so any contiguous or interleaved
    scheduling of trials reproduces the same vector of sums.
    """
    if d < 1:
        raise DomainError(f"d must be positive, got {d}")
    if trials < 1:
        raise DomainError(f"trials must be positive, got {trials}")
    sums = np.empty(trials)
    for i in range(trials):
        sums[i] = np.abs(_cauchy_block(generator(seed, i), d)).sum()
    return sums


def half_cauchy_cdf(x) -> np.ndarray | float:
    """F(x) = (2/pi) arctan(x) for x >= 0 (elementwise)."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0):
        raise DomainError("half-Cauchy cdf is defined on x >= 0")
    out = (2.0 / np.pi) * np.arctan(x)
    return float(out) if out.ndim == 0 else out


def half_cauchy_tail(t: float) -> float:
    """P[X >= t] = (2/pi) arctan(1/t) for t > 0, and 1 at t = 0."""
    if t < 0:
        raise DomainError(f"tail point must be nonnegative, got {t}")
    if t == 0:
        return 1.0
    return (2.0 / math.pi) * math.atan(1.0 / t)


def half_cauchy_quantile(p: float) -> float:
    """Quantile tan(pi p / 2) for p in [0, 1)."""
    if not 0.0 <= p < 1.0:
        raise DomainError(f"quantile level must lie in [0, 1), got {p}")
    return math.tan(math.pi * p / 2.0)


@dataclass(frozen=True)
class TailBounds:
    """Bracketing of the half-Cauchy tail at a point t >= 1.

    lower = 1/(pi t) and upper = 2/(pi t) sandwich the exact tail
    probability; ``exact`` is (2/pi) arctan(1/t).
    """

    t: float
    lower: float
    exact: float
    upper: float


def tail_bounds(t: float) -> TailBounds:
    """Lower/exact/upper tail values at t; requires t >= 1."""
    if t < 1.0:
        raise DomainError(f"tail brackets hold for t >= 1, got {t}")
    return TailBounds(
        t=float(t),
        lower=1.0 / (math.pi * t),
        exact=half_cauchy_tail(t),
        upper=2.0 / (math.pi * t),
    )


@dataclass(frozen=True)
class StabilityReport:
    """Empirical check that a Cauchy sketch scales l1 norms correctly.

    For P a d x D iid Cauchy matrix and any fixed nonzero v, each entry of
    Pv is distributed as ||v||_1 times a standard Cauchy.  ``ratios`` holds
    all d*trials observed values |(Pv)_i| / ||v||_1, which should look
    half-Cauchy: median near 1, quantile at level p near tan(pi p / 2).
    """

    trials: int
    d: int
    l1_norm: float
    median_ratio: float
    quantiles: dict[float, float]
    reference_quantiles: dict[float, float]
    ratios: np.ndarray = field(repr=False)


def check_l1_stability(v, d: int, trials: int, seed) -> StabilityReport:
    """Sample trials independent d x D Cauchy sketches of v and report
    the distribution of |(Pv)_i| / ||v||_1.

    Requires at least 1000 trials so the quantile summaries mean something.
    Trial i uses stream (seed, i).
    """
    v = as_vector(v, "v")
    norm = float(np.abs(v).sum())
    if norm == 0.0:
        raise ZeroVector("stability check requires a nonzero vector")
    if d < 1:
        raise DomainError(f"sketch dimension must be positive, got {d}")
    if trials < 1000:
        raise DomainError(f"need at least 1000 trials, got {trials}")

    ratios = np.empty(trials * d)
    for i in range(trials):
        p = _cauchy_block(generator(seed, i), (d, v.shape[0]))
        ratios[i * d : (i + 1) * d] = np.abs(p @ v)
    ratios /= norm

    qs = {p: float(np.quantile(ratios, p)) for p in STABILITY_QUANTILES}
    refs = {p: half_cauchy_quantile(p) for p in STABILITY_QUANTILES}
    return StabilityReport(
        trials=trials,
        d=d,
        l1_norm=norm,
        median_ratio=qs[0.5],
        quantiles=qs,
        reference_quantiles=refs,
        ratios=ratios,
    )
