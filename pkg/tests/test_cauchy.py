"""Cauchy sampling, half-Cauchy tail facts, and the l1 stability law."""

import math

import numpy as np
import pytest
from scipy import stats

from l1sq.cauchy import (
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
from l1sq.errors import DomainError, ZeroVector


def test_sampler_is_deterministic():
    a = sample_cauchy_matrix(17, 29, seed=123)
    b = sample_cauchy_matrix(17, 29, seed=123)
    assert np.array_equal(a.view(np.uint64), b.view(np.uint64))
    c = sample_cauchy_matrix(17, 29, seed=124)
    assert not np.array_equal(a, c)


def test_sampler_median_of_abs_entries():
    # median of |standard Cauchy| is tan(pi/4) = 1
    p = sample_cauchy_matrix(100, 100, seed=7)
    med = np.median(np.abs(p))
    assert 0.9 <= med <= 1.1, f"median {med:.4f} outside [0.9, 1.1]"


def test_sampler_tail_fraction_within_brackets():
    p = sample_cauchy_matrix(50, 200, seed=8)
    frac = float((np.abs(p) >= 10).mean())
    n = p.size
    se = math.sqrt(0.5 / math.pi / 10 * (1 - 0.5 / math.pi / 10) / n)
    lo, hi = 1 / (10 * math.pi), 2 / (10 * math.pi)
    assert lo - 3 * se <= frac <= hi + 3 * se, f"tail fraction {frac:.5f}"


def test_independent_streams_differ():
    a = generator(5, 0).standard_normal(8)
    b = generator(5, 1).standard_normal(8)
    assert not np.array_equal(a, b)
    assert derive_seed(5, 0) != derive_seed(5, 1)


# ---------------------------------------------------------------------------
# closed-form tail facts


def test_tail_bounds_at_one():
    tb = tail_bounds(1.0)
    assert tb.lower == pytest.approx(1 / math.pi)
    assert tb.upper == pytest.approx(2 / math.pi)


def test_tail_bounds_at_two():
    tb = tail_bounds(2.0)
    assert tb.lower == pytest.approx(1 / (2 * math.pi))
    assert tb.upper == pytest.approx(1 / math.pi)


def test_tail_bounds_domain():
    with pytest.raises(DomainError):
        tail_bounds(0.5)


def test_exact_tail_inside_brackets():
    for t in (1.0, 2.0, 5.0, 10.0, 100.0):
        tb = tail_bounds(t)
        exact = half_cauchy_tail(t)
        assert tb.lower <= exact <= tb.upper, f"t={t}: {exact} not in bracket"


def test_exact_tail_endpoints_and_monotonicity():
    assert half_cauchy_tail(0.0) == 1.0
    assert half_cauchy_tail(1.0) == pytest.approx(0.5)
    ts = np.linspace(0.0, 50.0, 200)
    vals = [half_cauchy_tail(t) for t in ts]
    assert all(a > b for a, b in zip(vals, vals[1:])), "tail must strictly decrease"


def test_exact_tail_matches_monte_carlo():
    x = half_cauchy_sample(10**6, seed=99)
    p_hat = float((x >= 10.0).mean())
    exact = half_cauchy_tail(10.0)
    se = math.sqrt(exact * (1 - exact) / 10**6)
    assert abs(p_hat - exact) <= 3 * se, f"{p_hat} vs {exact} (3se={3*se:.2e})"


def test_cdf_quantile_are_inverses():
    for p in (0.1, 0.25, 0.5, 0.9):
        assert half_cauchy_cdf(half_cauchy_quantile(p)) == pytest.approx(p)
    assert half_cauchy_quantile(0.5) == pytest.approx(1.0)


def test_half_cauchy_sums_deterministic_per_trial():
    a = half_cauchy_sums(12, 40, seed=3)
    b = half_cauchy_sums(12, 40, seed=3)
    assert np.array_equal(a, b)
    # trial streams are keyed by index, so a prefix is reproducible alone
    c = half_cauchy_sums(12, 10, seed=3)
    assert np.array_equal(a[:10], c)


# ---------------------------------------------------------------------------
# the stability law: entries of Pv are Cauchy scaled by ||v||_1


def test_stability_one_hot_median():
    v = np.zeros(16)
    v[0] = 1.0
    rep = check_l1_stability(v, d=10, trials=10_000, seed=11)
    assert 0.97 <= rep.median_ratio <= 1.03, f"median ratio {rep.median_ratio:.4f}"


def test_stability_scale_equivariance():
    rng = np.random.default_rng(12)
    v = rng.standard_normal(20)
    v *= 5.0 / np.abs(v).sum()  # now ||v||_1 = 5
    rep = check_l1_stability(v, d=10, trials=10_000, seed=13)
    raw_median = rep.median_ratio * rep.l1_norm
    assert 4.85 <= raw_median <= 5.15, f"median |Pv| {raw_median:.4f}"


def test_stability_upper_quartile():
    rng = np.random.default_rng(14)
    v = rng.standard_normal(30)
    rep = check_l1_stability(v, d=12, trials=5_000, seed=15)
    target = math.tan(3 * math.pi / 8)  # half-Cauchy 0.75 quantile
    assert abs(rep.quantiles[0.75] - target) / target < 0.05
    assert rep.reference_quantiles[0.75] == pytest.approx(target)


def test_stability_kolmogorov_smirnov():
    rng = np.random.default_rng(16)
    v = rng.standard_normal(25)
    rep = check_l1_stability(v, d=10, trials=10_000, seed=17)
    ks = stats.kstest(rep.ratios, half_cauchy_cdf)
    assert ks.pvalue > 0.001, f"KS rejected: p={ks.pvalue:.2e}, D={ks.statistic:.4f}"
    assert rep.ratios.size == 100_000


def test_stability_rejects_zero_vector():
    with pytest.raises(ZeroVector):
        check_l1_stability(np.zeros(8), d=5, trials=1_000, seed=0)


def test_stability_requires_enough_trials():
    with pytest.raises(DomainError):
        check_l1_stability(np.ones(8), d=5, trials=10, seed=0)
