import math

import mpmath
import numpy as np
import pytest

from degseq.logspace import NEG_INF, log_factorial, log_mean_and_relvar, log_sum_exp


def test_lse_small_cases():
    assert log_sum_exp([0.0, 0.0]) == pytest.approx(math.log(2.0), rel=1e-15)
    assert log_sum_exp([1.5, NEG_INF]) == 1.5
    assert log_sum_exp([]) == NEG_INF
    assert log_sum_exp([NEG_INF, NEG_INF]) == NEG_INF


def test_lse_normalization():
    vals = [math.log(1 / 1000)] * 1000
    assert abs(log_sum_exp(vals)) < 1e-12


def test_lse_matches_extended_precision():
    rng = np.random.default_rng(5)
    mpmath.mp.dps = 50
    for _ in range(20):
        vals = rng.normal(0, 30, size=1000)
        ref = mpmath.log(mpmath.fsum(mpmath.exp(mpmath.mpf(float(v))) for v in vals))
        got = log_sum_exp(vals)
        assert abs(got - float(ref)) <= 1e-12 * max(1.0, abs(float(ref)))


def test_lse_permutation_invariant_bitwise():
    rng = np.random.default_rng(1)
    vals = rng.normal(0, 5, size=997)
    ref = log_sum_exp(vals)
    for _ in range(10):
        assert log_sum_exp(rng.permutation(vals)) == ref


def test_lse_accepts_generators_and_arrays():
    vals = [0.1, -2.0, 3.0]
    assert log_sum_exp(iter(vals)) == log_sum_exp(np.array(vals))


def test_log_factorial_small():
    assert log_factorial(0) == 0.0
    assert log_factorial(1) == 0.0
    assert log_factorial(4) == pytest.approx(math.log(24), rel=1e-15)
    with pytest.raises(ValueError):
        log_factorial(-1)


@pytest.mark.parametrize("n", [52, 1000, 123_457, (1 << 20) - 1, 1 << 20, 5_000_000])
def test_log_factorial_extended_precision(n):
    mpmath.mp.dps = 40
    ref = float(mpmath.loggamma(n + 1))
    assert log_factorial(n) == pytest.approx(ref, rel=1e-12)


def test_log_factorial_consecutive_differences():
    # absolute error of a difference scales with the magnitude of its terms
    rng = np.random.default_rng(2)
    for n in list(rng.integers(1, 10 ** 6, size=300)) + [1, 2, 10 ** 6]:
        n = int(n)
        diff = log_factorial(n) - log_factorial(n - 1)
        scale = max(1.0, log_factorial(n))
        assert abs(diff - math.log(n)) <= 1e-12 * scale


def test_relvar_identical_values():
    log_mean, relvar = log_mean_and_relvar([math.log(7.0)] * 50)
    assert log_mean == pytest.approx(math.log(7.0), rel=1e-14)
    assert relvar == 0.0


def test_relvar_two_points():
    log_mean, relvar = log_mean_and_relvar([0.0, math.log(3.0)])
    assert math.exp(log_mean) == pytest.approx(2.0, rel=1e-14)
    assert relvar == pytest.approx(0.25, rel=1e-12)


def test_relvar_matches_direct_domain():
    rng = np.random.default_rng(3)
    x = rng.lognormal(0.0, 1.0, size=500)
    log_mean, relvar = log_mean_and_relvar(np.log(x))
    assert math.exp(log_mean) == pytest.approx(x.mean(), rel=1e-9)
    assert relvar == pytest.approx(x.var() / x.mean() ** 2, rel=1e-9)


def test_relvar_with_zeros_and_all_zero():
    log_mean, relvar = log_mean_and_relvar([NEG_INF, 0.0])
    assert math.exp(log_mean) == pytest.approx(0.5)
    assert relvar == pytest.approx(1.0)
    log_mean, relvar = log_mean_and_relvar([NEG_INF] * 3)
    assert log_mean == NEG_INF and math.isnan(relvar)
    with pytest.raises(ValueError):
        log_mean_and_relvar([])
