import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from natcd import BINOMIAL, GAUSSIAN, POISSON, Dataset, get_family
from natcd.errors import DataError
from natcd.family import CoordinateSlice, PredictorCache, u_prime_j, u_second_j, w0_j


def dataset(seed=0, n=30, p=5):
    rng = np.random.default_rng(seed)
    return Dataset.from_predictors(rng.standard_normal((n, p - 1)), rng.integers(0, 2, n).astype(float))


def test_get_family_aliases():
    assert get_family("logistic") is BINOMIAL
    assert get_family("Poisson") is POISSON
    with pytest.raises(ValueError):
        get_family("gamma")


@given(st.floats(-700, 700))
def test_logistic_log_partition_is_stable(eta):
    a = BINOMIAL.a(np.array([eta]))[0]
    assert math.isfinite(a)
    assert a == pytest.approx(max(eta, 0.0) + math.log1p(math.exp(-abs(eta))), rel=1e-15)
    assert BINOMIAL.a2(np.array([eta]))[0] >= 0.0


def test_family_derivatives_at_zero():
    zero = np.zeros(1)
    assert BINOMIAL.a(zero)[0] == pytest.approx(math.log(2.0))
    assert BINOMIAL.a1(zero)[0] == 0.5
    assert BINOMIAL.a2(zero)[0] == 0.25
    assert POISSON.a2(zero)[0] == 1.0
    assert GAUSSIAN.a2(zero)[0] == 1.0


def test_curvature_floor_only_for_binomial():
    far = np.array([-800.0])
    assert BINOMIAL.a2(far)[0] == 0.0
    assert BINOMIAL.a2_floored(far)[0] == 1e-10


def test_response_checks():
    with pytest.raises(DataError, match="row 2"):
        BINOMIAL.check_response(np.array([0.0, 2.0]))
    with pytest.raises(DataError):
        POISSON.check_response(np.array([1.5]))
    GAUSSIAN.check_response(np.array([-3.2]))


def test_gaussian_u_prime_at_zero_is_partial_residual_product():
    ds = dataset()
    beta = np.array([0.3, -1.0, 0.0, 2.0, 0.5])
    cache = PredictorCache(ds, beta)
    j = 3
    eta_minus = ds.x @ beta - ds.x[:, j] * beta[j]
    expected = np.mean(ds.x[:, j] * eta_minus)
    assert u_prime_j(ds, GAUSSIAN, cache, j, 0.0) == pytest.approx(expected, rel=1e-13)


def test_logistic_intercept_slope_at_zero():
    ds = dataset()
    assert u_prime_j(ds, BINOMIAL, PredictorCache(ds), 0, 0.0) == 0.5


def test_logistic_two_point_example():
    ds = Dataset(np.array([[1.0, 1.0], [1.0, -1.0]]), np.array([0.0, 0.0]))
    value = u_prime_j(ds, BINOMIAL, PredictorCache(ds), 1, 1.0)
    assert value == pytest.approx((expit(1.0) - expit(-1.0)) / 2, rel=1e-15)
    assert value == pytest.approx(0.231058, abs=1e-6)


def test_second_derivative_examples():
    ds = dataset()
    cache = PredictorCache(ds, np.ones(ds.p))
    assert u_second_j(ds, GAUSSIAN, cache, 2, 7.0) == pytest.approx(np.mean(ds.x[:, 2] ** 2))
    signs = Dataset(np.array([[1.0, 1.0], [1.0, -1.0], [1.0, 1.0]]), np.zeros(3))
    assert u_second_j(signs, BINOMIAL, PredictorCache(signs), 1, 0.0) == 0.25
    one = Dataset(np.array([[1.0]]), np.array([1.0]))
    assert u_second_j(one, POISSON, PredictorCache(one), 0, 0.5) == pytest.approx(1.648721, abs=1e-6)


def test_ridge_enters_derivatives_except_intercept():
    ds = dataset()
    cache = PredictorCache(ds, np.full(ds.p, 0.2))
    for j in (0, 2):
        base = u_prime_j(ds, BINOMIAL, cache, j, 0.2)
        ridged = u_prime_j(ds, BINOMIAL, cache, j, 0.2, lam=0.5)
        assert ridged - base == pytest.approx(0.2 if j else 0.0, abs=1e-15)
        assert u_second_j(ds, BINOMIAL, cache, j, 0.2, lam=0.5) - u_second_j(
            ds, BINOMIAL, cache, j, 0.2) == pytest.approx(1.0 if j else 0.0)


def test_threshold_centre_examples():
    ds = dataset()
    cache = PredictorCache(ds)
    for j in range(ds.p):
        assert w0_j(ds, BINOMIAL, cache, j) == pytest.approx(np.mean(ds.x[:, j]) / 2, abs=1e-15)
        assert w0_j(ds, GAUSSIAN, cache, j) == 0.0
    beta = np.zeros(ds.p)
    beta[0] = 0.3
    # brute force without the cache
    expected = np.mean(ds.x[:, 2] * expit(0.3 * ds.x[:, 0]))
    assert w0_j(ds, BINOMIAL, PredictorCache(ds, beta), 2, lam=0.4) == pytest.approx(expected, rel=1e-14)


def test_cache_shift_zero_still_counts():
    ds = dataset()
    cache = PredictorCache(ds, np.ones(ds.p))
    eta = cache.eta.copy()
    cache.shift(1, 0.0)
    assert cache.refresh_counter == 1
    np.testing.assert_array_equal(cache.eta, eta)


def test_cache_refresh_matches_direct_product():
    ds = dataset()
    cache = PredictorCache(ds)
    cache.shift(2, 0.7)
    cache.refresh()
    np.testing.assert_allclose(cache.eta, ds.x @ cache.coef, atol=1e-12, rtol=0)
    assert cache.refresh_counter == 0


def test_cache_drift_under_many_shifts():
    ds = dataset(seed=3, n=200, p=20)
    cache = PredictorCache(ds, refresh_period=10**9)
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(10_000):
        cache.shift(int(rng.integers(0, ds.p)), float(rng.normal()))
        if rng.random() < 0.01:
            worst = max(worst, float(np.max(np.abs(cache.eta - ds.x @ cache.coef))))
    worst = max(worst, float(np.max(np.abs(cache.eta - ds.x @ cache.coef))))
    assert worst < 1e-8


def test_cache_refreshes_every_2p_updates():
    ds = dataset(p=3)
    cache = PredictorCache(ds)
    assert cache.refresh_period == 6
    for _ in range(6):
        cache.shift(1, 0.1)
    assert cache.refresh_counter == 0


def test_memo_invalidated_by_updates():
    ds = dataset()
    cache = PredictorCache(ds)
    first = cache.evaluate(BINOMIAL.a1)
    assert cache.evaluate(BINOMIAL.a1) is first
    cache.shift(1, 0.5)
    np.testing.assert_allclose(cache.evaluate(BINOMIAL.a1), expit(ds.x @ cache.coef), rtol=1e-14)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["gaussian", "binomial", "poisson"]))
def test_slice_value_change_matches_values(seed, family):
    kernel = get_family(family)
    rng = np.random.default_rng(seed)
    ds = dataset(seed % 1000)
    cache = PredictorCache(ds, rng.normal(0, 0.3, ds.p))
    sl = CoordinateSlice(ds, kernel, cache, 1, 0.1)
    b0, b1 = sl.current, sl.current + float(rng.normal())
    change, base = sl.value_change(b0, b1)
    assert base == pytest.approx(sl.value(b0), rel=1e-12)
    assert change == pytest.approx(sl.value(b1) - sl.value(b0), rel=1e-8, abs=1e-12)
