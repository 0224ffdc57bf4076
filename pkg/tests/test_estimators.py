import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vcsg.errors import ConfigError, DomainError
from vcsg.estimators import (
    LAMBDA_BIASED_STAR,
    LAMBDA_UNBIASED_STAR,
    EstimatorKind,
    estimate_biased,
    estimate_plain,
    estimate_weighted_unbiased,
)
from vcsg.oracle import IfoCounter, ProblemSpec, full_grad, grad_batch, make_problem

vec = st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3).map(np.array)
lam_st = st.floats(0.001, 0.999)


def test_plain_examples():
    np.testing.assert_array_equal(estimate_plain([1, 0], [0, 1], [1, 1]), [2, 0])


@given(vec, vec)
def test_plain_cancellations(a, b):
    np.testing.assert_allclose(estimate_plain(a, a, b), b, atol=1e-9)
    np.testing.assert_allclose(estimate_plain(a, b, b), a, atol=1e-9)


def test_dimension_mismatch():
    with pytest.raises(DomainError):
        estimate_plain([1, 2], [1, 2, 3], [0, 0])
    with pytest.raises(DomainError):
        estimate_biased(0.5, [1], [1, 2], [1])


@pytest.mark.parametrize("lam", [0.0, 1.0, -0.2, 1.5])
def test_lambda_outside_open_interval(lam):
    with pytest.raises(DomainError):
        estimate_weighted_unbiased(lam, [1.0], [1.0], [1.0])
    with pytest.raises(DomainError):
        estimate_biased(lam, [1.0], [1.0], [1.0])
    with pytest.raises(DomainError):
        EstimatorKind.weighted_unbiased(lam)


def test_weighted_unbiased_examples():
    # 0.75 * (4, 0) - 0.25 * ((0, 4) - (0, 0))
    np.testing.assert_allclose(estimate_weighted_unbiased(0.25, [4, 0], [0, 4], [0, 0]),
                               [3, -1])


@given(vec, vec, vec)
def test_weighted_unbiased_half_is_half_plain(gk, g0, gj):
    v = estimate_weighted_unbiased(0.5, gk, g0, gj)
    np.testing.assert_allclose(v, 0.5 * (gk - g0 + gj), rtol=1e-12, atol=1e-9)


@given(vec, vec, vec)
def test_weighted_unbiased_small_lambda_near_gk(gk, g0, gj):
    v = estimate_weighted_unbiased(0.001, gk, g0, gj)
    bound = 0.002 * (np.linalg.norm(gk) + np.linalg.norm(g0 - gj))
    assert np.linalg.norm(v - gk) <= bound + 1e-9


def test_biased_examples():
    np.testing.assert_allclose(estimate_biased(0.5, [2, 0], [0, 0], [0, 2]), [1, 1])


@given(vec, vec, vec)
def test_biased_five_eighths(gk, g0, gj):
    v = estimate_biased(5 / 8, gk, g0, gj)
    np.testing.assert_allclose(v, 3 / 8 * (gk - g0) + 5 / 8 * gj, rtol=1e-12, atol=1e-9)


@given(vec, vec, lam_st)
def test_biased_equal_minibatch_gradients(g, gj, lam):
    np.testing.assert_allclose(estimate_biased(lam, g, g, gj), lam * gj, rtol=1e-12, atol=1e-9)


def test_lambda_star_values():
    # root of 8 lam^2 - 15 lam + 4 in (0, 1)
    assert LAMBDA_UNBIASED_STAR == pytest.approx(0.321946, abs=1e-6)
    assert round(LAMBDA_UNBIASED_STAR, 2) == 0.32
    assert 8 * LAMBDA_UNBIASED_STAR**2 - 15 * LAMBDA_UNBIASED_STAR + 4 == pytest.approx(0, abs=1e-12)
    assert LAMBDA_UNBIASED_STAR == (15 - math.sqrt(97)) / 16
    assert LAMBDA_BIASED_STAR == 0.625


def test_kind_parse_and_str():
    for text in ("plain", "weighted_unbiased:0.32", "biased:0.625"):
        assert str(EstimatorKind.parse(text)) == text
    assert EstimatorKind.parse("biased:0.625") == EstimatorKind.biased(5 / 8)
    assert math.isnan(EstimatorKind.plain().weight)
    for bad in ("biased", "biased:1.0", "fancy:0.5", "plain:0.3", "biased:abc"):
        with pytest.raises(ConfigError):
            EstimatorKind.parse(bad)


@given(vec, vec, vec, lam_st)
def test_kind_call_dispatch(gk, g0, gj, lam):
    np.testing.assert_array_equal(EstimatorKind.biased(lam)(gk, g0, gj),
                                  estimate_biased(lam, gk, g0, gj))
    np.testing.assert_array_equal(EstimatorKind.weighted_unbiased(lam)(gk, g0, gj),
                                  estimate_weighted_unbiased(lam, gk, g0, gj))
    np.testing.assert_array_equal(EstimatorKind.plain()(gk, g0, gj),
                                  estimate_plain(gk, g0, gj))


# --- subset enumeration ------------------------------------------------------


@pytest.fixture(scope="module")
def tiny():
    obj = make_problem(ProblemSpec("sigmoid_loss", 6, 4, 5))
    rng = np.random.default_rng(0)
    return obj, rng.standard_normal(4), rng.standard_normal(4)


def _mb_average(obj, xk, x0, gj, b, estimator):
    c = IfoCounter()
    subsets = list(itertools.combinations(range(obj.n), b))
    total = 0.0
    for J in subsets:
        total = total + estimator(grad_batch(obj, J, xk, c), grad_batch(obj, J, x0, c), gj)
    return total / len(subsets)


@pytest.mark.parametrize("lam", [0.1, LAMBDA_UNBIASED_STAR, 0.5, 0.9])
def test_weighted_unbiased_exact_expectation(tiny, lam):
    obj, xk, x0 = tiny
    c = IfoCounter()
    gj = grad_batch(obj, [0, 2, 5], x0, c)
    avg = _mb_average(obj, xk, x0, gj, 2, EstimatorKind.weighted_unbiased(lam))
    expected = (1 - lam) * full_grad(obj, xk, c) + lam * (gj - full_grad(obj, x0, c))
    np.testing.assert_allclose(avg, expected, atol=1e-12)


@pytest.mark.parametrize("lam", [0.1, 0.5, LAMBDA_BIASED_STAR])
def test_biased_exact_expectation(tiny, lam):
    obj, xk, x0 = tiny
    c = IfoCounter()
    gj = grad_batch(obj, [1, 3, 4], x0, c)
    avg = _mb_average(obj, xk, x0, gj, 2, EstimatorKind.biased(lam))
    expected = (1 - lam) * (full_grad(obj, xk, c) - full_grad(obj, x0, c)) + lam * gj
    np.testing.assert_allclose(avg, expected, atol=1e-12)


def test_plain_full_anchor_is_unbiased(tiny):
    obj, xk, x0 = tiny
    gj = full_grad(obj, x0, IfoCounter())
    for b in (1, 2, 3):
        avg = _mb_average(obj, xk, x0, gj, b, EstimatorKind.plain())
        np.testing.assert_allclose(avg, full_grad(obj, xk, IfoCounter()), atol=1e-12)
