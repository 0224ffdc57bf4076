import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vcsg.errors import ConfigError, DomainError
from vcsg.estimators import BIASED, LAMBDA_BIASED_STAR, LAMBDA_UNBIASED_STAR, WEIGHTED_UNBIASED
from vcsg.oracle import IfoCounter, ProblemSpec, batch_components, make_problem, variance_S
from vcsg.schedules import (
    EPS_REGIME,
    INIT_REGIME,
    N_REGIME,
    ScheduleConfig,
    VarianceEstimate,
    batch_lower_bound_biased,
    batch_lower_bound_unbiased,
    batch_size,
    batch_terms,
    biased_bound_coef,
    ceil_fourth_root,
    estimate_s_star,
    initial_epoch,
    resolve_epoch,
    round_half_up,
)


def test_config_validation():
    ScheduleConfig(gamma=1 / 3)
    with pytest.raises(ConfigError, match="gamma must be ≤ 1/3"):
        ScheduleConfig(gamma=0.5)
    for bad in (dict(rho=1.0), dict(rho=0.0), dict(sigma=-1), dict(epsilon=0),
                dict(alpha=1.5), dict(T=0), dict(c_B=0), dict(s_star_smoothing=1.0)):
        with pytest.raises(ConfigError):
            ScheduleConfig(**bad)


def test_sigma_zero_collapses_sample_term():
    cfg = ScheduleConfig(sigma=0.0, epsilon=0.01, n=500)
    _, term_n = batch_terms(3, 2.0, cfg)
    assert term_n == 500
    assert batch_size(3, 2.0, cfg) == (200, EPS_REGIME)
    assert batch_size(3, 20.0, cfg) == (500, N_REGIME)


def test_batch_size_worked_example():
    cfg = ScheduleConfig(epsilon=0.01, sigma=1.0, rho=0.9, n=10**6)
    term_eps, term_n = batch_terms(1, 1.0, cfg)
    assert term_eps == pytest.approx(100.0, rel=1e-12)
    # 1e6 / (1 + 0.14 * 1000 * 0.81)
    assert term_n == pytest.approx(1e6 / 114.4, rel=1e-12)
    assert term_n == pytest.approx(8745.9, rel=1e-3)
    assert batch_size(1, 1.0, cfg) == (100, EPS_REGIME)


def test_batch_size_large_j_tends_to_n():
    cfg = ScheduleConfig(epsilon=1e-4, sigma=1.0, rho=0.5, n=1000)
    assert batch_terms(200, 1.0, cfg)[1] == pytest.approx(1000)
    assert batch_size(200, 1.0, cfg) == (1000, N_REGIME)


def test_batch_size_zero_variance_and_errors():
    cfg = ScheduleConfig(n=100)
    assert batch_size(4, 0.0, cfg) == (3, N_REGIME)
    with pytest.raises(DomainError):
        batch_size(0, 1.0, cfg)
    with pytest.raises(DomainError):
        batch_size(1, -1.0, cfg)
    with pytest.raises(DomainError):
        batch_size(1, math.inf, cfg)


def test_c_B_multiplier():
    cfg = ScheduleConfig(epsilon=0.1, sigma=1.0, n=10**6, c_B=12.0)
    assert batch_size(1, 1.0, cfg) == (120, EPS_REGIME)


def test_rounding_rules():
    assert round_half_up(2.5) == 3
    assert round_half_up(2.4999) == 2
    cfg = ScheduleConfig(epsilon=1.0, sigma=0.0, n=100)
    assert batch_size(1, 0.5, cfg)[0] == 3  # clamp up
    assert batch_size(1, 10.5, cfg)[0] == 11
    assert [ceil_fourth_root(B) for B in (1, 2, 16, 17, 81, 82, 10**8)] == [1, 2, 2, 3, 3, 4, 100]


@given(st.integers(1, 10**12))
def test_ceil_fourth_root_property(B):
    r = ceil_fourth_root(B)
    assert r**4 >= B and (r == 1 or (r - 1) ** 4 < B)


def test_resolve_eps_regime_B16():
    cfg = ScheduleConfig(epsilon=1.0, sigma=0.0, n=1000, L=2.0)
    dec = resolve_epoch(1, 16.0, cfg)
    assert (dec.regime, dec.B, dec.b) == (EPS_REGIME, 16, 2)
    assert dec.eta == 1 / 6
    assert dec.switching and dec.estimator.kind == WEIGHTED_UNBIASED
    assert dec.lam == LAMBDA_UNBIASED_STAR


def test_resolve_n_regime():
    cfg = ScheduleConfig(epsilon=1e-6, sigma=0.0, n=100, L=1.0)
    dec = resolve_epoch(2, 1.0, cfg)
    assert (dec.regime, dec.B, dec.b) == (N_REGIME, 100, 1)
    assert dec.eta == pytest.approx(1 / 30, rel=1e-15)
    assert dec.estimator.kind == BIASED and dec.lam == LAMBDA_BIASED_STAR
    assert not dec.switching


def test_initial_epoch():
    dec = initial_epoch(ScheduleConfig(n=1000, L=0.5))
    assert (dec.regime, dec.B, dec.b) == (INIT_REGIME, 1000, 6)
    assert dec.eta == pytest.approx(1 / (1.5 * math.sqrt(1000)))
    assert dec.estimator.kind == BIASED and dec.lam == 5 / 8


@given(st.integers(1, 60), st.floats(0, 1e4), st.floats(1e-6, 10), st.floats(0, 10),
       st.floats(0.01, 0.99), st.integers(3, 10**5), st.floats(1e-3, 100))
def test_resolved_decisions_satisfy_invariants(j, s, eps, sigma, rho, n, L):
    cfg = ScheduleConfig(epsilon=eps, sigma=sigma, rho=rho, n=n, L=L)
    dec = resolve_epoch(j, s, cfg)
    assert 3 <= dec.B <= n
    assert 1 <= dec.b <= dec.B
    if dec.regime == EPS_REGIME:
        assert dec.b == ceil_fourth_root(dec.B) and dec.eta == 1 / (3 * L)
    else:
        assert dec.b == 1 and dec.eta == pytest.approx(1 / (3 * L * math.sqrt(dec.B)))
    if s > 0:
        te, tn = batch_terms(j, s, cfg)
        assert (dec.regime == EPS_REGIME) == (te <= tn)


def test_sigma_zero_large_variance_is_full_batch_svrg():
    cfg = ScheduleConfig(epsilon=1e-3, sigma=0.0, n=400)
    for j in (1, 5, 50):
        assert batch_size(j, 1.0, cfg) == (400, N_REGIME)


def test_estimate_s_star():
    assert estimate_s_star(np.ones((4, 3)), np.ones(3)) == 0.0
    with pytest.raises(DomainError):
        estimate_s_star(np.ones((1, 3)), np.ones(3))
    assert estimate_s_star(np.ones((1, 3)), np.ones(3), previous=0.7) == 0.7


def test_estimate_s_star_full_batch_equals_population_variance():
    obj = make_problem(ProblemSpec("sigmoid_loss", 50, 6, 1))
    x = np.random.default_rng(0).standard_normal(6)
    c = IfoCounter()
    _, G = batch_components(obj, np.arange(50), x, c)
    assert estimate_s_star(G, G.sum(0) / 50) == variance_S(obj, x, c)


def test_estimate_s_star_two_pass_oracle():
    obj = make_problem(ProblemSpec("sigmoid_loss", 6, 4, 2))
    x = np.random.default_rng(1).standard_normal(4)
    _, G = batch_components(obj, [0, 3, 5], x, IfoCounter())
    mean = [sum(G[i, k] for i in range(3)) / 3 for k in range(4)]
    ref = sum((G[i, k] - mean[k]) ** 2 for i in range(3) for k in range(4)) / 3
    assert estimate_s_star(G, G.mean(0)) == pytest.approx(ref, rel=1e-12, abs=1e-15)


def test_variance_smoothing():
    v = VarianceEstimate(0.5)
    assert v.update(4.0) == 4.0
    assert v.update(2.0) == 3.0
    assert VarianceEstimate(0.0, 5.0).update(1.0) == 1.0
    with pytest.raises(DomainError):
        v.update(-1.0)


def test_lower_bound_unbiased():
    assert batch_lower_bound_unbiased(500, 2.0, 0.32, 0.0, 0.9, 3) == 500
    val = batch_lower_bound_unbiased(10**4, 1.0, 0.32, 1.0, 0.9, 1)
    assert val == pytest.approx(1e4 / (1 + 0.1024 * 100 * 0.81), rel=1e-12)
    assert val == pytest.approx(1075.3, rel=1e-3)
    assert batch_lower_bound_unbiased(10**4, 1.0, 0.32, 1.0, 0.9, 2) >= val


def test_lower_bound_biased():
    assert biased_bound_coef(5 / 8) == pytest.approx(0.140625, rel=1e-15)
    assert round(biased_bound_coef(5 / 8), 2) == 0.14
    assert biased_bound_coef(0.9) == pytest.approx(0.3969, rel=1e-12)
    assert batch_lower_bound_biased(300, 1.0, 0.9, 0.0, 0.5, 1) == 300
    val = batch_lower_bound_biased(10**4, 1.0, 5 / 8, 1.0, 0.9, 1)
    assert val == pytest.approx(1e4 / (1 + 0.140625 * 100 * 0.81), rel=1e-12)
    with pytest.raises(DomainError):
        biased_bound_coef(math.sqrt(2) / 2)
    with pytest.raises(DomainError):
        biased_bound_coef(1.0)
