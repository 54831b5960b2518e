import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from jointdc import (Observation, ParameterVector, joint_log_density, log_likelihood_gradient,
                     simulate_dataset, std_normal_cdf, std_normal_pdf, total_log_likelihood)
from jointdc.errors import DomainError
from jointdc.estimator import reparameterize, inverse_reparameterize
from jointdc.likelihood import log_densities

from conftest import random_theta, small_config
from oracles import joint_density_by_integration, lognormal_aft_loglik, ordered_probit_loglik

mpmath.mp.dps = 40


def one_obs(d, cat):
    return Observation("x", d, cat, {})


def single(d, cat, sigma=1.0, mu1=1.0, rho=0.0, yg=0.0, xb=0.0):
    theta = ParameterVector(gamma=[yg], beta=[xb], sigma=sigma, mu1=mu1, rho=rho)
    return joint_log_density(one_obs(d, cat), theta, [1.0], [1.0])


@pytest.mark.parametrize("t", [0.0, 1.0, -2.5, 7.3, 0.41])
def test_pdf_matches_mpmath(t):
    exact = float(mpmath.npdf(t))
    assert std_normal_pdf(t) == pytest.approx(exact, rel=1e-12)


def test_pdf_examples():
    assert std_normal_pdf(0.0) == pytest.approx(0.3989422804, abs=1e-10)
    assert std_normal_pdf(1.0) == pytest.approx(0.2419707245, abs=1e-10)
    assert std_normal_pdf(-1.3) == std_normal_pdf(1.3)


def test_cdf_matches_mpmath_on_grid():
    for t in np.linspace(-8, 8, 321):
        assert abs(std_normal_cdf(t) - float(mpmath.ncdf(t))) <= 1e-12


def test_cdf_examples():
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_cdf(0.41) == pytest.approx(0.659097, abs=5e-7)
    assert std_normal_cdf(-0.76) == pytest.approx(0.223627, abs=5e-7)


def test_cdf_tails_clamped_and_monotone():
    t = np.linspace(-40, 40, 2001)
    c = std_normal_cdf(t)
    assert np.all(np.diff(c) >= 0) and c[0] >= 0 and c[-1] <= 1


def test_density_example_independent():
    assert single(1.0, 1) == pytest.approx(math.log(0.3989423 * 0.5), abs=1e-6)
    assert single(1.0, 1) == pytest.approx(-1.6120857, abs=1e-7)


def test_density_example_correlated():
    value = single(math.e, 1, rho=-0.24)
    oracle = joint_density_by_integration(math.e, 1, 0.0, 0.0, 1.0, 1.0, -0.24)
    assert value == pytest.approx(math.log(oracle), abs=1e-10)
    # reference value rounded to four decimals: -2.933717
    assert value == pytest.approx(-2.9338, abs=1e-4)


def test_density_example_middle_category():
    value = single(1.0, 2, mu1=0.41)
    exact = math.log(float(mpmath.npdf(0)) * float(mpmath.ncdf(0.41) - mpmath.ncdf(0)))
    assert value == pytest.approx(exact, abs=1e-10)
    assert value == pytest.approx(-2.7573, abs=2e-4)


def test_density_matches_integration_oracle():
    rng = np.random.default_rng(11)
    for _ in range(40):
        sigma, mu1, rho = rng.uniform(0.2, 2), rng.uniform(0.05, 3), rng.uniform(-0.95, 0.95)
        yg, xb, d = rng.normal(1, 1), rng.normal(0, 1.5), math.exp(rng.normal(1, 1.5))
        for cat in (1, 2, 3):
            oracle = joint_density_by_integration(d, cat, yg, xb, sigma, mu1, rho)
            got = single(d, cat, sigma, mu1, rho, yg, xb)
            assert got == pytest.approx(math.log(oracle), abs=1e-8, rel=1e-9)


def test_factorization_against_standalone_models():
    rng = np.random.default_rng(5)
    for k in range(5):
        data = simulate_dataset(small_config(300, seed=k))
        theta = random_theta(rng)
        theta = ParameterVector(theta.gamma, theta.beta, theta.sigma, theta.mu1, 0.0)
        yg, xb = data.Y @ theta.gamma, data.X @ theta.beta
        oracle = (lognormal_aft_loglik(data.departure_hours, yg, theta.sigma)
                  + ordered_probit_loglik(data.travel_category, xb, theta.mu1))
        assert total_log_likelihood(data, theta).log_likelihood == pytest.approx(oracle,
                                                                                 abs=1e-10 * 300)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.2, 2), st.floats(0.05, 3), st.floats(-0.95, 0.95),
       st.floats(-2, 2), st.floats(-3, 3), st.floats(-4, 4))
def test_marginal_consistency(sigma, mu1, rho, yg, xb, u):
    d = math.exp(yg + u * sigma)
    theta = ParameterVector([yg], [xb], sigma, mu1, rho)
    log_marginal = -math.log(d * sigma) + math.log(std_normal_pdf(u))
    total = sum(math.exp(joint_log_density(one_obs(d, c), theta, [1], [1]) - log_marginal)
                for c in (1, 2, 3))
    assert total == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.2, 2), st.floats(0.05, 3), st.floats(-0.99, -0.01),
       st.floats(-3, 3), st.floats(-4, 4), st.floats(0.01, 3))
def test_negative_rho_category3_non_increasing_in_d(sigma, mu1, rho, xb, u, du):
    theta = ParameterVector([0.0], [xb], sigma, mu1, rho)

    def p3(u):
        d = math.exp(u * sigma)
        log_marginal = -math.log(d * sigma) + math.log(std_normal_pdf(u))
        return math.exp(joint_log_density(one_obs(d, 3), theta, [1], [1]) - log_marginal)

    assert p3(u + du) <= p3(u) + 1e-12


def test_normalization_example():
    theta = ParameterVector([1.2], [0.3], 0.7, 0.8, -0.5)
    total = 0.0
    for c in (1, 2, 3):
        f = lambda u: math.exp(joint_log_density(one_obs(math.exp(u), c), theta, [1], [1]) + u)
        total += integrate.quad(f, 1.2 - 12 * 0.7, 1.2 + 12 * 0.7, epsabs=1e-13, limit=200)[0]
    assert total == pytest.approx(1.0, abs=1e-6)


def test_single_observation_total_equals_density(small_data):
    sub = small_data.take([0])
    theta = small_config().theta_true
    obs = sub.observations[0]
    expected = joint_log_density(obs, theta, sub.Y[0], sub.X[0])
    assert total_log_likelihood(sub, theta).log_likelihood == expected


def test_duplication_additivity(small_data):
    theta = small_config().theta_true
    n = small_data.n_obs
    dup = small_data.take(list(range(n)) * 3)
    ll1 = total_log_likelihood(small_data, theta).log_likelihood
    assert total_log_likelihood(dup, theta).log_likelihood == pytest.approx(3 * ll1, abs=1e-9)


def test_total_is_order_independent(small_data):
    theta = small_config().theta_true
    perm = np.random.default_rng(0).permutation(small_data.n_obs)
    assert (total_log_likelihood(small_data.take(perm), theta).log_likelihood
            == total_log_likelihood(small_data, theta).log_likelihood)


def test_extreme_values_are_floored_not_nan():
    theta = ParameterVector([0.0], [60.0], 0.3, 0.5, 0.99)
    v = joint_log_density(one_obs(1e-6, 1), theta, [1], [1])
    assert math.isfinite(v)
    data = simulate_dataset(small_config(50))
    extreme = ParameterVector([0.0, 0.0, 0.0], [80.0, 0.0, 0.0], 0.05, 0.01, -0.999)
    value = total_log_likelihood(data, extreme)
    assert math.isfinite(value.log_likelihood)
    assert value.n_floored > 0
    assert not np.isnan(value.per_observation_log_densities).any()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_never_nan_for_valid_parameters(seed):
    rng = np.random.default_rng(seed)
    theta = random_theta(rng)
    theta = ParameterVector(theta.gamma * 4, theta.beta * 6, theta.sigma, theta.mu1,
                            float(np.clip(theta.rho * 1.1, -0.999, 0.999)))
    log_f, _ = log_densities(simulate_dataset(small_config(60, seed=seed % 7)), theta)
    assert np.isfinite(log_f).all()


@pytest.mark.parametrize("kwargs", [dict(sigma=0.0), dict(sigma=-1.0), dict(mu1=0.0),
                                    dict(rho=1.0), dict(rho=-1.0), dict(sigma=math.nan)])
def test_invalid_theta_is_domain_error(kwargs):
    base = dict(gamma=[0.0], beta=[0.0], sigma=1.0, mu1=1.0, rho=0.0)
    base.update(kwargs)
    with pytest.raises(DomainError):
        ParameterVector(**base)


def fd_gradient(data, theta, rel=1e-6):
    u = reparameterize(theta)
    p, q = theta.gamma.size, theta.beta.size
    g = np.empty_like(u)
    for i in range(u.size):
        h = rel * max(1.0, abs(u[i]))
        up, dn = u.copy(), u.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (total_log_likelihood(data, inverse_reparameterize(up, p, q)).log_likelihood
                - total_log_likelihood(data, inverse_reparameterize(dn, p, q)).log_likelihood
                ) / (2 * h)
    return g


def test_gradient_matches_finite_differences(small_data):
    rng = np.random.default_rng(3)
    data = small_data.take(range(200))
    for _ in range(5):
        theta = random_theta(rng)
        g = log_likelihood_gradient(data, theta)
        fd = fd_gradient(data, theta)
        assert np.all(np.abs(g - fd) <= 1e-4 * np.maximum(1.0, np.abs(fd)))


def test_gradient_zero_by_symmetry():
    # flipping a +-1 covariate maps the dataset onto itself, so at a
    # point with a zero coefficient the likelihood is even in it
    from jointdc import ModelSpec, build_design_matrices
    spec = ModelSpec(("s",), ("s",))
    rows = []
    for d, cat in [(2.0, 1), (5.0, 2), (9.0, 3), (3.0, 3)]:
        for s in (-1.0, 1.0):
            rows.append({"departure_hours": d, "travel_category": cat, "s": s})
    data = build_design_matrices(spec, rows)
    theta = ParameterVector([1.0, 0.0], [0.2, 0.0], 0.8, 0.7, -0.3)
    g = log_likelihood_gradient(data, theta)
    assert abs(g[1]) < 1e-6 and abs(g[3]) < 1e-6


def test_shape_mismatch_is_domain_error(small_data):
    with pytest.raises(DomainError):
        total_log_likelihood(small_data, ParameterVector([0.0], [0.0], 1.0, 1.0, 0.0))
