import math

import numpy as np
import pytest
from scipy import stats

from jointdc import (ModelSpec, ParameterVector, SimulationConfig, draw_correlated_errors,
                     evacuation_config, recovery_experiment, simulate_dataset)
from jointdc.errors import ConfigurationError
from jointdc.inference import ordinal_probabilities
from jointdc.simulate import Bernoulli, representative_travel_hours
from jointdc.model import categorize_travel_time
from jointdc.reports import recovery_to_dict, to_json

from conftest import SMALL_SPEC, small_config


def test_same_seed_same_stream():
    a = draw_correlated_errors(1000, -0.3, 9)
    b = draw_correlated_errors(1000, -0.3, 9)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert simulate_dataset(small_config(seed=4)).equals(simulate_dataset(small_config(seed=4)))


@pytest.mark.parametrize("rho", [0.0, -0.24])
def test_error_correlation(rho):
    alpha, eps = draw_correlated_errors(1_000_000, rho, 17)
    assert abs(np.corrcoef(alpha, eps)[0, 1] - rho) <= 0.005


def test_degenerate_sigma():
    t = small_config().theta_true
    theta = ParameterVector(t.gamma, t.beta, 1e-8, t.mu1, t.rho)
    data = simulate_dataset(small_config(200, theta=theta))
    np.testing.assert_allclose(data.departure_hours, np.exp(data.Y @ t.gamma), rtol=1e-6)


def test_far_negative_latent_all_category_one():
    spec = ModelSpec(("a",), (), include_ordinal_intercept=True)
    theta = ParameterVector([1.0, 0.2], [-10.0], 0.5, 0.5, 0.3)
    cfg = SimulationConfig(spec, theta, 2000, {"a": Bernoulli(0.5)}, 1)
    assert set(simulate_dataset(cfg).travel_category.tolist()) == {1}


def test_category_shares_match_ordinal_probabilities():
    cfg = evacuation_config(n_obs=100_000, seed=5)
    data = simulate_dataset(cfg)
    expected = ordinal_probabilities(data.X @ cfg.theta_true.beta, cfg.theta_true.mu1).mean(axis=0)
    shares = data.category_counts() / data.n_obs
    assert np.all(np.abs(shares - expected) <= 0.01)


def test_log_duration_moments_for_fixed_row():
    spec = ModelSpec((), ())
    theta = ParameterVector([2.5], [0.1], 0.7, 0.5, -0.4)
    n = 200_000
    data = simulate_dataset(SimulationConfig(spec, theta, n, {}, 3))
    ln_d = np.log(data.departure_hours)
    assert abs(ln_d.mean() - 2.5) <= 3 * 0.7 / math.sqrt(n)
    assert abs(ln_d.std() - 0.7) <= 3 * 0.7 / math.sqrt(2 * n)


def test_categories_exhaustive_and_exclusive():
    data = simulate_dataset(small_config(5000))
    assert set(np.unique(data.travel_category)) <= {1, 2, 3}
    assert data.category_counts().sum() == data.n_obs


def test_representative_hours_map_back():
    cats = np.array([1, 2, 3, 2, 1])
    hours = representative_travel_hours(cats, (1.0, 3.0))
    assert [categorize_travel_time(h, (1.0, 3.0)) for h in hours] == cats.tolist()


def test_dimension_mismatch_is_configuration_error():
    with pytest.raises(ConfigurationError):
        SimulationConfig(SMALL_SPEC, ParameterVector([1.0], [0.0], 1, 1, 0), 10,
                         small_config().generators)
    with pytest.raises(ConfigurationError):
        small_config(n_obs=0)


def test_missing_generator_is_configuration_error():
    gens = dict(small_config().generators)
    del gens["e"]
    with pytest.raises(ConfigurationError):
        SimulationConfig(SMALL_SPEC, small_config().theta_true, 10, gens)


def test_recovery_single_replication_deterministic():
    cfg = small_config(800, seed=6)
    a = recovery_experiment(cfg, 1)
    b = recovery_experiment(cfg, 1)
    assert to_json(recovery_to_dict(a)) == to_json(recovery_to_dict(b))
    assert a.failures == 0 and a.replications == 1


def test_recovery_report_fields():
    rep = recovery_experiment(small_config(1500, seed=2), 4)
    assert len(rep.parameters) == 9
    for p in rep.parameters:
        assert p.n_used == 4 and 0 <= p.coverage <= 4
        assert p.rmse >= abs(p.bias) - 1e-12
