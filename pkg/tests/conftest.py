import numpy as np
import pytest

from jointdc import ModelSpec, ParameterVector, SimulationConfig, simulate_dataset
from jointdc.simulate import Bernoulli, Normal

SMALL_SPEC = ModelSpec(duration_covariates=("a", "b"), ordinal_covariates=("c", "e"))


def small_config(n_obs=500, seed=0, theta=None):
    theta = theta or ParameterVector(gamma=[3.0, -0.3, 0.2], beta=[-0.4, 0.7, 0.25],
                                     sigma=0.5, mu1=0.6, rho=-0.3)
    gens = {"a": Bernoulli(0.5), "b": Normal(0.0, 1.0), "c": Bernoulli(0.4), "e": Normal(1.0, 1.0)}
    return SimulationConfig(SMALL_SPEC, theta, n_obs, gens, seed)


def random_theta(rng, p=3, q=3):
    """A valid parameter vector away from the constraint boundaries."""
    return ParameterVector(gamma=rng.normal(0, 0.5, p) + np.r_[2.0, np.zeros(p - 1)],
                           beta=rng.normal(0, 0.5, q),
                           sigma=rng.uniform(0.2, 1.5), mu1=rng.uniform(0.1, 2.0),
                           rho=rng.uniform(-0.9, 0.9))


@pytest.fixture
def small_data():
    return simulate_dataset(small_config())
