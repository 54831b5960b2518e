"""Synthetic data from known parameters, and parameter-recovery experiments."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ConfigurationError, ConvergenceError
from .estimator import ANCILLARY, estimate
from .likelihood import ParameterVector
from .model import (INTERCEPT, Dataset, EstimationSettings, ModelSpec, assemble_dataset,
                    derive_columns, raw_columns)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Bernoulli:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ConfigurationError(f"Bernoulli p must lie in [0, 1], got {self.p}")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return (rng.random(n) < self.p).astype(float)


@dataclass(frozen=True)
class Binomial:
    """Bounded count on ``0..n``."""

    n: int
    p: float

    def __post_init__(self):
        if self.n < 0 or not 0.0 <= self.p <= 1.0:
            raise ConfigurationError(f"invalid Binomial({self.n}, {self.p})")

    def draw(self, rng, n):
        return rng.binomial(self.n, self.p, n).astype(float)


@dataclass(frozen=True)
class Normal:
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not self.sd >= 0:
            raise ConfigurationError(f"Normal sd must be non-negative, got {self.sd}")

    def draw(self, rng, n):
        return self.mean + self.sd * rng.standard_normal(n)


def generator_from_dict(raw: Mapping) -> Bernoulli | Binomial | Normal:
    """Parse ``{"bernoulli": p}``, ``{"binomial": [n, p]}`` or ``{"normal": [mean, sd]}``."""
    if not isinstance(raw, Mapping) or len(raw) != 1:
        raise ConfigurationError(f"generator must be a single-key mapping, got {raw!r}")
    (kind, args), = raw.items()
    try:
        if kind == "bernoulli":
            return Bernoulli(float(args))
        if kind == "binomial":
            return Binomial(int(args[0]), float(args[1]))
        if kind == "normal":
            return Normal(float(args[0]), float(args[1]))
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigurationError(f"bad arguments for {kind} generator: {args!r}") from exc
    raise ConfigurationError(f"unknown generator kind {kind!r}")


def generator_to_dict(gen) -> dict:
    if isinstance(gen, Bernoulli):
        return {"bernoulli": gen.p}
    if isinstance(gen, Binomial):
        return {"binomial": [gen.n, gen.p]}
    return {"normal": [gen.mean, gen.sd]}


@dataclass(frozen=True)
class SimulationConfig:
    """Everything needed to draw a synthetic dataset.

    ``generators`` supplies every raw column the model needs (derived
    columns are computed from them).  When ``emit_travel_hours`` is set,
    datasets also carry a representative travel time per row that maps
    back to the drawn category under ``spec.category_bounds``.
    """

    spec: ModelSpec
    theta_true: ParameterVector
    n_obs: int
    generators: Mapping[str, Bernoulli | Binomial | Normal]
    seed: int = 0
    emit_travel_hours: bool = False

    def __post_init__(self):
        if self.n_obs < 1:
            raise ConfigurationError(f"n_obs must be at least 1, got {self.n_obs}")
        p, q = len(self.spec.duration_columns), len(self.spec.ordinal_columns)
        if self.theta_true.gamma.size != p or self.theta_true.beta.size != q:
            raise ConfigurationError(
                f"theta_true has ({self.theta_true.gamma.size}, {self.theta_true.beta.size}) "
                f"coefficients but the model has ({p}, {q}) columns")
        raw_columns(self.spec, self.generators.keys())

    def with_seed(self, seed: int) -> "SimulationConfig":
        return SimulationConfig(self.spec, self.theta_true, self.n_obs, self.generators,
                                seed, self.emit_travel_hours)

    def with_n_obs(self, n_obs: int) -> "SimulationConfig":
        return SimulationConfig(self.spec, self.theta_true, n_obs, self.generators,
                                self.seed, self.emit_travel_hours)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def draw_correlated_errors(n: int, rho: float, seed) -> tuple[np.ndarray, np.ndarray]:
    """Standard bivariate normal pairs with correlation ``rho``.

    ``alpha ~ N(0, 1)`` then ``eps = rho alpha + sqrt(1 - rho^2) w``.
    ``seed`` is an integer (PCG64 stream) or an existing Generator.
    """
    if not abs(rho) < 1:
        raise ConfigurationError(f"rho must lie in (-1, 1), got {rho}")
    rng = _rng(seed)
    alpha = rng.standard_normal(n)
    w = rng.standard_normal(n)
    return alpha, rho * alpha + math.sqrt((1.0 - rho) * (1.0 + rho)) * w


def simulate_dataset(config: SimulationConfig) -> Dataset:
    """Draw covariates, then errors, then outcomes, all from one seeded stream."""
    spec, theta, n = config.spec, config.theta_true, config.n_obs
    rng = _rng(config.seed)
    raw = {name: config.generators[name].draw(rng, n)
           for name in raw_columns(spec, config.generators.keys())}
    covariates = derive_columns(spec, raw)
    ones = np.ones(n)
    Y = np.column_stack([ones if c == INTERCEPT else covariates[c] for c in spec.duration_columns])
    X = np.column_stack([ones if c == INTERCEPT else covariates[c] for c in spec.ordinal_columns])
    alpha, eps = draw_correlated_errors(n, theta.rho, rng)
    d = np.exp(Y @ theta.gamma + theta.sigma * alpha)
    z = X @ theta.beta + eps
    cats = np.where(z <= 0.0, 1, np.where(z <= theta.mu1, 2, 3))
    ids = [str(i) for i in range(1, n + 1)]
    return assemble_dataset(spec, ids, d, cats, covariates)


def representative_travel_hours(categories, bounds) -> np.ndarray:
    """A travel time inside each category: the lower cut point for category 1,
    interval midpoints in between, and twice the last cut point above it."""
    bounds = list(bounds)
    reps = [bounds[0]] + [0.5 * (a + b) for a, b in zip(bounds, bounds[1:])] + [2.0 * bounds[-1]]
    return np.asarray(reps)[np.asarray(categories) - 1]


@dataclass
class ParameterRecovery:
    name: str
    truth: float
    mean_estimate: float
    bias: float
    rmse: float
    empirical_sd: float
    mean_se: float
    se_ratio: float
    coverage: int
    n_used: int

    @property
    def coverage_rate(self) -> float:
        return self.coverage / self.n_used if self.n_used else math.nan


@dataclass
class RecoveryReport:
    replications: int
    n_obs: int
    seed: int
    failures: int
    parameters: list[ParameterRecovery] = field(default_factory=list)
    estimates: np.ndarray | None = None
    std_errors: np.ndarray | None = None

    def by_name(self, name: str) -> ParameterRecovery:
        for p in self.parameters:
            if p.name == name:
                return p
        raise KeyError(name)


def parameter_labels(spec: ModelSpec) -> list[str]:
    return ([f"duration:{c}" for c in spec.duration_columns]
            + [f"ordinal:{c}" for c in spec.ordinal_columns] + list(ANCILLARY))


def recovery_experiment(config: SimulationConfig, replications: int,
                        settings: EstimationSettings | None = None,
                        z_crit: float = 1.959963984540054) -> RecoveryReport:
    """Simulate and re-estimate ``replications`` times.

    Replication ``r`` uses seed ``config.seed + r``.  A replication that
    fails to converge or yields no standard errors counts as a failure and
    is left out of the summaries.  ``se_ratio`` is empirical sd over mean
    reported SE; ``coverage`` counts intervals ``estimate +/- z_crit * SE``
    containing the truth.
    """
    if replications < 1:
        raise ConfigurationError("replications must be at least 1")
    settings = settings or config.spec.estimation
    truth = config.theta_true.to_array()
    ests, ses, failures = [], [], 0
    for r in range(replications):
        data = simulate_dataset(config.with_seed(config.seed + r))
        try:
            res = estimate(data, config.spec, settings)
        except ConvergenceError as exc:
            log.warning("replication %d failed: %s", r, exc)
            failures += 1
            continue
        if res.std_errors is None:
            log.warning("replication %d: Hessian not positive definite", r)
            failures += 1
            continue
        ests.append(res.theta_hat.to_array())
        ses.append(res.std_errors)
    report = RecoveryReport(replications, config.n_obs, config.seed, failures)
    if not ests:
        return report
    E, S = np.array(ests), np.array(ses)
    report.estimates, report.std_errors = E, S
    m = len(E)
    for j, name in enumerate(parameter_labels(config.spec)):
        err = E[:, j] - truth[j]
        sd = float(np.std(E[:, j], ddof=1)) if m > 1 else math.nan
        mean_se = float(np.mean(S[:, j]))
        report.parameters.append(ParameterRecovery(
            name=name, truth=float(truth[j]), mean_estimate=float(np.mean(E[:, j])),
            bias=float(np.mean(err)), rmse=float(np.sqrt(np.mean(err**2))),
            empirical_sd=sd, mean_se=mean_se, se_ratio=sd / mean_se,
            coverage=int(np.sum(np.abs(err) <= z_crit * S[:, j])), n_used=m))
    return report


# Coefficients and covariate means from the evacuation study this model was
# built for: departure-time equation, travel-time equation, ancillary terms.
EVACUATION_DURATION = {"NJ": -0.25, "Stormconcern": -0.29, "Ordered&sufinfo": -0.18,
                       "Old&loctv": 0.16, "Household1&reco": -0.51, "Agehet": 0.22}
EVACUATION_ORDINAL = {"Loctv": 0.76, "Widow": -0.70, "Married&evacbefore": -0.65,
                      "Household1&concern": -0.58, "Np": 0.14, "Sexhet": -0.64}
EVACUATION_MEANS = {"NJ": 0.58, "Stormconcern": 0.86, "Agehet": 0.08, "Ordered&sufinfo": 0.44,
                    "Old&loctv": 0.55, "Household1&reco": 0.05, "Loctv": 0.88, "Np": 1.23,
                    "Widow": 0.12, "Sexhet": 0.14, "Household1&concern": 0.23,
                    "Married&evacbefore": 0.23}


def evacuation_config(n_obs: int = 196, seed: int = 0,
                      settings: EstimationSettings | None = None) -> SimulationConfig:
    """Simulation calibrated to the evacuation study.

    Indicators are Bernoulli with the study's sample means; network size
    ``Np`` is Binomial(6, 0.205), matching its mean of 1.23 and range 0..6.
    """
    spec = ModelSpec(duration_covariates=tuple(EVACUATION_DURATION),
                     ordinal_covariates=tuple(EVACUATION_ORDINAL),
                     estimation=settings or EstimationSettings())
    theta = ParameterVector(gamma=[4.36, *EVACUATION_DURATION.values()],
                            beta=[-0.95, *EVACUATION_ORDINAL.values()],
                            sigma=0.49, mu1=0.41, rho=-0.24)
    gens = {k: (Binomial(6, 1.23 / 6) if k == "Np" else Bernoulli(v))
            for k, v in EVACUATION_MEANS.items()}
    return SimulationConfig(spec, theta, n_obs, gens, seed)
