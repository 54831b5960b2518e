"""Joint log density of a lognormal duration and an ordered-probit category.

With ``z = (ln d - gamma.y) / sigma`` the duration error is standard normal,
and the ordinal error given ``z`` is ``N(rho z, 1 - rho^2)``.  Category ``c``
occupies the latent interval ``(tau_{c-1}, tau_c]`` with
``tau = (-inf, 0, mu1, inf)``, so

    f(d, c) = phi(z) / (d sigma) * [Phi(h_c) - Phi(h_{c-1})],
    h_k = (tau_k - beta.x - rho z) / sqrt(1 - rho^2).

Everything is evaluated in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError

LOG_FLOOR = math.log(1e-300)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class ParameterVector:
    """Duration coefficients ``gamma``, ordinal coefficients ``beta``,
    duration error scale ``sigma``, upper threshold ``mu1`` (the lower one
    is fixed at 0) and error correlation ``rho``."""

    gamma: np.ndarray
    beta: np.ndarray
    sigma: float
    mu1: float
    rho: float

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=float, ndmin=1)
        beta = np.array(self.beta, dtype=float, ndmin=1)
        gamma.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "mu1", float(self.mu1))
        object.__setattr__(self, "rho", float(self.rho))
        if not (np.isfinite(gamma).all() and np.isfinite(beta).all()):
            raise DomainError("coefficients must be finite")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if not (self.mu1 > 0 and math.isfinite(self.mu1)):
            raise DomainError(f"mu1 must exceed the fixed lower threshold 0, got {self.mu1}")
        if not abs(self.rho) < 1:
            raise DomainError(f"rho must lie in (-1, 1), got {self.rho}")

    @property
    def n_params(self) -> int:
        return self.gamma.size + self.beta.size + 3

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.gamma, self.beta, [self.sigma, self.mu1, self.rho]])

    @classmethod
    def from_array(cls, values, p: int, q: int) -> "ParameterVector":
        values = np.asarray(values, dtype=float)
        if values.shape != (p + q + 3,):
            raise DomainError(f"expected {p + q + 3} parameters, got shape {values.shape}")
        return cls(values[:p], values[p:p + q], values[p + q], values[p + q + 1], values[p + q + 2])

    def __eq__(self, other):
        if not isinstance(other, ParameterVector):
            return NotImplemented
        return (self.gamma.shape == other.gamma.shape and self.beta.shape == other.beta.shape
                and np.array_equal(self.to_array(), other.to_array()))

    def __repr__(self):
        return (f"ParameterVector(gamma={self.gamma.tolist()}, beta={self.beta.tolist()}, "
                f"sigma={self.sigma!r}, mu1={self.mu1!r}, rho={self.rho!r})")


@dataclass(frozen=True, eq=False)
class LikelihoodValue:
    log_likelihood: float
    per_observation_log_densities: np.ndarray
    floored: np.ndarray

    @property
    def n_floored(self) -> int:
        return int(self.floored.sum())


def std_normal_pdf(t):
    """Standard normal density."""
    t = np.asarray(t, dtype=float)
    out = np.exp(-0.5 * t * t - _LOG_SQRT_2PI)
    return float(out) if out.ndim == 0 else out


def std_normal_cdf(t):
    """Standard normal distribution function.

    Backed by :func:`scipy.special.ndtr`, which is accurate to a few ulp
    across the real line and saturates monotonically to 0 and 1.
    """
    out = special.ndtr(np.asarray(t, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def _log_std_normal_pdf(t):
    return -0.5 * t * t - _LOG_SQRT_2PI


def _log_interval_prob(upper, lower):
    """log(Phi(upper) - Phi(lower)) for arrays with ``upper >= lower``.

    Infinite endpoints are allowed.  The difference is taken on whichever
    side of zero keeps both terms small, and in log space so that deep
    tails do not underflow.
    """
    upper = np.asarray(upper, dtype=float)
    lower = np.asarray(lower, dtype=float)
    # mirror so that the interval lies mostly below zero: Phi(u)-Phi(l) = Phi(-l)-Phi(-u)
    flip = (upper + lower) > 0
    hi = np.where(flip, -lower, upper)
    lo = np.where(flip, -upper, lower)
    log_hi = special.log_ndtr(hi)
    log_lo = special.log_ndtr(lo)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = log_hi + np.log1p(-np.exp(log_lo - log_hi))
    return out


def _bounds(X_beta, mu1, cats):
    """Latent interval endpoints (relative to the linear index) per row."""
    tau = np.array([-np.inf, 0.0, mu1, np.inf])
    return tau[cats] - X_beta, tau[cats - 1] - X_beta


def _kernel(log_d, cats, Yg, Xb, theta: ParameterVector, with_grad=False):
    sigma, mu1, rho = theta.sigma, theta.mu1, theta.rho
    s = math.sqrt((1.0 - rho) * (1.0 + rho))
    z = (log_d - Yg) / sigma
    up_t, lo_t = _bounds(Xb, mu1, cats)
    h_up = (up_t - rho * z) / s
    h_lo = (lo_t - rho * z) / s
    log_p = _log_interval_prob(h_up, h_lo)
    floored = ~(log_p >= LOG_FLOOR)
    log_p = np.where(floored, LOG_FLOOR, log_p)
    log_f = -log_d - math.log(sigma) + _log_std_normal_pdf(z) + log_p
    if not with_grad:
        return log_f, floored, None

    # phi(h)/P at each finite endpoint; zero at infinite ones
    with np.errstate(over="ignore", invalid="ignore"):
        r_up = np.where(np.isfinite(h_up), np.exp(_log_std_normal_pdf(h_up) - log_p), 0.0)
        r_lo = np.where(np.isfinite(h_lo), np.exp(_log_std_normal_pdf(h_lo) - log_p), 0.0)
    r_up = np.where(floored, 0.0, r_up)
    r_lo = np.where(floored, 0.0, r_lo)
    hz_up = np.where(np.isfinite(h_up), h_up, 0.0)
    hz_lo = np.where(np.isfinite(h_lo), h_lo, 0.0)
    # d log P / d(argument) where each h depends on (linear index, z, mu1, rho)
    dlogp_dxb = -(r_up - r_lo) / s
    dlogp_dz = -rho * (r_up - r_lo) / s
    dlogp_dmu = (r_up * (cats == 2) + (-r_lo) * (cats == 3)) / s
    dlogp_drho = (r_up * (-z / s + rho * hz_up / s**2)
                  - r_lo * (-z / s + rho * hz_lo / s**2))
    dlogf_dz = -z + dlogp_dz
    parts = {
        "yg": dlogf_dz * (-1.0 / sigma),       # d/d(gamma.y)
        "xb": dlogp_dxb,                       # d/d(beta.x)
        "sigma": -1.0 / sigma + dlogf_dz * (-z / sigma),
        "mu1": dlogp_dmu,
        "rho": dlogp_drho,
    }
    return log_f, floored, parts


def _check_shapes(Y, X, theta, cats=None):
    if cats is not None:
        bad = np.flatnonzero((cats < 1) | (cats > 3))
        if bad.size:
            raise DomainError(f"travel_category outside 1..3 at observation index {int(bad[0])}")
    if Y.shape[1] != theta.gamma.size or X.shape[1] != theta.beta.size:
        raise DomainError(f"parameter sizes ({theta.gamma.size}, {theta.beta.size}) do not match "
                          f"design widths ({Y.shape[1]}, {X.shape[1]})")


def joint_log_density(obs, theta: ParameterVector, y_row, x_row) -> float:
    """Log joint density of one observation's departure time and category.

    Parameters
    ----------
    obs : Observation
        Supplies ``departure_hours`` and ``travel_category``.
    theta : ParameterVector
    y_row, x_row : array_like
        Duration and ordinal design rows for this observation.
    """
    y_row = np.asarray(y_row, dtype=float).reshape(1, -1)
    x_row = np.asarray(x_row, dtype=float).reshape(1, -1)
    _check_shapes(y_row, x_row, theta)
    if not obs.departure_hours > 0:
        raise DomainError("departure_hours must be positive")
    if obs.travel_category not in (1, 2, 3):
        raise DomainError(f"travel_category must be 1, 2 or 3, got {obs.travel_category}")
    log_f, _, _ = _kernel(np.array([math.log(obs.departure_hours)]),
                          np.array([obs.travel_category]),
                          y_row @ theta.gamma, x_row @ theta.beta, theta)
    return float(log_f[0])


def log_densities(data, theta: ParameterVector) -> tuple[np.ndarray, np.ndarray]:
    """Per-observation log densities and underflow flags for a dataset."""
    _check_shapes(data.Y, data.X, theta, data.categories)
    log_f, floored, _ = _kernel(data.log_d, data.categories,
                                data.Y @ theta.gamma, data.X @ theta.beta, theta)
    return log_f, floored


def total_log_likelihood(data, theta: ParameterVector) -> LikelihoodValue:
    """Sum of joint log densities over the dataset.

    The reduction uses :func:`math.fsum`, so the total is exactly rounded
    and independent of row order.
    """
    log_f, floored = log_densities(data, theta)
    bad = np.flatnonzero(~np.isfinite(log_f))
    if bad.size:
        raise DomainError(f"non-finite log density at observation index {int(bad[0])}")
    log_f.setflags(write=False)
    return LikelihoodValue(math.fsum(log_f), log_f, floored)


def gradient_original(data, theta: ParameterVector) -> np.ndarray:
    """Analytic gradient of the log-likelihood in ``(gamma, beta, sigma, mu1, rho)``."""
    _check_shapes(data.Y, data.X, theta, data.categories)
    _, _, parts = _kernel(data.log_d, data.categories,
                          data.Y @ theta.gamma, data.X @ theta.beta, theta, with_grad=True)
    return np.concatenate([
        data.Y.T @ parts["yg"],
        data.X.T @ parts["xb"],
        [parts["sigma"].sum(), parts["mu1"].sum(), parts["rho"].sum()],
    ])


def log_likelihood_gradient(data, theta: ParameterVector) -> np.ndarray:
    """Gradient of the log-likelihood in the unconstrained coordinates
    ``(gamma, beta, ln sigma, ln mu1, atanh rho)``."""
    g = gradient_original(data, theta)
    g[-3] *= theta.sigma
    g[-2] *= theta.mu1
    g[-1] *= (1.0 - theta.rho) * (1.0 + theta.rho)
    return g
