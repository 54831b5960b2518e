"""Full-information maximum likelihood for the joint duration/ordinal model.

The log-likelihood is maximized with BFGS in the unconstrained coordinates
``(gamma, beta, ln sigma, ln mu1, atanh rho)``.  Standard errors come from
the inverse of a central-difference Hessian taken in the original
coordinates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, special

from .errors import ConvergenceError, DataError, DomainError
from .likelihood import (ParameterVector, gradient_original, log_densities,
                         total_log_likelihood)
from .model import INTERCEPT, Dataset, EstimationSettings, ModelSpec

log = logging.getLogger(__name__)

ANCILLARY = ("sigma", "mu1", "rho")


def reparameterize(theta: ParameterVector) -> np.ndarray:
    """Map ``theta`` to ``(gamma, beta, ln sigma, ln mu1, atanh rho)``."""
    if not (theta.sigma > 0 and theta.mu1 > 0 and abs(theta.rho) < 1):
        raise DomainError("theta lies on the boundary of the parameter space")
    return np.concatenate([theta.gamma, theta.beta,
                           [math.log(theta.sigma), math.log(theta.mu1), math.atanh(theta.rho)]])


def inverse_reparameterize(u, p: int, q: int) -> ParameterVector:
    """Inverse of :func:`reparameterize`."""
    u = np.asarray(u, dtype=float)
    return ParameterVector(u[:p], u[p:p + q], math.exp(u[p + q]), math.exp(u[p + q + 1]),
                           math.tanh(u[p + q + 2]))


@dataclass
class StartTrace:
    index: int
    converged: bool
    log_likelihood: float
    iterations: int
    grad_norm: float
    reason: str


@dataclass
class ConvergenceInfo:
    converged: bool
    iterations: int
    grad_norm: float
    best_start: int
    reason: str
    traces: list[StartTrace] = field(default_factory=list)


@dataclass
class HessianResult:
    """Inverse-Hessian standard errors plus curvature diagnostics.

    ``std_errors`` and ``covariance`` are ``None`` when the Hessian of the
    negative log-likelihood is not positive definite.
    """

    std_errors: np.ndarray | None
    covariance: np.ndarray | None
    hessian: np.ndarray
    condition_number: float
    min_eigenvalue: float

    @property
    def positive_definite(self) -> bool:
        return self.std_errors is not None


@dataclass
class EstimationResult:
    theta_hat: ParameterVector
    std_errors: np.ndarray | None
    t_stats: np.ndarray | None
    ll_converged: float
    ll_restricted: float
    n_obs: int
    n_params_adjustment: int
    convergence: ConvergenceInfo
    diagnostics: dict
    duration_columns: tuple[str, ...]
    ordinal_columns: tuple[str, ...]
    theta_restricted: ParameterVector | None = None
    covariance: np.ndarray | None = None

    @property
    def parameter_names(self) -> list[tuple[str, str]]:
        """``(block, name)`` pairs aligned with ``theta_hat.to_array()``."""
        return ([("duration", c) for c in self.duration_columns]
                + [("ordinal", c) for c in self.ordinal_columns]
                + [("ancillary", a) for a in ANCILLARY])


def _objective(data: Dataset, p: int, q: int, fixed: np.ndarray | None, u_full: np.ndarray):
    """Negative log-likelihood and its gradient over the free coordinates."""
    free = np.ones(p + q + 3, bool) if fixed is None else ~fixed

    def fun(u_free):
        u = u_full.copy()
        u[free] = u_free
        try:
            theta = inverse_reparameterize(u, p, q)
        except (DomainError, OverflowError):
            return math.inf, np.zeros(free.sum())
        log_f, _ = log_densities(data, theta)
        if not np.isfinite(log_f).all():
            return math.inf, np.zeros(free.sum())
        g = gradient_original(data, theta)
        g[-3] *= theta.sigma
        g[-2] *= theta.mu1
        g[-1] *= (1.0 - theta.rho) * (1.0 + theta.rho)
        return -math.fsum(log_f), -g[free]

    return fun, free


def _maximize(data: Dataset, u0: np.ndarray, settings: EstimationSettings, index: int,
              fixed: np.ndarray | None = None):
    p, q = data.Y.shape[1], data.X.shape[1]
    fun, free = _objective(data, p, q, fixed, u0)
    history: list[float] = []

    def callback(intermediate_result):
        history.append(intermediate_result.fun)

    f0, _ = fun(u0[free])
    if not math.isfinite(f0):
        return None, StartTrace(index, False, -math.inf, 0, math.inf, "non-finite start")
    n_free = int(free.sum())
    res = optimize.minimize(
        fun, u0[free], jac=True, method="BFGS", callback=callback,
        options={"gtol": settings.gtol, "maxiter": settings.max_iter,
                 "hess_inv0": np.eye(n_free) / max(1, data.n_obs)})
    x, f, g = _newton_polish(fun, res.x, settings.gtol)
    u = u0.copy()
    u[free] = x
    grad_norm = float(np.max(np.abs(g))) if n_free else 0.0
    # the relative-change rule only accepts runs that stop short of gtol
    w = settings.ftol_window
    tail = history[-(w + 1):]
    stalled = len(tail) == w + 1 and all(
        abs(a - b) <= settings.ftol * max(1.0, abs(b)) for a, b in zip(tail, tail[1:]))
    if grad_norm < settings.gtol:
        converged, reason = True, "gradient norm"
    elif stalled and res.status != 1:
        converged, reason = True, "relative log-likelihood change"
    else:
        converged, reason = False, str(res.message)
    trace = StartTrace(index, converged, -f, int(res.nit), grad_norm, reason)
    log.debug("start %d: %s", index, trace)
    return u, trace


def _newton_polish(fun, x, gtol, max_steps=5):
    """Newton steps with a finite-difference Hessian of the analytic gradient.

    BFGS line searches stall once objective differences reach rounding
    level, which for large samples happens before ``gtol``.  A step is
    kept only if it lowers the gradient norm without raising the objective
    beyond rounding.
    """
    f, g = fun(x)
    for _ in range(max_steps):
        gn = np.max(np.abs(g)) if g.size else 0.0
        if gn < gtol or not math.isfinite(f):
            break
        h = 1e-5 * np.maximum(1.0, np.abs(x))
        H = np.empty((x.size, x.size))
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = h[i]
            H[:, i] = (fun(x + e)[1] - fun(x - e)[1]) / (2 * h[i])
        H = 0.5 * (H + H.T)
        try:
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.linalg.eigvalsh(H) > 0):
            break
        f_new, g_new = fun(x + step)
        if not (f_new <= f + 1e-12 * max(1.0, abs(f)) and np.max(np.abs(g_new)) < gn):
            break
        x, f, g = x + step, f_new, g_new
    return x, f, g


def heuristic_start(data: Dataset) -> ParameterVector:
    """Least squares for the duration equation and category shares for the
    ordinal intercept and threshold; slopes of the ordinal equation and the
    correlation start at zero.

    When both equations carry intercepts and the slopes are held at zero,
    this is the exact restricted maximum.
    """
    counts = data.category_counts()
    share = counts / counts.sum()
    gamma, *_ = np.linalg.lstsq(data.Y, data.log_d, rcond=None)
    resid = data.log_d - data.Y @ gamma
    sigma = max(float(np.sqrt(np.mean(resid**2))), 1e-3)
    beta = np.zeros(data.X.shape[1])
    lower = float(special.ndtri(np.clip(share[0], 1e-6, 1 - 1e-6)))
    upper = float(special.ndtri(np.clip(share[0] + share[1], 1e-6, 1 - 1e-6)))
    if INTERCEPT in data.ordinal_columns:
        beta[data.ordinal_columns.index(INTERCEPT)] = -lower
        mu1 = upper - lower
    else:
        mu1 = upper
    return ParameterVector(gamma, beta, sigma, max(mu1, 0.05), 0.0)


def restricted_start(data: Dataset) -> ParameterVector:
    """Starting point with slopes and correlation at zero."""
    p = data.Y.shape[1]
    gamma = np.zeros(p)
    if INTERCEPT in data.duration_columns:
        gamma[data.duration_columns.index(INTERCEPT)] = float(np.mean(data.log_d))
    sigma = max(float(np.sqrt(np.mean((data.log_d - data.Y @ gamma) ** 2))), 1e-3)
    h = heuristic_start(data)
    beta = np.zeros(data.X.shape[1])
    if INTERCEPT in data.ordinal_columns:
        k = data.ordinal_columns.index(INTERCEPT)
        beta[k] = h.beta[k]
    return ParameterVector(gamma, beta, sigma, h.mu1, 0.0)


def _restricted_mask(data: Dataset) -> np.ndarray:
    """True for coordinates held fixed (slopes and rho) in the restricted model."""
    fixed = np.array([c != INTERCEPT for c in data.duration_columns]
                     + [c != INTERCEPT for c in data.ordinal_columns]
                     + [False, False, True])
    return fixed


def _validate(data: Dataset):
    p, q = data.Y.shape[1], data.X.shape[1]
    if data.n_obs < p + q + 3:
        raise DataError(f"{data.n_obs} observations cannot identify {p + q + 3} parameters")
    counts = data.category_counts()
    if counts.size != 3 or (counts == 0).any():
        missing = [i + 1 for i, c in enumerate(counts[:3]) if c == 0]
        raise DataError(f"travel-time categories {missing} have no observations")


def fit_restricted(data: Dataset, settings: EstimationSettings = EstimationSettings()):
    """Maximize with slopes and correlation fixed at zero.

    Returns ``(theta, log_likelihood, n_fixed)`` where ``n_fixed`` is the
    number of zeroed parameters.
    """
    _validate(data)
    p, q = data.Y.shape[1], data.X.shape[1]
    fixed = _restricted_mask(data)
    u0 = reparameterize(restricted_start(data))
    u, trace = _maximize(data, u0, settings, 0, fixed=fixed)
    if u is None or not trace.converged:
        raise ConvergenceError("restricted model did not converge", [trace])
    theta = inverse_reparameterize(u, p, q)
    return theta, total_log_likelihood(data, theta).log_likelihood, int(fixed.sum())


def numerical_hessian(fun: Callable[[np.ndarray], float], x, steps) -> np.ndarray:
    """Central-difference Hessian of a scalar function."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(steps, dtype=float)
    n = x.size
    f0 = fun(x)
    H = np.empty((n, n))
    E = np.diag(h)
    for i in range(n):
        H[i, i] = (fun(x + E[i]) - 2.0 * f0 + fun(x - E[i])) / h[i] ** 2
        for j in range(i):
            H[i, j] = H[j, i] = (fun(x + E[i] + E[j]) - fun(x + E[i] - E[j])
                                 - fun(x - E[i] + E[j]) + fun(x - E[i] - E[j])) / (4 * h[i] * h[j])
    return H


def hessian_standard_errors(loglike: Callable[[np.ndarray], float], x,
                            steps=None, rel_step: float = 1e-4) -> HessianResult:
    """Standard errors from the inverse Hessian of ``-loglike`` at ``x``.

    The default step for coordinate ``i`` is ``rel_step * max(1, |x_i|)``.
    """
    x = np.asarray(x, dtype=float)
    if steps is None:
        steps = rel_step * np.maximum(1.0, np.abs(x))
    H = -numerical_hessian(loglike, x, steps)
    H = 0.5 * (H + H.T)
    eig = np.linalg.eigvalsh(H)
    min_eig = float(eig[0])
    cond = float(eig[-1] / eig[0]) if eig[0] > 0 else math.inf
    if min_eig <= 0 or not np.isfinite(H).all():
        return HessianResult(None, None, H, cond, min_eig)
    cov = np.linalg.inv(H)
    cov = 0.5 * (cov + cov.T)
    return HessianResult(np.sqrt(np.diag(cov)), cov, H, cond, min_eig)


def standard_errors(data: Dataset, theta_hat: ParameterVector,
                    rel_step: float = 1e-4) -> HessianResult:
    """Inverse-Hessian standard errors in ``(gamma, beta, sigma, mu1, rho)``."""
    p, q = theta_hat.gamma.size, theta_hat.beta.size
    x = theta_hat.to_array()
    steps = rel_step * np.maximum(1.0, np.abs(x))
    # keep every probe strictly inside the parameter space
    steps[-3] = min(steps[-3], 0.5 * theta_hat.sigma)
    steps[-2] = min(steps[-2], 0.5 * theta_hat.mu1)
    steps[-1] = min(steps[-1], 0.5 * (1.0 - abs(theta_hat.rho)))

    def loglike(v):
        return total_log_likelihood(data, ParameterVector.from_array(v, p, q)).log_likelihood

    return hessian_standard_errors(loglike, x, steps)


def estimate(data: Dataset, spec: ModelSpec | None = None,
             settings: EstimationSettings | None = None) -> EstimationResult:
    """Fit the joint model by multi-start BFGS.

    Start 0 is :func:`heuristic_start`; starts ``1..n_starts-1`` add
    Gaussian noise (``settings.perturbation_scale``) to it in the
    unconstrained coordinates, drawn from one generator seeded with
    ``settings.seed``.  The converged start with the highest
    log-likelihood wins; ties go to the lower index.

    Raises
    ------
    DataError
        Too few observations, or a travel-time category is empty.
    ConvergenceError
        No start converged.
    """
    if settings is None:
        settings = spec.estimation if spec is not None else EstimationSettings()
    _validate(data)
    p, q = data.Y.shape[1], data.X.shape[1]
    base = reparameterize(heuristic_start(data))
    rng = np.random.default_rng(settings.seed)
    starts = [base] + [base + rng.normal(0.0, settings.perturbation_scale, base.size)
                       for _ in range(settings.n_starts - 1)]

    best_u, best_ll, best_idx = None, -math.inf, -1
    traces = []
    for i, u0 in enumerate(starts):
        u, trace = _maximize(data, u0, settings, i)
        traces.append(trace)
        if trace.converged and trace.log_likelihood > best_ll:
            best_u, best_ll, best_idx = u, trace.log_likelihood, i
    if best_u is None:
        raise ConvergenceError(f"none of {len(starts)} starts converged", traces)

    theta = inverse_reparameterize(best_u, p, q)
    ll = total_log_likelihood(data, theta)
    theta_r, ll_r, k = fit_restricted(data, settings)
    hess = standard_errors(data, theta)
    coef = theta.to_array()
    t_stats = coef / hess.std_errors if hess.positive_definite else None
    best = traces[best_idx]
    return EstimationResult(
        theta_hat=theta,
        std_errors=hess.std_errors,
        t_stats=t_stats,
        ll_converged=ll.log_likelihood,
        ll_restricted=ll_r,
        n_obs=data.n_obs,
        n_params_adjustment=k,
        convergence=ConvergenceInfo(True, best.iterations, best.grad_norm, best_idx,
                                    best.reason, traces),
        diagnostics={
            "underflow_count": ll.n_floored,
            "hessian_condition_number": hess.condition_number,
            "hessian_min_eigenvalue": hess.min_eigenvalue,
            "hessian_positive_definite": hess.positive_definite,
        },
        duration_columns=data.duration_columns,
        ordinal_columns=data.ordinal_columns,
        theta_restricted=theta_r,
        covariance=hess.covariance,
    )
