"""Reference implementations that share no code with the package."""

import itertools
import math

import numpy as np
from scipy import integrate, stats

CUTS = (-math.inf, 0.0)


def bivariate_pdf(a, e, rho):
    det = 1.0 - rho * rho
    return math.exp(-(a * a - 2 * rho * a * e + e * e) / (2 * det)) / (2 * math.pi * math.sqrt(det))


def joint_density_by_integration(d, category, yg, xb, sigma, mu1, rho):
    """Density of (d, category) by integrating the bivariate normal error
    density over the latent interval of the category."""
    cuts = (-math.inf, 0.0, mu1, math.inf)
    a = (math.log(d) - yg) / sigma
    lo, hi = cuts[category - 1] - xb, cuts[category] - xb
    mass, _ = integrate.quad(lambda e: bivariate_pdf(a, e, rho), lo, hi, epsabs=0.0,
                             epsrel=1e-12)
    return mass / (d * sigma)


def lognormal_aft_loglik(d, yg, sigma):
    return float(np.sum(stats.lognorm.logpdf(d, s=sigma, scale=np.exp(yg))))


def ordered_probit_log_probs(categories, xb, mu1):
    """Per-observation log category probabilities from scipy's tail-accurate
    normal functions."""
    c = np.asarray(categories)
    xb = np.asarray(xb, dtype=float)
    out = np.empty(xb.shape)
    one, three = c == 1, c == 3
    out[one] = stats.norm.logcdf(-xb[one])
    out[three] = stats.norm.logsf(mu1 - xb[three])
    two = c == 2
    lo, hi = -xb[two], mu1 - xb[two]
    # difference of upper tails when the interval sits right of zero
    right = lo > 0
    mass = np.where(right, stats.norm.sf(lo) - stats.norm.sf(hi),
                    stats.norm.cdf(hi) - stats.norm.cdf(lo))
    out[two] = np.log(mass)
    return out


def ordered_probit_loglik(categories, xb, mu1):
    return float(np.sum(ordered_probit_log_probs(categories, xb, mu1)))


def unlike_pairs(labels):
    return sum(1 for a, b in itertools.combinations(labels, 2) if a != b)


def max_unlike_pairs_integer(n, n_categories):
    """Most unlike pairs over every way of spreading ``n`` alters across
    ``n_categories`` labels, by enumeration."""
    return max((n * n - sum(c * c for c in counts)) // 2
               for counts in _compositions(n, n_categories))


def max_unlike_pairs_continuous(n, n_categories):
    return n * n * (n_categories - 1) / (2 * n_categories)


def _compositions(n, k):
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, k - 1):
            yield (first,) + rest
