"""Bayesian belief updates and utility functions shared by the catalog models."""
import numpy as np

from ..errors import PosteriorError


def crra(c, delta):
    """CRRA utility ``c^(1 - delta) / (1 - delta)``, log utility when ``delta == 1``."""
    c = np.asarray(c, dtype=float)
    with np.errstate(divide="ignore"):
        if delta == 1:
            return np.log(c)
        return c ** (1.0 - delta) / (1.0 - delta)


def crra_inverse(u, delta):
    """Consumption level with utility ``u``."""
    u = np.asarray(u, dtype=float)
    if delta == 1:
        return np.exp(u)
    with np.errstate(invalid="ignore", divide="ignore"):
        return ((1.0 - delta) * u) ** (1.0 / (1.0 - delta))


def belief_update_two_density(pi, f_val, g_val):
    """Posterior weight on density ``f`` after observing an offer.

    ``pi' = pi f / (pi f + (1 - pi) g)``. Raises when both likelihoods
    vanish, where the posterior is undefined.
    """
    pi = np.asarray(pi, dtype=float)
    f_val = np.asarray(f_val, dtype=float)
    g_val = np.asarray(g_val, dtype=float)
    if np.any((pi < 0) | (pi > 1)):
        raise PosteriorError("prior probability must lie in [0, 1]")
    den = pi * f_val + (1.0 - pi) * g_val
    if np.any(den <= 0):
        raise PosteriorError("posterior undefined: zero predictive density")
    return pi * f_val / den


def posterior_update_normal(mu, gamma, gamma_eps, ln_w):
    """Normal-normal update of the mean of log offers.

    Returns ``(mu', gamma')`` with ``gamma' = (1/gamma + 1/gamma_eps)^-1``
    and ``mu' = gamma' (mu/gamma + ln_w/gamma_eps)``.
    """
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma <= 0) or gamma_eps <= 0:
        raise PosteriorError("variances must be positive")
    gamma_new = 1.0 / (1.0 / gamma + 1.0 / gamma_eps)
    mu_new = gamma_new * (np.asarray(mu, dtype=float) / gamma + np.asarray(ln_w, dtype=float) / gamma_eps)
    return mu_new, gamma_new


def posterior_update_signal(mu, gamma, rho, gamma_xi, gamma_y, y):
    """Update a normal prior from a signal ``y ~ N(rho mu, rho^2 gamma + gamma_xi + gamma_y)``.

    ``gamma' = (1/gamma + rho^2 / (gamma_xi + gamma_y))^-1`` and
    ``mu' = gamma' (mu/gamma + rho y / (gamma_xi + gamma_y))``. With
    ``rho = 0`` the signal is uninformative and the prior is returned.
    """
    gamma = np.asarray(gamma, dtype=float)
    noise = gamma_xi + gamma_y
    if np.any(gamma <= 0) or noise <= 0:
        raise PosteriorError("variances must be positive")
    gamma_new = 1.0 / (1.0 / gamma + rho ** 2 / noise)
    mu_new = gamma_new * (np.asarray(mu, dtype=float) / gamma + rho * np.asarray(y, dtype=float) / noise)
    return mu_new, gamma_new
