"""Catalog of optimal stopping models with default calibrations and drift certificates.

Every entry builds a ``DecisionModel`` on the full state, an optional
``ThresholdModel`` view, a drift certificate, default grid axes and a
default integrator. Parameters not pinned down by the reference
calibrations are marked ``"package choice"`` in ``provenance``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import log_ndtr, ndtr
from scipy.stats import beta as beta_dist

from ..core import DecisionModel, Grid, StateSpace, make_grid
from ..errors import CertificateError, ConfigError
from ..integrate import IntegratorSpec
from ..threshold import ThresholdModel
from ..weights import DriftCertificate
from .beliefs import (belief_update_two_density, crra, crra_inverse, posterior_update_normal,
                      posterior_update_signal)

REF = "reference calibration"
OWN = "package choice"
MAX_HORIZON = 64


@dataclass(frozen=True)
class GridAxis:
    lower: float
    upper: float
    count: int
    scaling: str = "uniform"

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "count": self.count, "scaling": self.scaling}


@dataclass(frozen=True, eq=False)
class BuiltModel:
    """A catalog model instantiated at concrete parameters."""

    id: str
    params: dict
    model: DecisionModel
    certificate: DriftCertificate
    axes: dict
    integrator: IntegratorSpec
    test_states: np.ndarray
    threshold: Optional[ThresholdModel] = None

    @property
    def names(self) -> tuple:
        return self.model.state_space.names

    def cvi_dims(self) -> tuple:
        return self.threshold.env_dims if self.threshold is not None else tuple(range(self.model.dim))

    def vfi_dims(self) -> tuple:
        return tuple(range(self.model.dim))

    def grid(self, which: str = "cvi", axes: Optional[dict] = None) -> Grid:
        """Tensor grid for continuation-value (``"cvi"``) or value (``"vfi"``) iteration."""
        dims = self.cvi_dims() if which == "cvi" else self.vfi_dims()
        merged = dict(self.axes)
        merged.update(axes or {})
        names = [self.names[i] for i in dims]
        missing = [n for n in names if n not in merged]
        if missing:
            raise ConfigError(f"no grid axis for coordinates {missing}")
        ax = [merged[n] for n in names]
        box = StateSpace(tuple(a.lower for a in ax), tuple(a.upper for a in ax), names=tuple(names))
        return make_grid(box, [a.count for a in ax], [a.scaling for a in ax], dims=dims)


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    title: str
    defaults: dict
    provenance: dict
    builder: Callable

    def describe(self) -> dict:
        built = build_model(self.id)
        params = {k: {"value": v, "source": self.provenance.get(k, OWN)} for k, v in self.defaults.items()}
        out = {
            "id": self.id,
            "title": self.title,
            "coordinates": list(built.names),
            "params": params,
            "grid": {k: a.to_dict() for k, a in built.axes.items()},
            "integrator": built.integrator.to_dict(),
            "certificate": built.certificate.describe(),
            "test_states": built.test_states.tolist(),
        }
        if built.threshold is not None:
            out["threshold"] = {"coordinate": built.threshold.x_name,
                                "direction": built.threshold.direction,
                                "bracket": list(built.threshold.x_bracket)}
        return out


# ---------------------------------------------------------------- helpers

def _full(z, value):
    return np.full(np.shape(z)[:-1], float(value))


def _first_horizon(factor: Callable[[int], float], beta: float, what: str) -> int:
    """Smallest ``n <= 64`` with ``beta * factor(n) < 1``."""
    for n in range(MAX_HORIZON + 1):
        if beta * factor(n) < 1.0:
            return n
    raise CertificateError(f"no horizon n <= {MAX_HORIZON} satisfies the drift condition for {what}")


def _geometric_sums(rho, n):
    """``sum_{j<n} rho^j`` and ``sum_{j<n} rho^(2j)``."""
    j = np.arange(n)
    return float(np.sum(rho ** j)), float(np.sum(rho ** (2 * j)))


def _ar1(rho, b, sigma):
    def sampler(z, e):
        return rho * z + b + sigma * e
    return sampler


def _ar1_density(rho, b, sigma):
    def density(zn, z):
        u = (zn[..., 0] - rho * z[..., 0] - b) / sigma
        return np.exp(-0.5 * u ** 2) / (sigma * np.sqrt(2 * np.pi))
    return density


def _states(*rows):
    return np.array(rows, dtype=float)


# ---------------------------------------------------------------- bounded job search

def _build_js_bounded(p):
    beta, c0, w_max = p["beta"], p["c0"], p["w_max"]
    space = StateSpace((0.0,), (w_max,), names=("w",))
    model = DecisionModel(
        beta=beta,
        exit_payoff=lambda z: z[..., 0] / (1 - beta),
        flow_payoff=lambda z: _full(z, c0),
        shock_sampler=lambda z, e: np.broadcast_to(w_max * e, np.broadcast_shapes(z.shape, e.shape)),
        state_space=space,
        shock_laws=("uniform",),
        kernel_density=lambda zn, z: np.where((zn[..., 0] >= 0) & (zn[..., 0] <= w_max), 1.0 / w_max, 0.0),
        name="js_bounded",
    )
    bound = max(w_max / (1 - beta), abs(c0))
    cert = DriftCertificate(g=lambda z: _full(z, bound), n=0, m=1.0, d=0.0, label="bounded payoffs")
    return BuiltModel("js_bounded", p, model, cert, {"w": GridAxis(0.0, w_max, 100)},
                      IntegratorSpec("grid_quadrature", order=100),
                      _states([0.0], [0.5 * w_max], [w_max]))


# ---------------------------------------------------------------- Markov job search with CRRA utility

def _build_js_markov_crra(p):
    beta, rho, b, sigma, delta, c0 = (p[k] for k in ("beta", "rho", "b", "sigma", "delta", "c0"))
    if sigma <= 0:
        raise ConfigError("sigma must be positive")
    space = StateSpace((-np.inf,), (np.inf,), names=("z",))
    model = DecisionModel(
        beta=beta,
        exit_payoff=lambda z: crra(np.exp(z[..., 0]), delta) / (1 - beta),
        flow_payoff=lambda z: _full(z, c0),
        shock_sampler=_ar1(rho, b, sigma),
        state_space=space,
        shock_laws=("normal",),
        kernel_density=_ar1_density(rho, b, sigma),
        name="js_markov_crra",
    )
    if delta == 1:
        m = abs(rho) if rho != 0 else 1e-12
        if not beta * m < 1:
            raise CertificateError(f"need beta * |rho| < 1, got {beta * abs(rho)}")
        cert = DriftCertificate(g=lambda z: np.abs(z[..., 0]), n=0, m=m, d=sigma + abs(b),
                                payoff_scale=(1 / (1 - beta), 0.0, 0.0, abs(c0)), label="log utility")
    else:
        k = 1 - delta
        xi = abs(k * b) + k ** 2 * sigma ** 2 / 2
        n = _first_horizon(lambda n: np.exp(abs(rho ** n) * xi), beta, "js_markov_crra")
        rn = rho ** n
        s1, s2 = _geometric_sums(rho, n)
        a1 = np.exp(k * b * s1 + k ** 2 * sigma ** 2 * s2 / 2) / ((1 - beta) * abs(k))
        mm = float(np.exp(abs(rn) * xi))
        cert = DriftCertificate(g=lambda z: np.exp(rn * k * z[..., 0]) + np.exp(-rn * k * z[..., 0]),
                                n=n, m=mm, d=mm, payoff_scale=(a1, 0.0, 0.0, abs(c0)),
                                label="CRRA utility")
    return BuiltModel("js_markov_crra", p, model, cert, {"z": GridAxis(-10.0, 10.0, 200)},
                      IntegratorSpec("monte_carlo", draws=1000),
                      _states([-8.0], [-3.0], [0.0], [3.0], [8.0]))


# ---------------------------------------------------------------- job search with learning about the offer mean

def _build_js_learning_normal(p):
    beta, gamma_eps, c0_tilde, delta = (p[k] for k in ("beta", "gamma_eps", "c0_tilde", "delta"))
    c0 = float(crra(c0_tilde, delta))

    def sampler(z, e):
        mu, gamma = z[..., 1], z[..., 2]
        ln_w = mu + np.sqrt(gamma + gamma_eps) * e[..., 0]
        mu_n, gamma_n = posterior_update_normal(mu, gamma, gamma_eps, ln_w)
        return np.stack(np.broadcast_arrays(np.exp(ln_w), mu_n, gamma_n), axis=-1)

    def grad(z):
        out = np.zeros(np.shape(z))
        out[..., 0] = z[..., 0] ** (-delta) / (1 - beta)
        return out

    space = StateSpace((0.0, -np.inf, 0.0), (np.inf, np.inf, np.inf), names=("w", "mu", "gamma"),
                       open_flags=(True, True, True))
    model = DecisionModel(
        beta=beta,
        exit_payoff=lambda z: crra(z[..., 0], delta) / (1 - beta),
        flow_payoff=lambda z: _full(z, c0),
        shock_sampler=sampler,
        state_space=space,
        shock_laws=("normal",),
        exit_payoff_grad=grad,
        anchor=(1.0, 0.0, 1.0),
        name="js_learning_normal",
    )
    k = 1 - delta
    if delta == 1:
        g = lambda z: np.exp(-z[..., 1] + z[..., 2] / 2) + np.exp(z[..., 1] + z[..., 2] / 2)
        a1 = np.exp(gamma_eps / 2) / (1 - beta)
    else:
        g = lambda z: np.exp(k * z[..., 1] + k ** 2 * z[..., 2] / 2)
        a1 = np.exp(k ** 2 * gamma_eps / 2) / ((1 - beta) * abs(k))
    cert = DriftCertificate(g=g, n=1, m=1.0, d=0.0, payoff_scale=(a1, 0.0, 0.0, abs(c0)),
                            label="lognormal offers with unknown mean")
    tm = ThresholdModel(model, threshold_dim=0, direction="increasing", x_bracket=(0.1, 5.0))
    axes = {"w": GridAxis(0.05, 20.0, 100, "log"), "mu": GridAxis(-10.0, 10.0, 200),
            "gamma": GridAxis(1e-4, 10.0, 100)}
    return BuiltModel("js_learning_normal", p, model, cert, axes, IntegratorSpec("monte_carlo", draws=1000),
                      _states([1.0, 0.0, 0.5], [1.0, 1.0, 0.2], [1.0, -1.0, 1.0]), tm)


# ---------------------------------------------------------------- job search with two candidate offer densities

def _two_density_parts(p):
    w_max = p["w_max"]
    f = beta_dist(p["f_a"], p["f_b"])
    g = beta_dist(p["g_a"], p["g_b"])

    def f_pdf(w):
        return f.pdf(w / w_max) / w_max

    def g_pdf(w):
        return g.pdf(w / w_max) / w_max

    return f_pdf, g_pdf


def _build_js_two_density(p):
    beta, c0, w_max = p["beta"], p["c0"], p["w_max"]
    f_pdf, g_pdf = _two_density_parts(p)

    def sampler(z, e):
        w_new = w_max * e[..., 0]
        pi = z[..., 1]
        pi_new = belief_update_two_density(pi, f_pdf(w_new), g_pdf(w_new))
        return np.stack(np.broadcast_arrays(w_new, pi_new), axis=-1)

    def weight(z, e):
        w_new = w_max * e[..., 0]
        pi = z[..., 1]
        return pi * f_pdf(w_new) + (1 - pi) * g_pdf(w_new)

    def grad(z):
        out = np.zeros(np.shape(z))
        out[..., 0] = 1 / (1 - beta)
        return out

    space = StateSpace((0.0, 0.0), (w_max, 1.0), names=("w", "pi"))
    model = DecisionModel(
        beta=beta,
        exit_payoff=lambda z: z[..., 0] / (1 - beta),
        flow_payoff=lambda z: _full(z, c0),
        shock_sampler=sampler,
        state_space=space,
        shock_laws=("uniform",),
        shock_weight=weight,
        exit_payoff_grad=grad,
        anchor=(0.5 * w_max, 0.5),
        name="js_two_density",
    )
    bound = max(w_max / (1 - beta), abs(c0))
    cert = DriftCertificate(g=lambda z: _full(z, bound), n=0, m=1.0, d=0.0, label="bounded payoffs")
    tm = ThresholdModel(model, threshold_dim=0, direction="increasing", x_bracket=(0.0, w_max))
    axes = {"w": GridAxis(0.0, w_max, 100), "pi": GridAxis(1e-4, 1 - 1e-4, 50)}
    return BuiltModel("js_two_density", p, model, cert, axes, IntegratorSpec("grid_quadrature", order=100),
                      _states([1.0, 0.1], [1.0, 0.5], [1.0, 0.9]), tm)


# ---------------------------------------------------------------- American option

def _build_option_american(p):
    rate, strike, rho, b, sigma = (p[k] for k in ("rate", "strike", "rho", "b", "sigma"))
    beta = float(np.exp(-rate))
    space = StateSpace((-np.inf,), (np.inf,), names=("z",))
    model = DecisionModel(
        beta=beta,
        exit_payoff=lambda z: np.maximum(np.exp(z[..., 0]) - strike, 0.0),
        flow_payoff=lambda z: _full(z, 0.0),
        shock_sampler=_ar1(rho, b, sigma),
        state_space=space,
        shock_laws=("normal",),
        kernel_density=_ar1_density(rho, b, sigma),
        name="option_american",
    )
    xi = abs(b) + sigma ** 2 / 2
    n = _first_horizon(lambda n: np.exp(abs(rho ** n) * xi), beta, "option_american")
    rn = rho ** n
    s1, s2 = _geometric_sums(rho, n)
    a1 = float(np.exp(b * s1 + sigma ** 2 * s2 / 2))
    mm = float(np.exp(abs(rn) * xi))
    cert = DriftCertificate(g=lambda z: np.exp(rn * z[..., 0]) + np.exp(-rn * z[..., 0]), n=n, m=mm, d=mm,
                            payoff_scale=(a1, 0.0, 0.0, 0.0), label="exponential moments")
    return BuiltModel("option_american", p, model, cert, {"z": GridAxis(-4.0, 4.0, 200)},
                      IntegratorSpec("monte_carlo", draws=1000),
                      _states([-2.0], [0.0], [1.0], [3.0]))


# ---------------------------------------------------------------- research and development search

def _build_rd_search(p):
    beta, theta, c0 = p["beta"], p["theta"], p["c0"]
    if theta <= 0:
        raise ConfigError("theta must be positive")
    space = StateSpace((0.0,), (np.inf,), names=("z",))

    def sampler(z, e):
        # exponential increment through the normal survival function
        return z - log_ndtr(-e) / theta

    def density(zn, z):
        step = zn[..., 0] - z[..., 0]
        return np.where(step >= 0, theta * np.exp(-theta * np.maximum(step, 0.0)), 0.0)

    model = DecisionModel(
        beta=beta,
        exit_payoff=lambda z: z[..., 0].copy(),
        flow_payoff=lambda z: _full(z, -c0),
        shock_sampler=sampler,
        state_space=space,
        shock_laws=("normal",),
        kernel_density=density,
        name="rd_search",
    )
    cert = DriftCertificate(g=lambda z: np.abs(z[..., 0]), n=0, m=1.0, d=1.0 / theta,
                            payoff_scale=(1.0, 0.0, 0.0, abs(c0)), label="linear drift")
    return BuiltModel("rd_search", p, model, cert, {"z": GridAxis(0.0, 10.0, 200)},
                      IntegratorSpec("monte_carlo", draws=1000),
                      _states([0.0], [0.5], [2.0], [5.0]))


# ---------------------------------------------------------------- firm exit

def _firm_scale(p):
    alpha, price, wage = p["alpha"], p["price"], p["wage"]
    return (alpha * price / wage) ** (1 / (1 - alpha)) * (1 - alpha) * wage / alpha


def _build_firm_exit(p):
    beta, rho, b, sigma, c_f, alpha = (p[k] for k in ("beta", "rho", "b", "sigma", "c_f", "alpha"))
    if not 0 < alpha < 1:
        raise ConfigError("alpha must lie in (0, 1)")
    if abs(rho) > 1:
        raise ConfigError("rho must lie in [-1, 1]")
    G = _firm_scale(p)
    k = 1 / (1 - alpha)

    def profit(z):
        return G * np.exp(k * z[..., 0]) - c_f

    space = StateSpace((-np.inf,), (np.inf,), names=("z",))
    model = DecisionModel(beta=beta, exit_payoff=profit, flow_payoff=profit, shock_sampler=_ar1(rho, b, sigma),
                          state_space=space, shock_laws=("normal",), kernel_density=_ar1_density(rho, b, sigma),
                          name="firm_exit")
    if 0 <= rho < 1:
        xi = b * k + sigma ** 2 * k ** 2 / 2
        n = _first_horizon(lambda n: np.exp(rho ** n * xi), beta, "firm_exit")
        rn = rho ** n
        g = lambda z: np.exp(rn * k * z[..., 0])
        mm = float(np.exp(rn * xi))
    else:
        xi = abs(b) * k + sigma ** 2 * k ** 2 / 2
        n = _first_horizon(lambda n: np.exp(abs(rho ** n) * xi), beta, "firm_exit")
        rn = rho ** n
        g = lambda z: np.exp(rn * k * z[..., 0]) + np.exp(-rn * k * z[..., 0])
        mm = float(np.exp(abs(rn) * xi))
    s1, s2 = _geometric_sums(rho, n)
    a1 = G * float(np.exp(k * b * s1 + k ** 2 * sigma ** 2 * s2 / 2))
    cert = DriftCertificate(g=g, n=n, m=mm, d=mm, payoff_scale=(a1, c_f, a1, c_f), label="productivity moments")
    return BuiltModel("firm_exit", p, model, cert, {"z": GridAxis(-5.0, 5.0, 200)},
                      IntegratorSpec("monte_carlo", draws=1000),
                      _states([-3.0], [0.0], [2.0], [4.0]))


# ---------------------------------------------------------------- firm exit with learning about costs

def _build_firm_exit_learning(p):
    beta, rho, b, gamma_p, gamma_eps, h1, h2 = (p[k] for k in
                                                ("beta", "rho", "b", "gamma_p", "gamma_eps", "h1", "h2"))
    if gamma_p <= 0 or gamma_eps <= 0:
        raise ConfigError("gamma_p and gamma_eps must be positive")
    if h1 < 0:
        raise ConfigError("h1 must be nonnegative")

    def sampler(z, e):
        price, mu, gamma = z[..., 0], z[..., 2], z[..., 3]
        p_new = np.exp(rho * np.log(price) + b + np.sqrt(gamma_p) * e[..., 0])
        ln_x = mu + np.sqrt(gamma + gamma_eps) * e[..., 1]
        mu_new, gamma_new = posterior_update_normal(mu, gamma, gamma_eps, ln_x)
        return np.stack(np.broadcast_arrays(p_new, np.exp(ln_x), mu_new, gamma_new), axis=-1)

    space = StateSpace((0.0, 0.0, -np.inf, 0.0), (np.inf,) * 4, names=("p", "x", "mu", "gamma"),
                       open_flags=(True,) * 4)
    model = DecisionModel(
        beta=beta,
        exit_payoff=lambda z: h1 * z[..., 0] ** 2 / z[..., 1] + h2,
        flow_payoff=lambda z: z[..., 0] ** 2 / (4 * z[..., 1]),
        shock_sampler=sampler,
        state_space=space,
        shock_laws=("normal", "normal"),
        anchor=(1.0, 1.0, 0.0, 1.0),
        name="firm_exit_learning",
    )
    xi = 2 * (abs(b) + gamma_p)
    n = max(1, _first_horizon(lambda n: np.exp(abs(rho ** n) * xi), beta, "firm_exit_learning"))
    rn = rho ** n
    mm = float(np.exp(abs(rn) * xi))
    shift = mm / (mm - 1)
    s1, s2 = _geometric_sums(rho, n)
    price_moment = float(np.exp(2 * b * s1 + 2 * gamma_p * s2)) * float(np.exp(gamma_eps / 2))

    def g(z):
        price = z[..., 0]
        return (price ** (2 * rn) + price ** (-2 * rn) + shift) * np.exp(-z[..., 2] + z[..., 3] / 2)

    cert = DriftCertificate(g=g, n=n, m=mm, d=0.0,
                            payoff_scale=(h1 * price_moment, abs(h2), price_moment / 4, 0.0),
                            label="price and cost moments")
    axes = {"p": GridAxis(0.2, 5.0, 8, "log"), "x": GridAxis(0.2, 5.0, 8, "log"),
            "mu": GridAxis(-2.0, 2.0, 10), "gamma": GridAxis(1e-3, 2.0, 6)}
    return BuiltModel("firm_exit_learning", p, model, cert, axes, IntegratorSpec("monte_carlo", draws=500),
                      _states([1.0, 1.0, 0.0, 0.5], [2.0, 0.5, 1.0, 1.0], [0.5, 2.0, -1.0, 0.2]))


# ---------------------------------------------------------------- firm entry with learning

def expected_entry_utility(mu, gamma, a, gamma_x):
    """``E u(x)`` for CARA utility ``(1 - exp(-a x)) / a`` and ``x ~ N(mu, gamma + gamma_x)``."""
    return (1 - np.exp(-a * np.asarray(mu) + a ** 2 * (np.asarray(gamma) + gamma_x) / 2)) / a


def _build_firm_entry(p):
    beta, a, gamma_x, gamma_y, rho, gamma_xi, f_mu, f_gamma = (
        p[k] for k in ("beta", "a", "gamma_x", "gamma_y", "rho", "gamma_xi", "f_mu", "f_gamma"))
    if a <= 0:
        raise ConfigError("risk aversion a must be positive")

    def sampler(z, e):
        mu, gamma = z[..., 1], z[..., 2]
        f_new = np.exp(f_mu + np.sqrt(f_gamma) * e[..., 0])
        y = rho * mu + np.sqrt(rho ** 2 * gamma + gamma_xi + gamma_y) * e[..., 1]
        mu_new, gamma_new = posterior_update_signal(mu, gamma, rho, gamma_xi, gamma_y, y)
        return np.stack(np.broadcast_arrays(f_new, mu_new, gamma_new), axis=-1)

    def exit_payoff(z):
        return expected_entry_utility(z[..., 1], z[..., 2], a, gamma_x) - z[..., 0]

    def grad(z):
        e = np.exp(-a * z[..., 1] + a ** 2 * (z[..., 2] + gamma_x) / 2)
        out = np.empty(np.shape(z))
        out[..., 0] = -1.0
        out[..., 1] = e
        out[..., 2] = -a / 2 * e
        return out

    # the cost coordinate is allowed on the whole line so a reservation cost always exists
    space = StateSpace((-np.inf, -np.inf, 0.0), (np.inf, np.inf, np.inf), names=("f", "mu", "gamma"),
                       open_flags=(True, True, True))
    model = DecisionModel(beta=beta, exit_payoff=exit_payoff, flow_payoff=lambda z: _full(z, 0.0),
                          shock_sampler=sampler, state_space=space, shock_laws=("normal", "normal"),
                          exit_payoff_grad=grad, anchor=(1.0, 0.0, 1.0), name="firm_entry")
    mean_cost = float(np.exp(f_mu + f_gamma / 2))
    cert = DriftCertificate(g=lambda z: np.exp(-a * z[..., 1] + a ** 2 * z[..., 2] / 2), n=1, m=1.0, d=0.0,
                            payoff_scale=(np.exp(a ** 2 * gamma_x / 2) / a, 1 / a + mean_cost, 0.0, 0.0),
                            label="exponential posterior moment")
    tm = ThresholdModel(model, threshold_dim=0, direction="decreasing", x_bracket=(0.0, 2.0))
    axes = {"f": GridAxis(0.01, 5.0, 100), "mu": GridAxis(-2.0, 10.0, 200), "gamma": GridAxis(1e-4, 10.0, 100)}
    return BuiltModel("firm_entry", p, model, cert, axes, IntegratorSpec("monte_carlo", draws=1000),
                      _states([1.0, 0.0, 1.0], [1.0, 2.0, 0.5], [1.0, -1.0, 2.0]), tm)


def entry_probability(f_bar, f_mu, f_gamma):
    """Probability that a lognormal cost falls below the reservation cost."""
    f_bar = np.asarray(f_bar, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (np.log(np.where(f_bar > 0, f_bar, 1.0)) - f_mu) / np.sqrt(f_gamma)
    return np.where(f_bar > 0, ndtr(z), 0.0)


# ---------------------------------------------------------------- job search with permanent and transitory shocks

def _build_js_perm_trans(p):
    beta, delta, c0_tilde, rho = p["beta"], p["delta"], p["c0_tilde"], p["rho"]
    mu_eta, gamma_eta, gamma_xi, gamma_u = p["mu_eta"], p["gamma_eta"], p["gamma_xi"], p["gamma_u"]
    if abs(rho) > 1:
        raise ConfigError("rho must lie in [-1, 1]")
    c0 = float(crra(c0_tilde, delta))

    def sampler(z, e):
        theta = np.exp(rho * np.log(z[..., 1]) + np.sqrt(gamma_u) * e[..., 0])
        xi = np.exp(np.sqrt(gamma_xi) * e[..., 1])
        eta = np.exp(mu_eta + np.sqrt(gamma_eta) * e[..., 2])
        return np.stack(np.broadcast_arrays(eta + theta * xi, theta), axis=-1)

    def grad(z):
        out = np.zeros(np.shape(z))
        out[..., 0] = z[..., 0] ** (-delta) / (1 - beta)
        return out

    space = StateSpace((0.0, 0.0), (np.inf, np.inf), names=("w", "theta"), open_flags=(True, True))
    model = DecisionModel(beta=beta, exit_payoff=lambda z: crra(z[..., 0], delta) / (1 - beta),
                          flow_payoff=lambda z: _full(z, c0), shock_sampler=sampler, state_space=space,
                          shock_laws=("normal", "normal", "normal"), exit_payoff_grad=grad,
                          anchor=(1.0, 1.0), name="js_perm_trans")
    k = 1 - delta
    sig = (k ** 2 if delta != 1 else 1.0) * gamma_u
    n = max(1, _first_horizon(lambda n: np.exp(rho ** (2 * n) * sig), beta, "js_perm_trans"))
    rn = rho ** n
    _, s2 = _geometric_sums(rho, n)
    mm = float(np.exp(rho ** (2 * n) * sig))
    if delta == 1:
        g = lambda z: z[..., 1] ** rn + z[..., 1] ** (-rn)
        a1 = float(np.exp(gamma_u * s2 / 2 + gamma_xi / 2)) / (1 - beta)
        a2 = float(np.exp(mu_eta + gamma_eta / 2)) / (1 - beta)
    else:
        g = lambda z: z[..., 1] ** (k * rn) + z[..., 1] ** (-k * rn)
        scale = 2 / ((1 - beta) * abs(k))
        a1 = scale * float(np.exp(k ** 2 * gamma_xi / 2 + k ** 2 * gamma_u * s2 / 2))
        a2 = scale * float(np.exp(k * mu_eta + k ** 2 * gamma_eta / 2))
    cert = DriftCertificate(g=g, n=n, m=mm, d=mm, payoff_scale=(a1, a2, 0.0, abs(c0)),
                            label="permanent component moments")
    tm = ThresholdModel(model, threshold_dim=0, direction="increasing", x_bracket=(0.5, 2.0))
    axes = {"w": GridAxis(0.1, 20.0, 100, "log"), "theta": GridAxis(1e-4, 10.0, 200, "log")}
    return BuiltModel("js_perm_trans", p, model, cert, axes, IntegratorSpec("monte_carlo", draws=1000),
                      _states([1.0, 1.0], [1.0, 0.1], [1.0, 5.0]), tm)


# ---------------------------------------------------------------- registry

def _entry(id, title, defaults, ref_keys, builder):
    prov = {k: (REF if k in ref_keys else OWN) for k in defaults}
    return CatalogEntry(id, title, dict(defaults), prov, builder)


CATALOG = {e.id: e for e in [
    _entry("js_bounded", "Job search with bounded offers drawn uniformly",
           {"beta": 0.95, "c0": 0.6, "w_max": 2.0}, set(), _build_js_bounded),
    _entry("js_markov_crra", "Job search with Markov log offers and CRRA utility",
           {"beta": 0.95, "rho": 0.9, "b": 0.0, "sigma": 1.0, "delta": 1.0, "c0": 0.6},
           set(), _build_js_markov_crra),
    _entry("js_learning_normal", "Job search learning the mean of lognormal offers",
           {"beta": 0.95, "gamma_eps": 1.0, "c0_tilde": 0.6, "delta": 3.0},
           {"beta", "gamma_eps", "c0_tilde", "delta"}, _build_js_learning_normal),
    _entry("js_two_density", "Job search learning which of two offer densities applies",
           {"beta": 0.95, "c0": 0.6, "w_max": 2.0, "f_a": 1.0, "f_b": 1.0, "g_a": 3.0, "g_b": 1.2},
           {"beta", "c0", "w_max", "f_a", "f_b", "g_a", "g_b"}, _build_js_two_density),
    _entry("option_american", "Perpetual American call on a mean-reverting log price",
           {"rate": 0.05, "strike": 1.0, "rho": 0.9, "b": 0.0, "sigma": 0.2},
           set(), _build_option_american),
    _entry("rd_search", "Research and development with exponential progress",
           {"beta": 0.9, "theta": 2.0, "c0": 0.5}, set(), _build_rd_search),
    _entry("firm_exit", "Firm exit with AR(1) log productivity",
           {"beta": 0.95, "rho": 0.7, "b": 0.0, "sigma": 1.0, "c_f": 5.0, "alpha": 0.5, "price": 0.15,
            "wage": 0.15},
           {"beta", "rho", "b", "sigma", "c_f", "alpha", "price", "wage"}, _build_firm_exit),
    _entry("firm_exit_learning", "Firm exit learning about log costs",
           {"beta": 0.95, "rho": 0.9, "b": 0.0, "gamma_p": 0.01, "gamma_eps": 1.0, "h1": 1.0, "h2": 0.0},
           set(), _build_firm_exit_learning),
    _entry("firm_entry", "Firm entry learning about project value",
           {"beta": 0.95, "a": 0.2, "gamma_x": 0.1, "gamma_y": 0.05, "rho": 1.0, "gamma_xi": 0.0,
            "f_mu": 0.0, "f_gamma": 0.01},
           {"beta", "a", "gamma_x", "gamma_y", "rho", "gamma_xi", "f_mu", "f_gamma"}, _build_firm_entry),
    _entry("js_perm_trans", "Job search with permanent and transitory offer components",
           {"beta": 0.95, "delta": 2.5, "c0_tilde": 0.6, "rho": 0.9, "mu_eta": 0.0, "gamma_eta": 1e-6,
            "gamma_xi": 5e-4, "gamma_u": 1e-4},
           {"beta", "delta", "c0_tilde", "mu_eta", "gamma_eta", "gamma_xi", "gamma_u"}, _build_js_perm_trans),
]}


def merged_params(model_id: str, params: Optional[dict] = None) -> dict:
    if model_id not in CATALOG:
        raise ConfigError(f"unknown model {model_id!r}; choose from {sorted(CATALOG)}")
    entry = CATALOG[model_id]
    out = dict(entry.defaults)
    for k, v in (params or {}).items():
        if k not in out:
            raise ConfigError(f"unknown parameter {k!r} for {model_id}; allowed: {sorted(out)}")
        try:
            v = float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"parameter {k!r} must be numeric, got {v!r}") from None
        if not np.isfinite(v):
            raise ConfigError(f"parameter {k!r} must be finite")
        out[k] = v
    return out


def build_model(model_id: str, params: Optional[dict] = None) -> BuiltModel:
    """Instantiate a catalog model; unspecified parameters take their defaults."""
    p = merged_params(model_id, params)
    if "beta" in p and not 0 < p["beta"] < 1:
        raise ConfigError(f"beta must lie in (0, 1), got {p['beta']}")
    return CATALOG[model_id].builder(p)


def reservation_closed_form(model_id: str, psi, params: Optional[dict] = None, env=None):
    """Reservation value from the continuation value where the payoff inverts in closed form.

    ``env`` holds ``(mu, gamma)`` for ``firm_entry``.
    """
    p = merged_params(model_id, params)
    psi = np.asarray(psi, dtype=float)
    if model_id == "js_two_density":
        return (1 - p["beta"]) * psi
    if model_id in ("js_perm_trans", "js_learning_normal"):
        return crra_inverse((1 - p["beta"]) * psi, p["delta"])
    if model_id == "firm_entry":
        if env is None:
            raise ConfigError("firm_entry needs env=(mu, gamma)")
        mu, gamma = env
        return expected_entry_utility(mu, gamma, p["a"], p["gamma_x"]) - psi
    raise ConfigError(f"no closed-form reservation value for {model_id}")


def constant_model(r: float, c: float, beta: float) -> DecisionModel:
    """Model with constant payoffs on [0, 1] and a degenerate transition."""
    return DecisionModel(beta=beta, exit_payoff=lambda z: _full(z, r), flow_payoff=lambda z: _full(z, c),
                         shock_sampler=lambda z, e: z + 0.0 * e.sum(axis=-1, keepdims=True),
                         state_space=StateSpace((0.0,), (1.0,), names=("z",)), name="constant")


def bull_jovanovic(params: Optional[dict] = None):
    """Three-choice problem: quit, stay with the current match, or search.

    State ``(p, theta)``. Returns ``(choices, beta, space)`` for the
    multi-choice operator.
    """
    from ..operators import Choice

    p = {"beta": 0.95, "c0": 0.5, "rho": 0.9, "sigma": 0.1, "gamma_theta": 0.1}
    p.update(params or {})
    beta, c0, rho, sigma, gt = (p[k] for k in ("beta", "c0", "rho", "sigma", "gamma_theta"))
    stat_sd = sigma / np.sqrt(1 - rho ** 2)

    def fresh(z, e):
        price = np.exp(stat_sd * e[..., 0])
        theta = np.exp(np.sqrt(gt) * e[..., 1])
        return np.stack(np.broadcast_arrays(price, theta), axis=-1)

    def stay(z, e):
        price = np.exp(rho * np.log(z[..., 0]) + sigma * e[..., 0])
        theta = z[..., 1] + 0.0 * e[..., 1]
        return np.stack(np.broadcast_arrays(price, theta), axis=-1)

    output = lambda z: z[..., 0] * z[..., 1]
    choices = (Choice(lambda z: _full(z, c0), fresh, ("normal", "normal")),
               Choice(output, stay, ("normal", "normal")),
               Choice(output, fresh, ("normal", "normal")))
    space = StateSpace((0.0, 0.0), (np.inf, np.inf), names=("p", "theta"), open_flags=(True, True))
    return choices, beta, space
