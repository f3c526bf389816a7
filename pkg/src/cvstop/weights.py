"""Drift certificates, weight functions and their Monte Carlo verification.

A certificate ``(g, n, m, d)`` claims that ``n``-step-ahead payoffs are
bounded by ``g`` and that ``g`` drifts geometrically,
``E g(Z') <= m g(z) + d``. Payoff bounds may also be stated in the looser
affine form ``E|r(Z_n)| <= a1 g + a2`` and ``E|c(Z_n)| <= a3 g + a4``;
``normalized()`` folds the constants into ``g`` and ``d``.

From a certificate with ``beta * m < 1`` the weight function ``ell`` is
built; the continuation operator is a contraction in the ``ell``-weighted
sup norm with modulus ``beta * (m + 2 m')``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import DecisionModel, GridFunction
from .errors import CertificateError, ConfigError, EvaluationError

SLACK = 1e-6
# allowance for rounding when a bound holds with equality
ROUNDING = 1e-12
DEFAULT_PATH_DRAWS = 1000


@dataclass(frozen=True, eq=False)
class DriftCertificate:
    """Bound-and-drift certificate for a model.

    Parameters
    ----------
    g : callable
        ``(..., m) -> (...)``, nonnegative.
    n : int
        Horizon at which payoffs are bounded by ``g``.
    m, d : float
        Drift constants, ``m > 0`` and ``d >= 0``.
    payoff_scale : tuple
        ``(a1, a2, a3, a4)`` in the affine payoff bounds.
    """

    g: Callable
    n: int
    m: float
    d: float
    payoff_scale: tuple = (1.0, 0.0, 1.0, 0.0)
    label: str = ""

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise CertificateError(f"horizon n must be a nonnegative integer, got {self.n}")
        if not (np.isfinite(self.m) and self.m > 0):
            raise CertificateError(f"drift factor m must be positive, got {self.m}")
        if not (np.isfinite(self.d) and self.d >= 0):
            raise CertificateError(f"drift constant d must be nonnegative, got {self.d}")
        scale = tuple(float(a) for a in self.payoff_scale)
        if len(scale) != 4 or any(a < 0 or not np.isfinite(a) for a in scale):
            raise CertificateError("payoff_scale must be four nonnegative finite numbers")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "m", float(self.m))
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "payoff_scale", scale)

    def check_discount(self, beta: float):
        if not beta * self.m < 1.0:
            raise CertificateError(f"need beta * m < 1, got beta={beta}, m={self.m}")

    def normalized(self) -> "DriftCertificate":
        """Equivalent certificate whose payoff bounds hold with unit scale."""
        a1, a2, a3, a4 = self.payoff_scale
        if (a1, a2, a3, a4) == (1.0, 0.0, 1.0, 0.0):
            return self
        A, B = max(a1, a3), max(a2, a4)
        g0 = self.g

        def g(z):
            return A * np.asarray(g0(z), dtype=float) + B

        d = A * self.d + B * max(0.0, 1.0 - self.m)
        return DriftCertificate(g=g, n=self.n, m=self.m, d=d, label=self.label + " (normalized)")

    def describe(self) -> dict:
        return {"label": self.label, "n": self.n, "m": self.m, "d": self.d,
                "payoff_scale": list(self.payoff_scale)}


def choose_modulus_constants(cert: DriftCertificate, beta: float):
    """Pick ``(m', d')`` with ``m + 2m' > 1``, ``beta (m + 2m') < 1`` and ``d' >= d / (m + 2m' - 1)``.

    The default ``m' = max((1 - m)/2, (1/beta - m)/4)`` is moved to the middle
    of the admissible interval when it leaves less than ``SLACK`` on
    either side; ``d' = max(1, d / (m + 2m' - 1))``.
    """
    beta = float(beta)
    if not 0.0 < beta < 1.0:
        raise CertificateError(f"discount factor must lie in (0, 1), got {beta}")
    m = cert.m
    cert.check_discount(beta)
    lo = max((1.0 - m) / 2.0, 0.0)
    hi = (1.0 / beta - m) / 2.0
    mp = max((1.0 - m) / 2.0, (1.0 / beta - m) / 4.0)
    if not (mp > 0 and m + 2 * mp - 1 >= SLACK and 1 - beta * (m + 2 * mp) >= SLACK):
        mp = 0.5 * (lo + hi)
    if not (m + 2 * mp > 1 and beta * (m + 2 * mp) < 1 and mp > 0):
        raise CertificateError(f"no admissible m' for m={m}, beta={beta}")
    dp = max(1.0, cert.d / (m + 2 * mp - 1))
    return mp, dp


def _draw(rng, laws, size):
    out = np.empty(tuple(size) + (len(laws),))
    for j, law in enumerate(laws):
        out[..., j] = rng.standard_normal(size) if law == "normal" else rng.random(size)
    return out


def simulate_paths(model: DecisionModel, states, horizon: int, draws: int, seed: int):
    """Simulate ``draws`` independent paths of length ``horizon`` from each state.

    Returns ``(paths, weights)`` with ``paths[t]`` of shape ``(N, draws, m)``
    and self-normalized path weights ``(N, draws)`` (uniform unless the
    model reweights shocks).
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    N = states.shape[0]
    rng = np.random.default_rng(seed)
    z = np.broadcast_to(states[:, None, :], (N, draws, model.dim)).copy()
    paths = [z]
    logw = np.zeros((N, draws))
    for _ in range(horizon):
        e = _draw(rng, model.shock_laws, (N, draws))
        if model.shock_weight is not None:
            with np.errstate(divide="ignore"):
                logw += np.log(np.asarray(model.shock_weight(z, e), dtype=float))
        z = np.asarray(model.shock_sampler(z, e), dtype=float)
        z = np.broadcast_to(z, (N, draws, model.dim)).copy()
        paths.append(z)
    w = np.exp(logw - logw.max(axis=1, keepdims=True))
    w /= w.sum(axis=1, keepdims=True)
    return paths, w


def _mean_se(vals, w):
    mean = np.sum(w * vals, axis=1)
    se = np.sqrt(np.sum(w ** 2 * (vals - mean[:, None]) ** 2, axis=1))
    return mean, se


def _abs_payoff(fn, z):
    return np.abs(np.broadcast_to(np.asarray(fn(z), dtype=float), z.shape[:-1]))


class WeightFunction:
    """``ell(z) = m' (sum_{t=1}^{n-1} E|r(Z_t)| + sum_{t=0}^{n-1} E|c(Z_t)|) + g(z) + d'``.

    Built from the normalized certificate, so ``ell >= d' >= 1``. For
    ``n >= 2`` the expectations are estimated from simulated paths with a
    fixed seed, which keeps ``ell`` deterministic.
    """

    def __init__(self, model: DecisionModel, cert: DriftCertificate, draws: int = DEFAULT_PATH_DRAWS,
                 seed: int = 0):
        self.model = model
        self.certificate = cert.normalized()
        self.m_prime, self.d_prime = choose_modulus_constants(self.certificate, model.beta)
        self.modulus = model.beta * (self.certificate.m + 2 * self.m_prime)
        self.draws, self.seed = int(draws), int(seed)

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        single = z.ndim == 1
        z = np.atleast_2d(z)
        cert, n = self.certificate, self.certificate.n
        g = np.broadcast_to(np.asarray(cert.g(z), dtype=float), z.shape[:1])
        ell = g + self.d_prime
        if n == 1:
            ell = ell + self.m_prime * _abs_payoff(self.model.flow_payoff, z)
        elif n >= 2:
            paths, w = simulate_paths(self.model, z, n - 1, self.draws, self.seed)
            acc = _abs_payoff(self.model.flow_payoff, z)
            for t in range(1, n):
                acc = acc + np.sum(w * _abs_payoff(self.model.exit_payoff, paths[t]), axis=1)
                acc = acc + np.sum(w * _abs_payoff(self.model.flow_payoff, paths[t]), axis=1)
            ell = ell + self.m_prime * acc
        if not np.all(np.isfinite(ell)):
            raise EvaluationError("weight function is non-finite at some state")
        return float(ell[0]) if single else ell


def build_weight_function(model: DecisionModel, cert: DriftCertificate, spec=None) -> WeightFunction:
    """Weight function for ``model``; path draws and seed follow ``spec`` when given."""
    draws, seed = DEFAULT_PATH_DRAWS, 0
    if spec is not None:
        if spec.kind == "monte_carlo":
            draws = spec.draws
        if spec.seed is not None:
            seed = spec.seed
    return WeightFunction(model, cert, draws=draws, seed=seed)


def weighted_sup_norm(f, ell: WeightFunction) -> float:
    """``max |f| / ell`` over the grid nodes of ``f``."""
    states = f.grid.full_states(ell.model.anchor)
    return float(np.max(np.abs(f.flat) / ell(states)))


@dataclass
class DriftReport:
    """Outcome of a Monte Carlo certificate check."""

    model: str
    certificate: dict
    draws: int
    seed: int
    band: float
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    @property
    def violations(self) -> list:
        return [c for c in self.checks if not c["passed"]]

    def to_dict(self) -> dict:
        return {"model": self.model, "passed": self.passed, "certificate": self.certificate,
                "draws": self.draws, "seed": self.seed, "band": self.band, "checks": self.checks}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def iterated_drift_bound(g, m, d, t):
    """``m^t g + (1 - m^t) d / (1 - m)``, equal to ``g + t d`` when ``m = 1``."""
    if m == 1.0:
        return g + t * d
    return m ** t * g + (1.0 - m ** t) * d / (1.0 - m)


def verify_drift(model: DecisionModel, cert: DriftCertificate, test_states, draws: int = 100_000,
                 seed: int = 0, horizon: int = 5, band: float = 3.0, name: str = "") -> DriftReport:
    """Check the certificate's bounds by simulation at ``test_states``.

    A check fails when the simulated expectation exceeds its bound by more
    than ``band`` standard errors (plus a relative rounding allowance of
    ``1e-12``, so bounds that hold with equality pass). Checked: the payoff bounds at horizon
    ``n``, the one-step drift and the iterated drift for ``t <= horizon``.
    """
    states = np.atleast_2d(np.asarray(test_states, dtype=float))
    if states.shape[-1] != model.dim:
        raise ConfigError(f"test states need {model.dim} coordinates")
    a1, a2, a3, a4 = cert.payoff_scale
    T = max(cert.n, horizon, 1)
    report = DriftReport(model=name or model.name, certificate=cert.describe(), draws=int(draws),
                         seed=int(seed), band=float(band))

    def add(kind, t, z, est, se, bound):
        with np.errstate(invalid="ignore"):
            ok = bool(np.isfinite(est) and est - bound <= band * se + ROUNDING * (1.0 + abs(bound)))
        report.checks.append({"check": kind, "t": int(t), "state": [float(x) for x in z],
                              "estimate": float(est), "stderr": float(se), "bound": float(bound),
                              "margin": float(bound - est), "passed": ok})

    for i, z in enumerate(states):
        paths, w = simulate_paths(model, z[None, :], T, draws, seed + i)
        g0 = float(np.asarray(cert.g(z[None, :]), dtype=float).ravel()[0])
        zn = paths[cert.n]
        est, se = _mean_se(_abs_payoff(model.exit_payoff, zn), w)
        add("payoff_exit", cert.n, z, est[0], se[0], a1 * g0 + a2)
        est, se = _mean_se(_abs_payoff(model.flow_payoff, zn), w)
        add("payoff_flow", cert.n, z, est[0], se[0], a3 * g0 + a4)
        for t in range(1, horizon + 1):
            gt = np.broadcast_to(np.asarray(cert.g(paths[t]), dtype=float), w.shape)
            est, se = _mean_se(gt, w)
            kind = "drift" if t == 1 else "iterated_drift"
            add(kind, t, z, est[0], se[0], iterated_drift_bound(g0, cert.m, cert.d, t))
    return report


def continuation_bound(model: DecisionModel, cert: DriftCertificate, states, draws: int = 10_000,
                       seed: int = 0) -> np.ndarray:
    """Upper bound on ``|psi*|`` implied by a certificate.

    ``sum_{t=1}^{n-1} beta^t E|r(Z_t)| + sum_{t=0}^{n-1} beta^t E|c(Z_t)| + a1 g + a2``
    with ``a1 = 2 beta^n / (1 - beta m)`` and
    ``a2 = 2 beta^(n+1) d / ((1 - beta m)(1 - beta))``.
    """
    cert = cert.normalized()
    beta, n, m, d = model.beta, cert.n, cert.m, cert.d
    cert.check_discount(beta)
    states = np.atleast_2d(np.asarray(states, dtype=float))
    g = np.broadcast_to(np.asarray(cert.g(states), dtype=float), states.shape[:1])
    a1 = 2 * beta ** n / (1 - beta * m)
    a2 = 2 * beta ** (n + 1) * d / ((1 - beta * m) * (1 - beta))
    total = a1 * g + a2
    if n >= 1:
        total = total + _abs_payoff(model.flow_payoff, states)
    if n >= 2:
        paths, w = simulate_paths(model, states, n - 1, draws, seed)
        for t in range(1, n):
            total = total + beta ** t * np.sum(w * _abs_payoff(model.exit_payoff, paths[t]), axis=1)
            total = total + beta ** t * np.sum(w * _abs_payoff(model.flow_payoff, paths[t]), axis=1)
    return total
