"""Expectation engines over unit shocks.

A model declares the law of each shock coordinate (standard normal or
uniform on [0, 1]). An integrator turns that into a finite shock set with
weights. Monte Carlo draws it from the seed, Gauss-Hermite builds a tensor
rule and grid quadrature uses a trapezoid rule (uniform) or midpoint
probits (normal). One shock set is built per solve and shared by every
state and iteration.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import ndtri

from . import _kernels
from .core import DecisionModel, Grid, corner_offsets, stencil
from .errors import ConfigError, EvaluationError

KINDS = ("monte_carlo", "gauss_hermite", "grid_quadrature")
MAX_GH_ORDER = 128


@dataclass(frozen=True)
class IntegratorSpec:
    kind: str = "monte_carlo"
    draws: int = 1000
    order: int = 10
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown integrator kind {self.kind!r}; choose from {KINDS}")
        if int(self.draws) < 1:
            raise ConfigError(f"draws must be positive, got {self.draws}")
        if int(self.order) < 1:
            raise ConfigError(f"order must be positive, got {self.order}")
        object.__setattr__(self, "draws", int(self.draws))
        object.__setattr__(self, "order", int(self.order))
        if self.seed is not None:
            object.__setattr__(self, "seed", int(self.seed))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "draws": self.draws, "order": self.order, "seed": self.seed}


@dataclass(frozen=True, eq=False)
class ShockSet:
    """Shock points ``(K, s)`` with weights ``(K,)`` summing to one."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.points.shape[0]


def gauss_hermite_nodes(order: int):
    """Physicists' Gauss-Hermite rule: integrates ``exp(-x^2) p(x)`` exactly for deg(p) < 2*order."""
    order = int(order)
    if not 1 <= order <= MAX_GH_ORDER:
        raise ConfigError(f"Gauss-Hermite order must lie in 1..{MAX_GH_ORDER}, got {order}")
    x, w = hermgauss(order)
    return x, w


def _normal_rule(order):
    x, w = gauss_hermite_nodes(order)
    return np.sqrt(2.0) * x, w / np.sqrt(np.pi)


def _tensor(rules):
    pts = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wts = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    points = np.stack([p.ravel() for p in pts], axis=-1)
    weights = np.prod(np.stack([w.ravel() for w in wts], axis=-1), axis=-1)
    return points, weights


@lru_cache(maxsize=32)
def _cached_shock_set(kind, draws, order, seed, laws):
    s = len(laws)
    if s == 0:
        # deterministic transition: a single empty shock with full weight
        return np.zeros((1, 0)), np.ones(1)
    if kind == "monte_carlo":
        if seed is None:
            raise ConfigError("a seed is required for Monte Carlo integration")
        rng = np.random.default_rng(seed)
        raw = rng.random((draws, s))
        normal = rng.standard_normal((draws, s))
        points = np.where(np.array([law == "normal" for law in laws]), normal, raw)
        weights = np.full(draws, 1.0 / draws)
    elif kind == "gauss_hermite":
        if any(law != "normal" for law in laws):
            raise ConfigError("Gauss-Hermite integration needs normal shocks")
        points, weights = _tensor([_normal_rule(order)] * s)
    else:
        rules = []
        for law in laws:
            if law == "uniform":
                if order < 2:
                    raise ConfigError("trapezoid quadrature needs order >= 2")
                x = np.linspace(0.0, 1.0, order)
                w = np.full(order, 1.0)
                w[0] = w[-1] = 0.5
                rules.append((x, w / w.sum()))
            else:
                rules.append((ndtri((np.arange(order) + 0.5) / order), np.full(order, 1.0 / order)))
        points, weights = _tensor(rules)
    points = np.ascontiguousarray(points, dtype=float)
    weights = np.ascontiguousarray(weights, dtype=float)
    points.setflags(write=False)
    weights.setflags(write=False)
    return points, weights


def build_shock_set(spec: IntegratorSpec, laws) -> ShockSet:
    """Shock set for ``laws`` under ``spec``; equal inputs give identical arrays."""
    pts, wts = _cached_shock_set(spec.kind, spec.draws, spec.order, spec.seed, tuple(laws))
    return ShockSet(pts, wts)


def _as_states(model, z):
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    if z.shape[-1] != model.dim:
        raise ConfigError(f"expected states with {model.dim} coordinates, got shape {z.shape}")
    if np.isnan(z).any():
        raise ConfigError("states contain NaN")
    return z, single


def next_states(model: DecisionModel, z: np.ndarray, shocks: ShockSet):
    """Next states ``(N, K, m)`` and normalized weights ``(N, K)`` or ``(1, K)``."""
    zn = np.asarray(model.shock_sampler(z[:, None, :], shocks.points[None, :, :]), dtype=float)
    zn = np.broadcast_to(zn, (z.shape[0], shocks.size, model.dim))
    if model.shock_weight is None:
        return zn, shocks.weights[None, :]
    dens = np.asarray(model.shock_weight(z[:, None, :], shocks.points[None, :, :]), dtype=float)
    dens = np.broadcast_to(dens, (z.shape[0], shocks.size))
    w = dens * shocks.weights[None, :]
    tot = w.sum(axis=1, keepdims=True)
    if np.any(~np.isfinite(tot)) or np.any(tot <= 0):
        n = int(np.argmax(~np.isfinite(tot[:, 0]) | (tot[:, 0] <= 0)))
        raise EvaluationError(f"transition weights vanish or are non-finite at state {z[n].tolist()}")
    return zn, w / tot


def _check_finite(vals, where):
    bad = ~np.isfinite(vals)
    if bad.any():
        n, k = np.argwhere(bad)[0]
        raise EvaluationError(f"non-finite integrand at draw {int(k)} for {where} {int(n)}")


def expectation(model: DecisionModel, z, integrand: Callable, spec: IntegratorSpec):
    """Estimate ``E[integrand(Z') | Z = z]`` for one state or a batch."""
    z, single = _as_states(model, z)
    shocks = build_shock_set(spec, model.shock_laws)
    zn, w = next_states(model, z, shocks)
    vals = np.broadcast_to(np.asarray(integrand(zn), dtype=float), (z.shape[0], shocks.size))
    _check_finite(vals, "state")
    out = np.sum(vals * w, axis=1)
    return float(out[0]) if single else out


def expectation_stderr(model: DecisionModel, z, integrand: Callable, spec: IntegratorSpec):
    """Expectation together with its Monte Carlo standard error."""
    if spec.kind != "monte_carlo":
        raise ConfigError("standard errors are only defined for Monte Carlo integration")
    z, single = _as_states(model, z)
    shocks = build_shock_set(spec, model.shock_laws)
    zn, w = next_states(model, z, shocks)
    vals = np.broadcast_to(np.asarray(integrand(zn), dtype=float), (z.shape[0], shocks.size))
    _check_finite(vals, "state")
    mean = np.sum(vals * w, axis=1)
    # self-normalized weights: delta-method variance
    var = np.sum(w ** 2 * (vals - mean[:, None]) ** 2, axis=1)
    se = np.sqrt(var)
    if single:
        return float(mean[0]), float(se[0])
    return mean, se


class TransitionPlan:
    """Next-state interpolation stencils for every (node, shock) pair.

    With the shock set fixed for the whole solve the next states never
    change, so their stencils on ``target`` and the exit payoffs there are
    computed once. Each sweep then costs one compiled pass over the pairs.

    Parameters
    ----------
    model : DecisionModel
    states : ndarray
        Full states ``(N, m)`` at which expectations are taken.
    target : Grid
        Grid of the function being integrated.
    spec : IntegratorSpec
    with_reward : bool
        Store ``r(Z')`` so that ``expect_max`` is available.
    """

    def __init__(self, model: DecisionModel, states, target: Grid, spec: IntegratorSpec,
                 with_reward: bool = False, parallel: bool = False, chunk: int = 2_000_000):
        states = np.ascontiguousarray(states, dtype=float)
        self.model = model
        self.target = target
        self.spec = spec
        self.shocks = build_shock_set(spec, model.shock_laws)
        N, K = states.shape[0], self.shocks.size
        self.n_nodes, self.n_shocks = N, K
        self.parallel = parallel
        self.offsets = corner_offsets(target.shape)
        self.base = np.empty(N * K, dtype=np.int64)
        self.frac = np.empty((N * K, target.ndim))
        self.reward = np.empty((N, K)) if with_reward else _kernels.NO_REWARD
        per_node = model.shock_weight is not None
        self.weights = np.empty((N, K)) if per_node else self.shocks.weights[None, :].copy()
        dims = list(target.dims)
        step = max(1, chunk // K)
        for a in range(0, N, step):
            b = min(N, a + step)
            zn, w = next_states(model, states[a:b], self.shocks)
            if per_node:
                self.weights[a:b] = w
            if with_reward:
                r = np.asarray(model.exit_payoff(zn), dtype=float)
                _check_finite(np.broadcast_to(r, (b - a, K)), "node")
                self.reward[a:b] = r
            pts = zn[..., dims].reshape(-1, len(dims))
            if not np.all(np.isfinite(pts)):
                idx = np.argwhere(~np.isfinite(pts))[0, 0]
                raise EvaluationError(f"non-finite next state at draw {int(idx % K)} for node {a + int(idx // K)}")
            base, frac = stencil(target, pts)
            self.base[a * K:b * K] = base
            self.frac[a * K:b * K] = frac
        self._out = np.empty(N)

    def expect(self, values) -> np.ndarray:
        """``E f(Z')`` at every node for ``f`` given by its target-grid values."""
        return self._run(values, _kernels.NO_REWARD)

    def expect_max(self, values) -> np.ndarray:
        """``E max(r(Z'), f(Z'))`` at every node."""
        if self.reward.shape[0] == 0:
            raise ConfigError("plan was built without exit payoffs")
        return self._run(values, self.reward)

    def interpolated(self, values) -> np.ndarray:
        """Interpolated values at all next states, shape ``(N, K)``."""
        out = np.empty(self.base.shape[0])
        vals = np.ascontiguousarray(values, dtype=float).ravel()
        _kernels.kernel("interp", self.parallel)(vals, self.offsets, self.base, self.frac, out)
        return out.reshape(self.n_nodes, self.n_shocks)

    def average(self, arr) -> np.ndarray:
        """Weighted mean over shocks of an ``(N, K)`` array."""
        return np.sum(np.asarray(arr) * self.weights, axis=1)

    def _run(self, values, reward):
        vals = np.ascontiguousarray(values, dtype=float).ravel()
        if vals.size != self.target.size:
            raise ConfigError("values do not match the plan's target grid")
        out = np.empty(self.n_nodes)
        _kernels.kernel("expect", self.parallel)(vals, self.offsets, self.base, self.frac,
                                                 reward, self.weights, out)
        return out
