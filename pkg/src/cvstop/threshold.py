"""Reservation thresholds for models whose exit payoff is monotone in one coordinate.

The state splits as ``z = (x, y)``: the exit payoff ``r(x, y)`` is strictly
monotone in ``x`` while the flow payoff and the transition depend on ``y``
only. The continuation value then depends on ``y`` alone and the optimal
policy is to stop once ``x`` crosses the reservation value ``xbar(y)``
that solves ``r(xbar(y), y) = psi*(y)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import DecisionModel, Grid, GridFunction
from .errors import BoundaryDerivativeError, ConfigError, NoThresholdError

MAX_EXPANSIONS = 60
ROOT_TOL_FACTOR = 1e-10


class Decision(str, enum.Enum):
    STOP = "stop"
    CONTINUE = "continue"


@dataclass(frozen=True, eq=False)
class ThresholdModel:
    """A decision model with a monotone threshold coordinate.

    Parameters
    ----------
    base : DecisionModel
        Model on the full state ``z``.
    threshold_dim : int
        Index of ``x`` in ``z``.
    direction : str
        ``"increasing"`` if ``r`` rises with ``x`` (stop for large ``x``),
        ``"decreasing"`` otherwise.
    x_bracket : tuple
        Initial search interval for the reservation value.
    """

    base: DecisionModel
    threshold_dim: int
    direction: str
    x_bracket: tuple

    def __post_init__(self):
        if self.direction not in ("increasing", "decreasing"):
            raise ConfigError(f"direction must be 'increasing' or 'decreasing', got {self.direction!r}")
        if not 0 <= self.threshold_dim < self.base.dim:
            raise ConfigError("threshold_dim out of range")
        lo, hi = (float(v) for v in self.x_bracket)
        if not lo < hi:
            raise ConfigError("x_bracket must be an increasing pair")
        object.__setattr__(self, "x_bracket", (lo, hi))

    @property
    def env_dims(self) -> tuple:
        return tuple(i for i in range(self.base.dim) if i != self.threshold_dim)

    @property
    def x_name(self) -> str:
        return self.base.state_space.names[self.threshold_dim]

    def full_state(self, x, y):
        """Assemble states from ``x`` of shape ``(...)`` and ``y`` of shape ``(..., k)``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x.shape, y.shape[:-1])
        z = np.empty(shape + (self.base.dim,))
        z[..., self.threshold_dim] = x
        z[..., list(self.env_dims)] = np.broadcast_to(y, shape + (y.shape[-1],))
        return z

    def exit_payoff(self, x, y):
        return np.asarray(self.base.exit_payoff(self.full_state(x, y)), dtype=float)

    def check_structure(self, states, shocks, tol=0.0):
        """Verify monotonicity of ``r`` in ``x`` and that the transition ignores ``x``.

        ``states`` are full states ``(N, m)``; ``shocks`` unit shocks ``(K, s)``.
        Raises ``ConfigError`` on the first violation.
        """
        states = np.atleast_2d(np.asarray(states, dtype=float))
        lo, hi = self.x_bracket
        y = states[:, list(self.env_dims)]
        r1 = self.exit_payoff(np.full(len(y), lo), y)
        r2 = self.exit_payoff(np.full(len(y), hi), y)
        ok = r2 > r1 if self.direction == "increasing" else r2 < r1
        if not np.all(ok):
            raise ConfigError(f"exit payoff is not {self.direction} in {self.x_name}")
        za, zb = states.copy(), states.copy()
        za[:, self.threshold_dim] = lo
        zb[:, self.threshold_dim] = hi
        sh = np.asarray(shocks, dtype=float)[None, :, :]
        na = np.asarray(self.base.shock_sampler(za[:, None, :], sh))
        nb = np.asarray(self.base.shock_sampler(zb[:, None, :], sh))
        if not np.allclose(na, nb, rtol=0, atol=tol):
            raise ConfigError(f"transition depends on the threshold coordinate {self.x_name}")
        ca = np.asarray(self.base.flow_payoff(za))
        cb = np.asarray(self.base.flow_payoff(zb))
        if not np.allclose(ca, cb, rtol=0, atol=tol):
            raise ConfigError(f"flow payoff depends on the threshold coordinate {self.x_name}")


@dataclass(frozen=True, eq=False)
class ThresholdCurve:
    """Reservation values on the environment grid."""

    grid: Grid
    values: np.ndarray
    direction: str
    name: str = "xbar"

    def as_grid_function(self) -> GridFunction:
        return GridFunction(self.grid, self.values)

    def __call__(self, y):
        return self.as_grid_function()(y)


def _expand(lo, hi, width, lower, upper, lower_open, upper_open, which):
    """Widen the bracket on one side, staying inside the coordinate's bounds."""
    if which == "lo":
        if np.isfinite(lower):
            lo = lower + 0.5 * (lo - lower) if lower_open else max(lower, lo - width)
        else:
            lo = lo - width
    else:
        if np.isfinite(upper):
            hi = upper - 0.5 * (upper - hi) if upper_open else min(upper, hi + width)
        else:
            hi = hi + width
    return lo, hi


def solve_threshold_curve(tm: ThresholdModel, psi_star: GridFunction, x_bracket=None,
                          root_tol: Optional[float] = None) -> ThresholdCurve:
    """Reservation value at every node of ``psi_star``'s grid by bisection.

    All nodes share one bracket, widened (at most 60 times) until the
    payoff gap changes sign at every node. Sharing the bracket makes the
    computed roots a monotone function of ``psi*``.
    """
    if tuple(psi_star.grid.dims) != tm.env_dims:
        raise ConfigError(f"continuation value must live on coordinates {tm.env_dims}")
    lo, hi = tm.x_bracket if x_bracket is None else (float(x_bracket[0]), float(x_bracket[1]))
    space = tm.base.state_space
    k = tm.threshold_dim
    lower, upper = space.lower[k], space.upper[k]
    lower_open, upper_open = space.open_flags[k], space.open_flags[k]
    lo, hi = max(lo, lower), min(hi, upper)
    y = psi_star.grid.points()
    psi = psi_star.flat
    sign = 1.0 if tm.direction == "increasing" else -1.0

    def gap(x):
        return sign * (tm.exit_payoff(x, y) - psi)

    for _ in range(MAX_EXPANSIONS + 1):
        with np.errstate(all="ignore"):
            g_lo = gap(np.full(len(y), lo))
            g_hi = gap(np.full(len(y), hi))
        need_lo = ~(g_lo <= 0)
        need_hi = ~(g_hi >= 0)
        if not need_lo.any() and not need_hi.any():
            break
        width = hi - lo
        if need_lo.any():
            lo, _ = _expand(lo, hi, width, lower, upper, lower_open, upper_open, "lo")
        if need_hi.any():
            _, hi = _expand(lo, hi, width, lower, upper, lower_open, upper_open, "hi")
    else:
        bad = int(np.argmax(need_lo | need_hi))
        raise NoThresholdError(f"no reservation value in [{lo}, {hi}] at {psi_star.grid.names} = "
                               f"{y[bad].tolist()}")
    tol = ROOT_TOL_FACTOR * (hi - lo) if root_tol is None else float(root_tol)
    a = np.full(len(y), lo)
    b = np.full(len(y), hi)
    while np.max(b - a) > tol:
        mid = 0.5 * (a + b)
        up = gap(mid) >= 0
        b = np.where(up, mid, b)
        a = np.where(up, a, mid)
    root = 0.5 * (a + b)
    return ThresholdCurve(psi_star.grid, root.reshape(psi_star.grid.shape), tm.direction,
                          name=tm.x_name + "_bar")


def decide(tm: ThresholdModel, x, y, curve: ThresholdCurve):
    """Stop when ``x`` is on the paying side of ``xbar(y)``; ties stop."""
    xbar = curve(np.asarray(y, dtype=float))
    x = np.asarray(x, dtype=float)
    stop = x >= xbar if tm.direction == "increasing" else x <= xbar
    if np.ndim(stop) == 0:
        return Decision.STOP if stop else Decision.CONTINUE
    return np.where(stop, Decision.STOP.value, Decision.CONTINUE.value)


def _partial(tm, z, j):
    base = tm.base
    if base.exit_payoff_grad is not None:
        return float(np.asarray(base.exit_payoff_grad(z[None, :]))[0, j])
    h = 1e-6 * (1.0 + abs(z[j]))
    zp, zm = z.copy(), z.copy()
    zp[j] += h
    zm[j] -= h
    return float((np.asarray(base.exit_payoff(zp[None, :]))[0]
                  - np.asarray(base.exit_payoff(zm[None, :]))[0]) / (2 * h))


def threshold_gradient(tm: ThresholdModel, psi_star: GridFunction, curve: ThresholdCurve,
                       index, i: int) -> float:
    """Partial derivative of ``xbar`` along environment grid dimension ``i`` at node ``index``.

    Uses ``-(D_i r - D_i psi*) / D_x r`` with a central difference of
    ``psi*`` on the grid and the analytic payoff gradient when available.
    """
    grid = psi_star.grid
    index = tuple(int(j) for j in index)
    if len(index) != grid.ndim or not 0 <= i < grid.ndim:
        raise ConfigError("index/dimension do not match the environment grid")
    j = index[i]
    nodes = grid.nodes[i]
    if j <= 0 or j >= nodes.size - 1:
        raise BoundaryDerivativeError(f"node {index} is on the boundary of dimension {grid.names[i]!r}")
    up, dn = list(index), list(index)
    up[i] += 1
    dn[i] -= 1
    dpsi = (psi_star.values[tuple(up)] - psi_star.values[tuple(dn)]) / (nodes[j + 1] - nodes[j - 1])
    y = np.array([grid.nodes[k][index[k]] for k in range(grid.ndim)])
    z = tm.full_state(curve.values[index], y)
    col = tm.env_dims[i]
    d_r = _partial(tm, z, col)
    d_x = _partial(tm, z, tm.threshold_dim)
    if d_x == 0:
        raise NoThresholdError("exit payoff has zero slope in the threshold coordinate")
    return -(d_r - dpsi) / d_x
