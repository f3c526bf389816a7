"""Fixed-point operators on grid functions and the iteration driver.

``JovanovicOperator`` maps a continuation value ``psi`` to
``c + beta * E max(r(Z'), psi(Z'))`` and ``BellmanOperator`` maps a value
``v`` to ``max(r, c + beta * E v(Z'))``. Both precompute their transition
plan, so repeated application only pays for one compiled sweep.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import DecisionModel, Grid, GridFunction
from .errors import ConfigError, DiagnosticUnavailable, EvaluationError
from .integrate import IntegratorSpec, TransitionPlan, build_shock_set, next_states

BURN_IN = 5
MIN_GAPS = 10


def _payoff_at(fn, states, what):
    vals = np.broadcast_to(np.asarray(fn(states), dtype=float), states.shape[:1]).copy()
    if not np.all(np.isfinite(vals)):
        n = int(np.argmax(~np.isfinite(vals)))
        raise EvaluationError(f"non-finite {what} at state {states[n].tolist()}")
    return vals


class JovanovicOperator:
    """Continuation-value operator on a fixed grid."""

    def __init__(self, model: DecisionModel, grid: Grid, spec: IntegratorSpec, parallel=False):
        self.model, self.grid, self.spec = model, grid, spec
        self.states = grid.full_states(model.anchor)
        self.flow = _payoff_at(model.flow_payoff, self.states, "flow payoff")
        self.plan = TransitionPlan(model, self.states, grid, spec, with_reward=True, parallel=parallel)

    def step(self, values: np.ndarray) -> np.ndarray:
        return self.flow + self.model.beta * self.plan.expect_max(values)

    def __call__(self, psi: GridFunction) -> GridFunction:
        _check_grid(psi, self.grid)
        return GridFunction(self.grid, self.step(psi.flat))


class BellmanOperator:
    """Value-function operator on a fixed grid spanning every payoff-relevant coordinate."""

    def __init__(self, model: DecisionModel, grid: Grid, spec: IntegratorSpec, parallel=False):
        self.model, self.grid, self.spec = model, grid, spec
        self.states = grid.full_states(model.anchor)
        self.exit = _payoff_at(model.exit_payoff, self.states, "exit payoff")
        self.flow = _payoff_at(model.flow_payoff, self.states, "flow payoff")
        self.plan = TransitionPlan(model, self.states, grid, spec, parallel=parallel)

    def step(self, values: np.ndarray) -> np.ndarray:
        return np.maximum(self.exit, self.flow + self.model.beta * self.plan.expect(values))

    def __call__(self, v: GridFunction) -> GridFunction:
        _check_grid(v, self.grid)
        return GridFunction(self.grid, self.step(v.flat))


def _check_grid(f, grid):
    if not (f.grid is grid or f.grid.same_as(grid)):
        raise ConfigError("function lives on a different grid than the operator")


def apply_jovanovic(model: DecisionModel, psi: GridFunction, spec: IntegratorSpec) -> GridFunction:
    return JovanovicOperator(model, psi.grid, spec)(psi)


def apply_bellman(model: DecisionModel, v: GridFunction, spec: IntegratorSpec) -> GridFunction:
    return BellmanOperator(model, v.grid, spec)(v)


def value_from_continuation(model: DecisionModel, psi: GridFunction, grid: Optional[Grid] = None) -> GridFunction:
    """``v = max(r, psi)`` on ``grid`` (default: the grid of ``psi``).

    ``grid`` may span more coordinates than ``psi``; psi is read at the
    coordinates it depends on.
    """
    grid = psi.grid if grid is None else grid
    states = grid.full_states(model.anchor)
    r = _payoff_at(model.exit_payoff, states, "exit payoff")
    psi_vals = psi(states[:, list(psi.grid.dims)])
    return GridFunction(grid, np.maximum(r, psi_vals))


def continuation_from_value(model: DecisionModel, v: GridFunction, spec: IntegratorSpec,
                            grid: Optional[Grid] = None) -> GridFunction:
    """``psi = c + beta * E v(Z')`` on ``grid`` (default: the grid of ``v``)."""
    grid = v.grid if grid is None else grid
    states = grid.full_states(model.anchor)
    flow = _payoff_at(model.flow_payoff, states, "flow payoff")
    plan = TransitionPlan(model, states, v.grid, spec)
    return GridFunction(grid, flow + model.beta * plan.expect(v.flat))


@dataclass
class SolveReport:
    """Trace of a fixed-point iteration.

    ``errors[k]`` is the sup-norm gap between iterates ``k`` and ``k + 1``;
    ``weighted_errors`` holds the same gaps divided by the weight function.
    """

    iterations: int
    errors: list
    converged: bool
    tol: float
    wall_time_s: float = 0.0
    weighted_errors: Optional[list] = None
    spec: Optional[IntegratorSpec] = None
    method: str = ""

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "method": self.method,
            "iterations": self.iterations,
            "converged": self.converged,
            "tol": self.tol,
            "errors": [float(e) for e in self.errors],
            "weighted_errors": None if self.weighted_errors is None else [float(e) for e in self.weighted_errors],
            "integrator": None if self.spec is None else self.spec.to_dict(),
        }
        if include_timing:
            out["wall_time_s"] = self.wall_time_s
        return out


def _components(x):
    return x if isinstance(x, tuple) else (x,)


def iterate_to_fixed_point(op: Callable, init, tol: float, max_iter: int = 10_000,
                           weight: Optional[np.ndarray] = None, spec=None, method=""):
    """Iterate ``op`` from ``init`` until successive iterates differ by at most ``tol``.

    ``init`` is a ``GridFunction`` or a tuple of them (the operator then
    returns a tuple of the same length). ``weight`` holds the weight
    function at the grid nodes and enables the weighted gap trace.

    Returns the last iterate and a ``SolveReport``; hitting ``max_iter``
    returns ``converged=False`` rather than raising.
    """
    if not tol > 0:
        raise ConfigError(f"tolerance must be positive, got {tol}")
    if int(max_iter) < 1:
        raise ConfigError(f"max_iter must be positive, got {max_iter}")
    t0 = time.perf_counter()
    current = init
    errors, werrors = [], ([] if weight is not None else None)
    converged = False
    it = 0
    for it in range(1, int(max_iter) + 1):
        new = op(current)
        diffs = [np.abs(a.flat - b.flat) for a, b in zip(_components(new), _components(current))]
        gap = max(float(d.max()) for d in diffs)
        errors.append(gap)
        if werrors is not None:
            werrors.append(max(float((d / weight).max()) for d in diffs))
        current = new
        if gap <= tol:
            converged = True
            break
    report = SolveReport(iterations=it, errors=errors, converged=converged, tol=float(tol),
                         wall_time_s=time.perf_counter() - t0, weighted_errors=werrors,
                         spec=spec, method=method)
    return current, report


def solve_cvi(model: DecisionModel, grid: Grid, spec: IntegratorSpec, tol: float = 1e-8,
              max_iter: int = 10_000, weight=None, parallel=False):
    """Continuation-value iteration from ``psi = 0``; timing includes operator setup."""
    t0 = time.perf_counter()
    op = JovanovicOperator(model, grid, spec, parallel=parallel)
    ell = None if weight is None else weight(op.states)
    init = GridFunction(grid, np.zeros(grid.shape))
    psi, rep = iterate_to_fixed_point(op, init, tol, max_iter, weight=ell, spec=spec, method="cvi")
    rep.wall_time_s = time.perf_counter() - t0
    return psi, rep


def solve_vfi(model: DecisionModel, grid: Grid, spec: IntegratorSpec, tol: float = 1e-8,
              max_iter: int = 10_000, weight=None, parallel=False):
    """Value-function iteration from ``v = r``; timing includes operator setup."""
    t0 = time.perf_counter()
    op = BellmanOperator(model, grid, spec, parallel=parallel)
    ell = None if weight is None else weight(op.states)
    init = GridFunction(grid, op.exit)
    v, rep = iterate_to_fixed_point(op, init, tol, max_iter, weight=ell, spec=spec, method="vfi")
    rep.wall_time_s = time.perf_counter() - t0
    return v, rep


def estimate_contraction_factor(report: SolveReport, burn_in: int = BURN_IN) -> float:
    """Median ratio of successive gaps after the burn-in iterations."""
    gaps = np.asarray(report.errors[burn_in:], dtype=float)
    if gaps.size < MIN_GAPS:
        raise DiagnosticUnavailable(f"need at least {MIN_GAPS} gaps after burn-in, have {gaps.size}")
    if np.any(gaps[:-1] <= 0):
        raise DiagnosticUnavailable("zero gap before the end of the trace; ratios undefined")
    return float(np.median(gaps[1:] / gaps[:-1]))


# ---------------------------------------------------------------- repeated decisions

@dataclass(frozen=True, eq=False)
class RepeatedModel:
    """Stop-and-return problem: exiting pays ``exit_flow`` and the process continues.

    With probability ``alpha`` the agent re-enters the same choice next
    period, otherwise it stays out forever.
    """

    base: DecisionModel
    exit_flow: Callable
    alpha: float

    def __post_init__(self):
        if not 0.0 <= float(self.alpha) <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")


class RepeatedOperator:
    """Joint update of continuation value and exit value on a common grid."""

    def __init__(self, rep: RepeatedModel, grid: Grid, spec: IntegratorSpec, parallel=False):
        self.rep, self.grid = rep, grid
        model = rep.base
        self.states = grid.full_states(model.anchor)
        self.flow = _payoff_at(model.flow_payoff, self.states, "flow payoff")
        self.exit_flow = _payoff_at(rep.exit_flow, self.states, "exit flow")
        self.plan = TransitionPlan(model, self.states, grid, spec, parallel=parallel)

    def __call__(self, pair):
        psi, r = pair
        beta, alpha = self.rep.base.beta, float(self.rep.alpha)
        rp = self.plan.interpolated(r.flat)
        pp = self.plan.interpolated(psi.flat)
        both = self.plan.average(np.maximum(rp, pp))
        stay = self.plan.average(rp)
        new_psi = self.flow + beta * both
        new_r = self.exit_flow + alpha * beta * both + (1.0 - alpha) * beta * stay
        return GridFunction(self.grid, new_psi), GridFunction(self.grid, new_r)


def apply_repeated(rep: RepeatedModel, psi: GridFunction, r: GridFunction, spec: IntegratorSpec):
    return RepeatedOperator(rep, psi.grid, spec)((psi, r))


def solve_repeated(rep: RepeatedModel, grid: Grid, spec: IntegratorSpec, tol=1e-10, max_iter=10_000):
    op = RepeatedOperator(rep, grid, spec)
    zero = GridFunction(grid, np.zeros(grid.shape))
    return iterate_to_fixed_point(op, (zero, zero), tol, max_iter, spec=spec, method="repeated")


# ---------------------------------------------------------------- several choices

@dataclass(frozen=True, eq=False)
class Choice:
    """One alternative of a multi-choice problem: current reward and its own transition."""

    reward: Callable
    shock_sampler: Callable
    shock_laws: tuple = ()
    shock_weight: Optional[Callable] = None


class MultiChoiceOperator:
    """``psi_i = r_i + beta * E_i max_j psi_j(Z')`` for every alternative ``i``."""

    def __init__(self, choices: Sequence[Choice], beta: float, space, grid: Grid,
                 spec: IntegratorSpec, anchor=None):
        if len(choices) < 1:
            raise ConfigError("need at least one choice")
        self.beta, self.grid = float(beta), grid
        self.plans, self.rewards = [], []
        for ch in choices:
            model = DecisionModel(beta=beta, exit_payoff=ch.reward, flow_payoff=ch.reward,
                                  shock_sampler=ch.shock_sampler, state_space=space,
                                  shock_laws=ch.shock_laws, shock_weight=ch.shock_weight, anchor=anchor)
            states = grid.full_states(model.anchor)
            self.rewards.append(_payoff_at(ch.reward, states, "reward"))
            self.plans.append(TransitionPlan(model, states, grid, spec))

    def __call__(self, psis):
        best = np.max(np.stack([p.flat for p in psis]), axis=0)
        return tuple(GridFunction(self.grid, r + self.beta * plan.expect(best))
                     for r, plan in zip(self.rewards, self.plans))


def apply_multichoice(choices, beta, space, psis, spec: IntegratorSpec, anchor=None):
    """One application of the multi-choice operator to the tuple ``psis``."""
    op = MultiChoiceOperator(choices, beta, space, psis[0].grid, spec, anchor=anchor)
    return op(tuple(psis))


def solve_multichoice(choices, beta, space, grid, spec, tol=1e-8, max_iter=10_000, anchor=None):
    op = MultiChoiceOperator(choices, beta, space, grid, spec, anchor=anchor)
    zero = GridFunction(grid, np.zeros(grid.shape))
    return iterate_to_fixed_point(op, tuple(zero for _ in choices), tol, max_iter, spec=spec,
                                  method="multichoice")
