"""Timing comparison of continuation-value and value-function iteration.

The benchmark model is job search with two candidate offer densities.
Value iteration runs on the full (w, pi) grid while continuation-value
iteration runs on the pi grid alone. Both use the same quadrature rule
over offers, whose order stays fixed when the w grid is refined.
"""
from __future__ import annotations

import os
import platform
import sys
import time
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy

from .core import DecisionModel, Grid, GridFunction, StateSpace, make_grid
from .errors import ConfigError
from .integrate import IntegratorSpec, TransitionPlan
from .models.catalog import GridAxis, build_model, _two_density_parts
from .models.beliefs import belief_update_two_density
from .operators import solve_cvi, solve_vfi, value_from_continuation

PRECISIONS = (1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)

# (beta, c0, n_pi, n_w) for each benchmark configuration
TESTS = {
    "test1": (0.90, 0.6, 50, 100),
    "test2": (0.95, 0.6, 50, 100),
    "test3": (0.98, 0.6, 50, 100),
    "test4": (0.95, 0.001, 50, 100),
    "test5": (0.95, 1.0, 50, 100),
    "test6": (0.95, 0.6, 50, 150),
    "test7": (0.95, 0.6, 50, 200),
    "test8": (0.95, 0.6, 100, 100),
    "test9": (0.95, 0.6, 100, 150),
    "test10": (0.95, 0.6, 100, 200),
}


@dataclass
class BenchmarkConfig:
    tests: tuple = ("test2",)
    precisions: tuple = PRECISIONS
    repetitions: dict = field(default_factory=lambda: {"cvi": 50, "vfi": 20})
    warmup: int = 1
    order: int = 100
    max_iter: int = 10_000
    methods: tuple = ("cvi", "vfi")
    parallel: bool = False

    def __post_init__(self):
        self.tests = tuple(self.tests)
        self.precisions = tuple(float(p) for p in self.precisions)
        self.methods = tuple(self.methods)
        unknown = [t for t in self.tests if t not in TESTS]
        if unknown:
            raise ConfigError(f"unknown benchmark tests {unknown}; choose from {sorted(TESTS)}")
        if not self.precisions or any(not p > 0 for p in self.precisions):
            raise ConfigError("precisions must be positive")
        if any(b >= a for a, b in zip(self.precisions, self.precisions[1:])):
            raise ConfigError("precisions must be strictly decreasing")
        if not self.methods or any(m not in ("cvi", "vfi") for m in self.methods):
            raise ConfigError("methods must be a nonempty subset of ('cvi', 'vfi')")
        for key in self.methods:
            if int(self.repetitions.get(key, 0)) < 1:
                raise ConfigError(f"repetitions for {key} must be at least 1")
        if self.warmup < 0:
            raise ConfigError("warmup must be nonnegative")


@dataclass
class BenchmarkResult:
    """Timings, iteration counts and solution gaps per (test, method, precision)."""

    config: BenchmarkConfig
    timings: list
    gaps: list
    environment: dict

    def time_of(self, test, method, precision) -> float:
        for row in self.timings:
            if (row["test"], row["method"], row["precision"]) == (test, method, precision):
                return row["mean_time_s"]
        raise KeyError((test, method, precision))

    def speedups(self) -> list:
        out = []
        if set(self.config.methods) != {"cvi", "vfi"}:
            return out
        for test in self.config.tests:
            for p in self.config.precisions:
                out.append({"test": test, "precision": p,
                            "speedup": self.time_of(test, "vfi", p) / self.time_of(test, "cvi", p)})
        return out


def environment_fingerprint() -> dict:
    """Software and hardware description recorded next to benchmark output."""
    return {
        "python": sys.version.split()[0],
        "implementation": platform.python_implementation(),
        "platform": platform.platform(),
        "machine": platform.machine(),
        "cpu_count": os.cpu_count(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "numba_threads": numba.get_num_threads(),
        "blas": _blas_name(),
    }


def _blas_name():
    try:
        cfg = np.show_config(mode="dicts")
        return cfg.get("Build Dependencies", {}).get("blas", {}).get("name", "unknown")
    except Exception:
        return "unknown"


def bench_setup(test: str, order: int = 100):
    """Model, grids and integrator for one benchmark configuration."""
    beta, c0, n_pi, n_w = TESTS[test]
    built = build_model("js_two_density", {"beta": beta, "c0": c0})
    w_max = built.params["w_max"]
    axes = {"w": GridAxis(0.0, w_max, n_w), "pi": GridAxis(1e-4, 1 - 1e-4, n_pi)}
    spec = IntegratorSpec("grid_quadrature", order=order)
    return built, built.grid("cvi", axes), built.grid("vfi", axes), spec


def _timed(fn, reps, warmup):
    for _ in range(warmup):
        fn()
    times, out = [], None
    for _ in range(reps):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return np.array(times), out


def compare_solutions(a: GridFunction, b: GridFunction, common_grid: Grid) -> float:
    """Largest absolute difference of two grid functions over the nodes of ``common_grid``."""
    pts = common_grid.points()
    va = a(_embed(a.grid, common_grid, pts))
    vb = b(_embed(b.grid, common_grid, pts))
    return float(np.max(np.abs(np.asarray(va) - np.asarray(vb))))


def _embed(grid: Grid, common: Grid, pts):
    # pick out the coordinates ``grid`` spans from points of ``common``
    missing = [d for d in grid.dims if d not in common.dims]
    if missing:
        raise ConfigError(f"common grid does not span coordinates {missing}")
    cols = [common.dims.index(d) for d in grid.dims]
    out = pts[:, cols]
    return out[:, 0] if grid.ndim == 1 else out


def run_benchmark(cfg: BenchmarkConfig) -> BenchmarkResult:
    """Time each method for every test and precision; warm-up runs are not counted.

    A run that hits ``max_iter`` is recorded with ``converged = False``
    rather than aborting the benchmark.
    """
    timings, gaps = [], []
    solvers = {"cvi": solve_cvi, "vfi": solve_vfi}
    for test in cfg.tests:
        built, gc, gv, spec = bench_setup(test, cfg.order)
        model = built.model
        grids = {"cvi": gc, "vfi": gv}
        for p in cfg.precisions:
            sols = {}
            for method in cfg.methods:
                def run(method=method):
                    return solvers[method](model, grids[method], spec, tol=p, max_iter=cfg.max_iter,
                                           parallel=cfg.parallel)
                t, (f, rep) = _timed(run, int(cfg.repetitions[method]), cfg.warmup)
                sols[method] = f
                timings.append({"test": test, "method": method, "precision": p,
                                "mean_time_s": float(t.mean()), "std_time_s": float(t.std()),
                                "repetitions": int(t.size), "iterations": rep.iterations,
                                "converged": rep.converged})
            if len(sols) == 2:
                v = sols["vfi"]
                vc = value_from_continuation(model, sols["cvi"], gv)
                gaps.append({"test": test, "precision": p, "sup_gap": compare_solutions(vc, v, gv),
                             "value_norm": float(np.max(np.abs(v.flat)))})
    return BenchmarkResult(cfg, timings, gaps, environment_fingerprint())


# ---------------------------------------------------------------- cost model for the parametric run

def two_density_with_cost_state(beta: float = 0.95, w_max: float = 2.0) -> DecisionModel:
    """Two-density job search with unemployment compensation as an extra, constant state coordinate."""
    built = build_model("js_two_density", {"beta": beta, "w_max": w_max})
    f_pdf, g_pdf = _two_density_parts(built.params)

    def sampler(z, e):
        w_new = w_max * e[..., 0]
        pi_new = belief_update_two_density(z[..., 1], f_pdf(w_new), g_pdf(w_new))
        return np.stack(np.broadcast_arrays(w_new, pi_new, z[..., 2]), axis=-1)

    def weight(z, e):
        w_new = w_max * e[..., 0]
        return z[..., 1] * f_pdf(w_new) + (1 - z[..., 1]) * g_pdf(w_new)

    space = StateSpace((0.0, 0.0, 0.0), (w_max, 1.0, np.inf), names=("w", "pi", "c0"))
    return DecisionModel(beta=beta, exit_payoff=lambda z: z[..., 0] / (1 - beta),
                         flow_payoff=lambda z: z[..., 2].copy(), shock_sampler=sampler, state_space=space,
                         shock_laws=("uniform",), shock_weight=weight, anchor=(1.0, 0.5, 0.6),
                         name="js_two_density_cost_state")


def group3_cost_model(n_pi: int = 100, n_c0: int = 100, n_w: int = 100, order: int = 100,
                      c0_range=(0.0, 1.5), tol: float = 1e-8, sample_nodes: int = 2000) -> dict:
    """Estimate the value-iteration cost of the parametric problem from one measured sweep.

    Continuation-value iteration on the (pi, c0) grid is run in full. For
    value iteration on the (w, pi, c0) grid a single sweep is timed on
    ``sample_nodes`` nodes and scaled to the full grid, then multiplied by
    the number of iterations the continuation-value run needed (both
    methods contract at the same rate on this model).
    """
    model = two_density_with_cost_state()
    spec = IntegratorSpec("grid_quadrature", order=order)
    cvi_space = StateSpace((1e-4, c0_range[0]), (1 - 1e-4, c0_range[1]), names=("pi", "c0"))
    cvi_grid = make_grid(cvi_space, [n_pi, n_c0], dims=(1, 2))
    t0 = time.perf_counter()
    psi, rep = solve_cvi(model, cvi_grid, spec, tol=tol)
    cvi_time = time.perf_counter() - t0

    full_space = StateSpace((0.0, 1e-4, c0_range[0]), (2.0, 1 - 1e-4, c0_range[1]), names=("w", "pi", "c0"))
    full_grid = make_grid(full_space, [n_w, n_pi, n_c0])
    rng = np.random.default_rng(0)
    idx = np.sort(rng.choice(full_grid.size, size=min(sample_nodes, full_grid.size), replace=False))
    states = full_grid.points()[idx]
    plan = TransitionPlan(model, states, full_grid, spec)
    values = np.zeros(full_grid.size)
    plan.expect(values)
    t0 = time.perf_counter()
    plan.expect(values)
    sweep = (time.perf_counter() - t0) * full_grid.size / len(idx)
    vfi_time = sweep * rep.iterations
    return {
        "cvi_nodes": cvi_grid.size,
        "vfi_nodes": full_grid.size,
        "quadrature_order": order,
        "cvi_points_per_sweep": cvi_grid.size * order,
        "vfi_points_per_sweep": full_grid.size * order,
        "iterations": rep.iterations,
        "cvi_converged": rep.converged,
        "cvi_time_s": cvi_time,
        "vfi_sweep_time_s_estimate": sweep,
        "vfi_time_s_estimate": vfi_time,
        "time_ratio_estimate": vfi_time / cvi_time,
    }
