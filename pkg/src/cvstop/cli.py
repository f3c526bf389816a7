"""Command-line entry point.

    cvstop solve|threshold|bench|verify-drift --config FILE [--out DIR]
    cvstop show-model ID [--out DIR]

Exit status is 0 on success, 2 for configuration errors and 3 for
numerical failures (including non-convergence and failed drift checks).
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import _kernels
from .bench import BenchmarkConfig, run_benchmark
from .config import COMMANDS, RunConfig, dump_config, load_config
from .errors import ConfigError, CvstopError
from .io import ensure_dir, write_benchmark, write_curve, write_grid_function, write_json
from .models.catalog import CATALOG
from .operators import solve_cvi, solve_vfi
from .threshold import solve_threshold_curve
from .weights import verify_drift

THREADS_VAR = "CVSTOP_THREADS"
DEFAULT_OUT = "cvstop_out"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _out_dir(args, cfg=None) -> Path:
    if args.out:
        return ensure_dir(args.out)
    if cfg is not None and cfg.output:
        return ensure_dir(cfg.output)
    return ensure_dir(DEFAULT_OUT)


def _parallel(cfg: RunConfig, threads: int) -> bool:
    return cfg.parallel or threads > 1


def cmd_solve(cfg: RunConfig, out: Path, threads: int) -> int:
    built = cfg.build()
    grid = built.grid(cfg.method, cfg.grid)
    solver = solve_cvi if cfg.method == "cvi" else solve_vfi
    f, rep = solver(built.model, grid, cfg.integrator, tol=cfg.tol, max_iter=cfg.max_iter,
                    parallel=_parallel(cfg, threads))
    name = "psi" if cfg.method == "cvi" else "v"
    write_grid_function(f, out / ("continuation.csv" if cfg.method == "cvi" else "value.csv"), name)
    write_json(rep.to_dict(), out / "solve_report.json")
    write_json({"wall_time_s": rep.wall_time_s}, out / "timing.json")
    return EXIT_OK if rep.converged else _fail(f"no convergence after {rep.iterations} iterations")


def cmd_threshold(cfg: RunConfig, out: Path, threads: int) -> int:
    built = cfg.build()
    if built.threshold is None:
        raise ConfigError(f"model {cfg.model} has no threshold structure")
    grid = built.grid("cvi", cfg.grid)
    psi, rep = solve_cvi(built.model, grid, cfg.integrator, tol=cfg.tol, max_iter=cfg.max_iter,
                         parallel=_parallel(cfg, threads))
    write_grid_function(psi, out / "continuation.csv", "psi")
    write_json(rep.to_dict(), out / "solve_report.json")
    t0 = time.perf_counter()
    curve = solve_threshold_curve(built.threshold, psi, root_tol=cfg.root_tol)
    write_curve(curve, out / "threshold.csv")
    write_json({"wall_time_s": rep.wall_time_s, "threshold_time_s": time.perf_counter() - t0},
               out / "timing.json")
    return EXIT_OK if rep.converged else _fail(f"no convergence after {rep.iterations} iterations")


def cmd_verify_drift(cfg: RunConfig, out: Path, threads: int) -> int:
    built = cfg.build()
    states = built.test_states if cfg.drift.states is None else np.array(cfg.drift.states, dtype=float)
    report = verify_drift(built.model, built.certificate, states, draws=cfg.drift.draws, seed=cfg.seed,
                          horizon=cfg.drift.horizon, band=cfg.drift.band, name=cfg.model)
    write_json(report.to_dict(), out / "drift_report.json")
    if not report.passed:
        return _fail(f"{len(report.violations)} drift checks failed; see drift_report.json")
    return EXIT_OK


def cmd_bench(cfg: RunConfig, out: Path, threads: int) -> int:
    if cfg.model != "js_two_density":
        raise ConfigError("the benchmark runs on model js_two_density")
    b = cfg.bench
    bc = BenchmarkConfig(tests=b.tests, precisions=b.precisions, repetitions=dict(b.repetitions),
                         warmup=b.warmup, order=b.order, max_iter=b.max_iter, methods=b.methods,
                         parallel=_parallel(cfg, threads))
    result = run_benchmark(bc)
    write_benchmark(result, out)
    flagged = [r for r in result.timings if not r["converged"]]
    if flagged:
        return _fail(f"{len(flagged)} benchmark runs hit max_iter; see bench_iterations.csv")
    return EXIT_OK


def cmd_show_model(model_id: str, out) -> int:
    if model_id not in CATALOG:
        raise ConfigError(f"unknown model id {model_id!r}; choose from {', '.join(sorted(CATALOG))}")
    desc = CATALOG[model_id].describe()
    if out is not None:
        write_json(desc, out / "model.json")
    else:
        print(json.dumps(desc, indent=2, sort_keys=True))
    return EXIT_OK


HANDLERS = {"solve": cmd_solve, "threshold": cmd_threshold, "verify-drift": cmd_verify_drift, "bench": cmd_bench}


def _fail(msg) -> int:
    print(f"cvstop: {msg}", file=sys.stderr)
    return EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cvstop", description="Optimal stopping by continuation-value iteration.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        if name == "show-model":
            sp.add_argument("model_id", nargs="?", help="catalog model id")
            sp.add_argument("--config", help="config file naming the model")
        else:
            sp.add_argument("--config", required=True, help="YAML run configuration")
        sp.add_argument("--out", help="output directory (default: config 'output' or ./cvstop_out)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        threads = _kernels.apply_thread_override(THREADS_VAR)
    except ValueError:
        print(f"cvstop: {THREADS_VAR} must be an integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "show-model":
            model_id = args.model_id
            if model_id is None:
                if args.config is None:
                    raise ConfigError("show-model needs a model id or --config")
                model_id = load_config(args.config, "show-model").model
            return cmd_show_model(model_id, _out_dir(args) if args.out else None)
        cfg = load_config(args.config, args.command)
        out = _out_dir(args, cfg)
        (out / "config.yaml").write_text(dump_config(cfg), encoding="utf-8")
        return HANDLERS[args.command](cfg, out, threads)
    except ConfigError as exc:
        print(f"cvstop: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CvstopError as exc:
        print(f"cvstop: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
