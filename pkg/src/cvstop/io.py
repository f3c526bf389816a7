"""Result files: CSV for grid functions and curves, JSON for reports.

Floats are written with 17 significant digits so values read back exactly.
Wall-clock measurements only ever go to files whose name starts with
``timing``; every other output is a deterministic function of the config.
"""
from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .core import Grid, GridFunction
from .errors import CvstopError, InputError


class OutputError(CvstopError):
    """Writing a result file failed."""


def fmt(x) -> str:
    return format(float(x), ".17g")


def _write_text(path, text: str):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}") from None
    return path


def _csv(header, columns) -> str:
    lines = [",".join(header)]
    cols = [np.asarray(c, dtype=float).ravel() for c in columns]
    for row in zip(*cols):
        lines.append(",".join(fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def write_grid_function(f: GridFunction, path, value_name: str = "value"):
    """One row per grid node in C order: node coordinates, then the value."""
    pts = f.grid.points()
    return _write_text(path, _csv(list(f.grid.names) + [value_name],
                                  [pts[:, j] for j in range(pts.shape[1])] + [f.flat]))


def read_grid_function(path, dims=None) -> GridFunction:
    """Rebuild a GridFunction from a CSV written by ``write_grid_function``."""
    try:
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise InputError(f"malformed grid-function file {path}: {exc}") from None
    d = len(header) - 1
    if d < 1 or data.shape[1] != d + 1:
        raise InputError(f"{path}: header and data widths differ")
    nodes = [np.unique(data[:, j]) for j in range(d)]
    shape = tuple(n.size for n in nodes)
    if int(np.prod(shape)) != data.shape[0]:
        raise InputError(f"{path}: rows do not form a tensor grid")
    grid = Grid(tuple(nodes), dims=dims, names=tuple(header[:-1]))
    if not np.array_equal(grid.points(), data[:, :d]):
        raise InputError(f"{path}: rows are not in grid order")
    return GridFunction(grid, data[:, -1])


def write_curve(curve, path):
    """Threshold curve: environment coordinates, then the threshold value."""
    return write_grid_function(GridFunction(curve.grid, curve.values), path, curve.name)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    return obj


def write_json(obj, path):
    return _write_text(path, json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")


def write_table(rows: list, columns: list, path):
    """CSV of dict rows; floats at full precision, other values as text."""
    def cell(v):
        if isinstance(v, (float, np.floating)):
            return fmt(v)
        return str(v)
    lines = [",".join(columns)] + [",".join(cell(r[c]) for c in columns) for r in rows]
    return _write_text(path, "\n".join(lines) + "\n")


def precision_label(p: float) -> str:
    return f"{p:.0e}"


def write_benchmark(result, out_dir) -> list:
    """Benchmark output tables.

    ``timing_table.csv`` (rows test x method, columns precisions, mean
    seconds), ``timing_speedup.csv`` and ``timing_runs.csv`` hold wall-clock
    data. ``bench_iterations.csv``, ``bench_gaps.csv`` and
    ``bench_environment.json`` are reproducible on a given machine.
    """
    out_dir = Path(out_dir)
    cfg = result.config
    cols = ["test", "method"] + [precision_label(p) for p in cfg.precisions]
    table, iters = [], []
    for test in cfg.tests:
        for method in cfg.methods:
            rows = {r["precision"]: r for r in result.timings if r["test"] == test and r["method"] == method}
            base = {"test": test, "method": method}
            table.append({**base, **{precision_label(p): rows[p]["mean_time_s"] for p in cfg.precisions}})
            iters.append({**base, **{precision_label(p): rows[p]["iterations"] if rows[p]["converged"]
                                     else f"{rows[p]['iterations']}*" for p in cfg.precisions}})
    paths = [
        write_table(table, cols, out_dir / "timing_table.csv"),
        write_table(result.timings, ["test", "method", "precision", "mean_time_s", "std_time_s", "repetitions",
                                     "iterations", "converged"], out_dir / "timing_runs.csv"),
        write_table(iters, cols, out_dir / "bench_iterations.csv"),
        write_table(result.gaps, ["test", "precision", "sup_gap", "value_norm"], out_dir / "bench_gaps.csv"),
        write_json(result.environment, out_dir / "bench_environment.json"),
    ]
    sp = result.speedups()
    if sp:
        paths.append(write_table(sp, ["test", "precision", "speedup"], out_dir / "timing_speedup.csv"))
    return paths


def emit_results(result, path):
    """Write ``result`` to ``path``: CSV for grid functions and curves, JSON otherwise.

    Objects with a ``to_dict`` method are serialized through it.
    """
    from .threshold import ThresholdCurve

    if isinstance(result, GridFunction):
        return write_grid_function(result, path)
    if isinstance(result, ThresholdCurve):
        return write_curve(result, path)
    if hasattr(result, "to_dict"):
        return write_json(result.to_dict(), path)
    return write_json(result, path)


def ensure_dir(path) -> Path:
    path = Path(path)
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {path}: {exc.strerror}") from None
    return path
