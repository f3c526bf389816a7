"""Run configuration files (YAML) with strict key checking.

A config names a catalog model and overrides only what differs from the
model's defaults. Every key is checked; misspellings fail with the line
they appear on.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import yaml

from .bench import PRECISIONS, TESTS
from .errors import ConfigError
from .integrate import KINDS as INTEGRATORS, IntegratorSpec
from .models.catalog import CATALOG, GridAxis, build_model, merged_params

COMMANDS = ("solve", "threshold", "bench", "verify-drift", "show-model")
METHODS = ("cvi", "vfi")

TOP_KEYS = ("command", "model", "params", "grid", "integrator", "tol", "max_iter", "method", "seed",
            "output", "parallel", "threshold", "drift", "bench")
INTEGRATOR_KEYS = ("kind", "draws", "order")
AXIS_KEYS = ("lower", "upper", "count", "scaling")
THRESHOLD_KEYS = ("root_tol",)
DRIFT_KEYS = ("draws", "horizon", "band", "states")
BENCH_KEYS = ("tests", "precisions", "repetitions", "warmup", "order", "max_iter", "methods")


@dataclass(frozen=True)
class DriftSettings:
    draws: int = 100_000
    horizon: int = 5
    band: float = 3.0
    states: Optional[tuple] = None


@dataclass(frozen=True)
class BenchSettings:
    tests: tuple = ("test2",)
    precisions: tuple = PRECISIONS
    repetitions: tuple = (("cvi", 50), ("vfi", 20))
    warmup: int = 1
    order: int = 100
    max_iter: int = 10_000
    methods: tuple = METHODS


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration with catalog defaults filled in."""

    model: str
    params: dict
    grid: dict
    integrator: IntegratorSpec
    command: Optional[str] = None
    tol: float = 1e-8
    max_iter: int = 10_000
    method: str = "cvi"
    seed: Optional[int] = None
    output: Optional[str] = None
    parallel: bool = False
    root_tol: Optional[float] = None
    drift: DriftSettings = field(default_factory=DriftSettings)
    bench: BenchSettings = field(default_factory=BenchSettings)

    def build(self):
        """The catalog model at this config's parameters."""
        return build_model(self.model, self.params)

    def model_grid(self, which: Optional[str] = None):
        return self.build().grid(which or self.method, self.grid)


# ---------------------------------------------------------------- line diagnostics

def _line_map(text: str) -> dict:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return {}
    out = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = path + (str(k.value),)
                out[p] = k.start_mark.line + 1
                walk(v, p)

    walk(root, ())
    return out


class _Ctx:
    def __init__(self, lines):
        self.lines = lines

    def fail(self, path, msg):
        where = ".".join(path) if path else "config"
        line = None
        for n in range(len(path), 0, -1):
            line = self.lines.get(tuple(path[:n]))
            if line is not None:
                break
        prefix = f"line {line}: " if line is not None else ""
        raise ConfigError(f"{prefix}{where}: {msg}")

    def check_keys(self, d, allowed, path):
        if not isinstance(d, dict):
            self.fail(path, f"expected a mapping, got {type(d).__name__}")
        for k in d:
            if k not in allowed:
                self.fail(tuple(path) + (str(k),), f"unknown key {k!r}; allowed: {', '.join(allowed)}")

    def number(self, v, path, kind=float, positive=False, minimum=None):
        if isinstance(v, bool):
            self.fail(path, f"expected a number, got {v!r}")
        try:
            x = float(v)
        except (TypeError, ValueError):
            self.fail(path, f"malformed number {v!r}")
        if x != x or x in (float("inf"), float("-inf")):
            self.fail(path, f"must be finite, got {v!r}")
        if kind is int:
            if x != int(x):
                self.fail(path, f"expected an integer, got {v!r}")
            x = int(x)
        if positive and not x > 0:
            self.fail(path, f"must be positive, got {v!r}")
        if minimum is not None and x < minimum:
            self.fail(path, f"must be at least {minimum}, got {v!r}")
        return x


# ---------------------------------------------------------------- parsing

def parse_config(text: str, command: Optional[str] = None) -> RunConfig:
    """Parse YAML text into a RunConfig; raises ConfigError with line and field on any problem.

    ``command`` is the command the config will run under; it must agree
    with a ``command`` key in the text, if present.
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark is not None else ""
        raise ConfigError(f"{where}malformed config: {getattr(exc, 'problem', exc)}") from None
    if raw is None:
        raw = {}
    ctx = _Ctx(_line_map(text))
    ctx.check_keys(raw, TOP_KEYS, ())

    given = raw.get("command")
    if given is not None and given not in COMMANDS:
        ctx.fail(("command",), f"unknown command {given!r}; choose from {', '.join(COMMANDS)}")
    if command is not None and given is not None and given != command:
        ctx.fail(("command",), f"config is for command {given!r}, not {command!r}")
    command = given if given is not None else command
    if "model" not in raw:
        ctx.fail(("model",), "missing required key")
    model = raw["model"]
    if model not in CATALOG:
        ctx.fail(("model",), f"unknown model id {model!r}; choose from {', '.join(sorted(CATALOG))}")

    params_raw = raw.get("params") or {}
    if not isinstance(params_raw, dict):
        ctx.fail(("params",), "expected a mapping")
    defaults = CATALOG[model].defaults
    ctx.check_keys(params_raw, tuple(defaults), ("params",))
    params = {k: ctx.number(v, ("params", k)) for k, v in params_raw.items()}
    try:
        params = merged_params(model, params)
        built = build_model(model, params)
    except ConfigError as exc:
        ctx.fail(("params",), str(exc))

    grid = dict(built.axes)
    grid_raw = raw.get("grid") or {}
    ctx.check_keys(grid_raw, tuple(built.names), ("grid",))
    for name, ax in grid_raw.items():
        path = ("grid", name)
        ctx.check_keys(ax, AXIS_KEYS, path)
        base = grid.get(name)
        vals = {}
        for k in ("lower", "upper"):
            if k in ax:
                vals[k] = ctx.number(ax[k], path + (k,))
            elif base is not None:
                vals[k] = base.lower if k == "lower" else base.upper
            else:
                ctx.fail(path + (k,), "missing required key")
        vals["count"] = ctx.number(ax["count"], path + ("count",), int, minimum=2) if "count" in ax \
            else (base.count if base is not None else ctx.fail(path + ("count",), "missing required key"))
        scaling = ax.get("scaling", base.scaling if base is not None else "uniform")
        if scaling not in ("uniform", "log"):
            ctx.fail(path + ("scaling",), f"unknown scaling {scaling!r}; choose from uniform, log")
        if not vals["lower"] < vals["upper"]:
            ctx.fail(path, "lower must be below upper")
        grid[name] = GridAxis(vals["lower"], vals["upper"], vals["count"], scaling)

    seed = raw.get("seed")
    if seed is not None:
        seed = ctx.number(seed, ("seed",), int, minimum=0)

    integ_raw = raw.get("integrator") or {}
    ctx.check_keys(integ_raw, INTEGRATOR_KEYS, ("integrator",))
    base_spec = built.integrator
    kind = integ_raw.get("kind", base_spec.kind)
    if kind not in INTEGRATORS:
        ctx.fail(("integrator", "kind"), f"unknown integrator {kind!r}; choose from {', '.join(INTEGRATORS)}")
    draws = ctx.number(integ_raw["draws"], ("integrator", "draws"), int, minimum=1) if "draws" in integ_raw \
        else base_spec.draws
    order = ctx.number(integ_raw["order"], ("integrator", "order"), int, minimum=1) if "order" in integ_raw \
        else base_spec.order
    if command in (None, "solve", "threshold", "bench") and kind == "monte_carlo" and seed is None:
        ctx.fail(("seed",), "a seed is required for Monte Carlo integration")
    if command == "verify-drift" and seed is None:
        ctx.fail(("seed",), "a seed is required for drift verification, which simulates paths")
    try:
        spec = IntegratorSpec(kind, draws=draws, order=order, seed=seed)
    except ConfigError as exc:
        ctx.fail(("integrator",), str(exc))

    tol = ctx.number(raw["tol"], ("tol",), positive=True) if "tol" in raw else 1e-8
    max_iter = ctx.number(raw["max_iter"], ("max_iter",), int, minimum=1) if "max_iter" in raw else 10_000
    method = raw.get("method", "cvi")
    if method not in METHODS:
        ctx.fail(("method",), f"unknown method {method!r}; choose from cvi, vfi")
    output = raw.get("output")
    if output is not None and not isinstance(output, str):
        ctx.fail(("output",), "expected a path string")
    parallel = raw.get("parallel", False)
    if not isinstance(parallel, bool):
        ctx.fail(("parallel",), f"expected true or false, got {parallel!r}")

    th_raw = raw.get("threshold") or {}
    ctx.check_keys(th_raw, THRESHOLD_KEYS, ("threshold",))
    root_tol = None
    if th_raw.get("root_tol") is not None:
        root_tol = ctx.number(th_raw["root_tol"], ("threshold", "root_tol"), positive=True)

    drift = _parse_drift(ctx, raw.get("drift") or {}, built.model.dim)
    bench = _parse_bench(ctx, raw.get("bench") or {})

    return RunConfig(model=model, params=params, grid=grid, integrator=spec, command=command, tol=tol,
                     max_iter=max_iter, method=method, seed=seed, output=output, parallel=parallel,
                     root_tol=root_tol, drift=drift, bench=bench)


def _parse_drift(ctx, d, dim) -> DriftSettings:
    ctx.check_keys(d, DRIFT_KEYS, ("drift",))
    base = DriftSettings()
    states = None
    if d.get("states") is not None:
        rows = d["states"]
        if not isinstance(rows, list) or not rows:
            ctx.fail(("drift", "states"), "expected a nonempty list of states")
        out = []
        for i, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != dim:
                ctx.fail(("drift", "states"), f"state {i} must list {dim} coordinates")
            out.append(tuple(ctx.number(x, ("drift", "states")) for x in row))
        states = tuple(out)
    return DriftSettings(
        draws=ctx.number(d["draws"], ("drift", "draws"), int, minimum=1) if "draws" in d else base.draws,
        horizon=ctx.number(d["horizon"], ("drift", "horizon"), int, minimum=1) if "horizon" in d else base.horizon,
        band=ctx.number(d["band"], ("drift", "band"), positive=True) if "band" in d else base.band,
        states=states)


def _parse_bench(ctx, d) -> BenchSettings:
    ctx.check_keys(d, BENCH_KEYS, ("bench",))
    base = BenchSettings()
    tests = d.get("tests", list(base.tests))
    if not isinstance(tests, list) or not tests:
        ctx.fail(("bench", "tests"), "expected a nonempty list")
    for t in tests:
        if t not in TESTS:
            ctx.fail(("bench", "tests"), f"unknown benchmark test {t!r}; choose from {', '.join(TESTS)}")
    precisions = d.get("precisions", list(base.precisions))
    if not isinstance(precisions, list) or not precisions:
        ctx.fail(("bench", "precisions"), "expected a nonempty list")
    precisions = tuple(ctx.number(p, ("bench", "precisions"), positive=True) for p in precisions)
    if any(b >= a for a, b in zip(precisions, precisions[1:])):
        ctx.fail(("bench", "precisions"), "precision levels must be strictly decreasing")
    methods = d.get("methods", list(base.methods))
    if not isinstance(methods, list) or not methods or any(m not in METHODS for m in methods):
        ctx.fail(("bench", "methods"), "expected a nonempty list drawn from cvi, vfi")
    reps = dict(base.repetitions)
    reps_raw = d.get("repetitions") or {}
    ctx.check_keys(reps_raw, METHODS, ("bench", "repetitions"))
    for k, v in reps_raw.items():
        reps[k] = ctx.number(v, ("bench", "repetitions", k), int, minimum=1)
    return BenchSettings(
        tests=tuple(tests), precisions=precisions, repetitions=tuple(sorted(reps.items())),
        warmup=ctx.number(d["warmup"], ("bench", "warmup"), int, minimum=0) if "warmup" in d else base.warmup,
        order=ctx.number(d["order"], ("bench", "order"), int, minimum=2) if "order" in d else base.order,
        max_iter=ctx.number(d["max_iter"], ("bench", "max_iter"), int, minimum=1) if "max_iter" in d
        else base.max_iter,
        methods=tuple(methods))


def load_config(path, command: Optional[str] = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, command)


# ---------------------------------------------------------------- emitting

def config_to_dict(cfg: RunConfig) -> dict:
    """Plain mapping that ``parse_config`` maps back to ``cfg``."""
    out = {}
    if cfg.command is not None:
        out["command"] = cfg.command
    out["model"] = cfg.model
    out["params"] = dict(cfg.params)
    out["grid"] = {k: a.to_dict() for k, a in cfg.grid.items()}
    out["integrator"] = {"kind": cfg.integrator.kind, "draws": cfg.integrator.draws,
                         "order": cfg.integrator.order}
    out["tol"] = cfg.tol
    out["max_iter"] = cfg.max_iter
    out["method"] = cfg.method
    if cfg.seed is not None:
        out["seed"] = cfg.seed
    if cfg.output is not None:
        out["output"] = cfg.output
    out["parallel"] = cfg.parallel
    out["threshold"] = {"root_tol": cfg.root_tol}
    out["drift"] = {"draws": cfg.drift.draws, "horizon": cfg.drift.horizon, "band": cfg.drift.band,
                    "states": None if cfg.drift.states is None else [list(s) for s in cfg.drift.states]}
    out["bench"] = {"tests": list(cfg.bench.tests), "precisions": list(cfg.bench.precisions),
                    "repetitions": dict(cfg.bench.repetitions), "warmup": cfg.bench.warmup,
                    "order": cfg.bench.order, "max_iter": cfg.bench.max_iter, "methods": list(cfg.bench.methods)}
    return out


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False, default_flow_style=None)
