"""State spaces, decision models and interpolated grid functions.

States are stored as arrays whose last axis holds the coordinates, so a
batch of ``N`` states in an ``m`` dimensional space has shape ``(N, m)``.
Shock samplers broadcast over leading axes: given ``z`` of shape ``(..., m)``
and unit shocks of shape ``(..., s)`` they return next states of the
broadcast shape ``(..., m)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, EvaluationError, InputError

SHOCK_LAWS = ("normal", "uniform")
SCALINGS = ("uniform", "log")


@dataclass(frozen=True)
class StateSpace:
    """Box ``[lower, upper]`` in R^m, bounds may be infinite.

    ``open_flags[i]`` marks a bound pair as open (the coordinate never
    reaches its bounds, e.g. a positive wage). Infinite bounds are always
    treated as open.
    """

    lower: tuple
    upper: tuple
    names: Optional[tuple] = None
    open_flags: Optional[tuple] = None

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) == 0 or len(lo) != len(hi):
            raise ConfigError("state space needs matching non-empty lower/upper bounds")
        for i, (a, b) in enumerate(zip(lo, hi)):
            if np.isnan(a) or np.isnan(b) or not a < b:
                raise ConfigError(f"state space coordinate {i}: need lower < upper, got {a}, {b}")
        names = self.names
        if names is None:
            names = tuple(f"z{i}" for i in range(len(lo)))
        names = tuple(str(n) for n in names)
        if len(names) != len(lo) or len(set(names)) != len(names):
            raise ConfigError("state space names must be unique, one per coordinate")
        flags = self.open_flags
        if flags is None:
            flags = (False,) * len(lo)
        flags = tuple(bool(f) or not (np.isfinite(a) and np.isfinite(b))
                      for f, a, b in zip(flags, lo, hi))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "open_flags", flags)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        lo, hi = np.array(self.lower), np.array(self.upper)
        return np.all((z >= lo) & (z <= hi), axis=-1)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ConfigError(f"unknown coordinate {name!r}; have {self.names}") from None


@dataclass(frozen=True, eq=False)
class DecisionModel:
    """An optimal stopping problem on a continuous state space.

    Parameters
    ----------
    beta : float
        Discount factor in [0, 1).
    exit_payoff, flow_payoff : callable
        Map states ``(..., m)`` to payoffs ``(...)``.
    shock_sampler : callable
        ``(z, shocks) -> z_next``; deterministic given its inputs.
    state_space : StateSpace
    shock_laws : tuple of str
        Law of each unit-shock coordinate, ``"normal"`` or ``"uniform"``.
    shock_weight : callable, optional
        ``(z, shocks) -> density`` used as a relative weight on each shock.
        The expectation engines normalize it per state, which turns a
        proposal over shocks into the model's transition law.
    kernel_density : callable, optional
        ``(z_next, z) -> density`` of the transition, used for checks.
    exit_payoff_grad : callable, optional
        Analytic gradient of the exit payoff, ``(..., m) -> (..., m)``.
    anchor : tuple, optional
        Full state used to fill coordinates that a grid leaves out.
    """

    beta: float
    exit_payoff: Callable
    flow_payoff: Callable
    shock_sampler: Callable
    state_space: StateSpace
    shock_laws: tuple = ()
    shock_weight: Optional[Callable] = None
    kernel_density: Optional[Callable] = None
    exit_payoff_grad: Optional[Callable] = None
    anchor: Optional[tuple] = None
    name: str = ""

    def __post_init__(self):
        beta = float(self.beta)
        if not 0.0 <= beta < 1.0:
            raise ConfigError(f"discount factor must lie in [0, 1), got {beta}")
        object.__setattr__(self, "beta", beta)
        laws = tuple(self.shock_laws)
        for law in laws:
            if law not in SHOCK_LAWS:
                raise ConfigError(f"unknown shock law {law!r}; choose from {SHOCK_LAWS}")
        object.__setattr__(self, "shock_laws", laws)
        anchor = self.anchor
        if anchor is None:
            anchor = tuple(_interior_point(a, b) for a, b in
                           zip(self.state_space.lower, self.state_space.upper))
        anchor = tuple(float(a) for a in anchor)
        if len(anchor) != self.state_space.dim:
            raise ConfigError("anchor must have one entry per state coordinate")
        object.__setattr__(self, "anchor", anchor)

    @property
    def dim(self) -> int:
        return self.state_space.dim

    @property
    def shock_dim(self) -> int:
        return len(self.shock_laws)


def _interior_point(a, b):
    if np.isfinite(a) and np.isfinite(b):
        return 0.5 * (a + b)
    if np.isfinite(a):
        return a + 1.0
    if np.isfinite(b):
        return b - 1.0
    return 0.0


@dataclass(frozen=True, eq=False)
class Grid:
    """Tensor grid over some (or all) coordinates of a model's state.

    ``dims`` lists the model coordinates the grid spans; the remaining
    coordinates are irrelevant to functions stored on this grid.
    """

    nodes: tuple
    dims: Optional[tuple] = None
    names: Optional[tuple] = None

    def __post_init__(self):
        nodes = []
        for i, x in enumerate(self.nodes):
            x = np.array(x, dtype=float)
            if x.ndim != 1 or x.size < 2:
                raise ConfigError(f"grid dimension {i} needs at least 2 nodes")
            if not np.all(np.isfinite(x)):
                raise ConfigError(f"grid dimension {i} has non-finite nodes")
            if not np.all(np.diff(x) > 0):
                raise ConfigError(f"grid dimension {i} must be strictly increasing")
            x.setflags(write=False)
            nodes.append(x)
        if not nodes:
            raise ConfigError("grid needs at least one dimension")
        dims = tuple(range(len(nodes))) if self.dims is None else tuple(int(d) for d in self.dims)
        if len(dims) != len(nodes):
            raise ConfigError("grid dims must match the number of node arrays")
        names = tuple(f"z{d}" for d in dims) if self.names is None else tuple(self.names)
        object.__setattr__(self, "nodes", tuple(nodes))
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "names", names)

    @property
    def ndim(self) -> int:
        return len(self.nodes)

    @property
    def shape(self) -> tuple:
        return tuple(x.size for x in self.nodes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def points(self) -> np.ndarray:
        """All nodes as an ``(size, ndim)`` array in C order."""
        mesh = np.meshgrid(*self.nodes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def full_states(self, anchor) -> np.ndarray:
        """Nodes embedded in the model's state space using ``anchor`` for missing coordinates."""
        anchor = np.asarray(anchor, dtype=float)
        out = np.tile(anchor, (self.size, 1))
        out[:, list(self.dims)] = self.points()
        return out

    def same_as(self, other: "Grid") -> bool:
        return (self.dims == other.dims and self.shape == other.shape
                and all(np.array_equal(a, b) for a, b in zip(self.nodes, other.nodes)))


def make_grid(space: StateSpace, counts: Sequence[int], scaling=None,
              dims: Optional[Sequence[int]] = None) -> Grid:
    """Build a tensor grid on the (finite) box ``space``.

    ``scaling`` is ``"uniform"`` or ``"log"`` per dimension; log scaling
    packs nodes geometrically toward the lower bound.
    """
    counts = [int(c) for c in np.atleast_1d(counts)]
    if len(counts) != space.dim:
        raise ConfigError(f"need {space.dim} grid counts, got {len(counts)}")
    if scaling is None or isinstance(scaling, str):
        scaling = [scaling or "uniform"] * space.dim
    if len(scaling) != space.dim:
        raise ConfigError("need one scaling per dimension")
    nodes = []
    for i, (n, s, a, b) in enumerate(zip(counts, scaling, space.lower, space.upper)):
        if n < 2:
            raise ConfigError(f"grid dimension {space.names[i]!r} needs at least 2 nodes, got {n}")
        if not (np.isfinite(a) and np.isfinite(b)):
            raise ConfigError(f"grid dimension {space.names[i]!r} needs finite bounds")
        if s == "uniform":
            x = np.linspace(a, b, n)
        elif s == "log":
            shift = 0.0 if a > 0 else 1.0 - a
            x = np.geomspace(a + shift, b + shift, n) - shift
            x[0], x[-1] = a, b
        else:
            raise ConfigError(f"unknown scaling {s!r}; choose from {SCALINGS}")
        nodes.append(x)
    if dims is None:
        dims = tuple(range(space.dim))
    return Grid(tuple(nodes), dims=tuple(dims), names=space.names)


def stencil(grid: Grid, points: np.ndarray):
    """Lower-corner flat index and per-dimension weights for multilinear interpolation.

    Points outside the grid are clamped to the nearest boundary node.
    Returns ``(base, frac)`` with shapes ``(P,)`` and ``(P, d)``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, grid.ndim)
    if np.isnan(pts).any():
        raise InputError("cannot interpolate at NaN coordinates")
    strides = _strides(grid.shape)
    base = np.zeros(pts.shape[0], dtype=np.int64)
    frac = np.empty(pts.shape, dtype=float)
    for j, x in enumerate(grid.nodes):
        p = np.clip(pts[:, j], x[0], x[-1])
        lo = np.searchsorted(x, p, side="right") - 1
        lo = np.clip(lo, 0, x.size - 2)
        frac[:, j] = (p - x[lo]) / (x[lo + 1] - x[lo])
        base += lo * strides[j]
    return base, frac


def _strides(shape):
    strides = np.ones(len(shape), dtype=np.int64)
    for j in range(len(shape) - 2, -1, -1):
        strides[j] = strides[j + 1] * shape[j + 1]
    return strides


def corner_offsets(shape) -> np.ndarray:
    """Flat offsets of the ``2**d`` cell corners; bit j of the corner id selects dimension j."""
    strides = _strides(shape)
    d = len(shape)
    offs = np.zeros(2 ** d, dtype=np.int64)
    for c in range(2 ** d):
        offs[c] = sum(strides[j] for j in range(d) if (c >> j) & 1)
    return offs


def interpolate_stencil(values_flat, offsets, base, frac) -> np.ndarray:
    """Evaluate multilinear interpolation from a precomputed stencil (numpy path)."""
    d = frac.shape[1]
    out = np.zeros(base.shape[0])
    for c in range(offsets.size):
        w = np.ones(base.shape[0])
        for j in range(d):
            w *= frac[:, j] if (c >> j) & 1 else 1.0 - frac[:, j]
        out += w * values_flat[base + offsets[c]]
    return out


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Node values on a grid, read back by multilinear interpolation.

    Off-grid queries are clamped to the nearest boundary node, so no value
    outside the stored range is ever produced.
    """

    grid: Grid
    values: np.ndarray
    interp: str = "multilinear"
    extrap: str = "clamp"

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            bad = np.argwhere(~np.isfinite(vals))[0]
            node = tuple(float(x[i]) for x, i in zip(self.grid.nodes, bad))
            raise EvaluationError(f"non-finite value at grid node {node}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.interp != "multilinear" or self.extrap != "clamp":
            raise ConfigError("only multilinear interpolation with clamp extrapolation is supported")

    def __call__(self, z):
        return eval_grid_function(self, z)

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()


def eval_grid_function(f: GridFunction, z):
    """Interpolate ``f`` at ``z`` of shape ``(d,)`` or ``(..., d)``.

    One-dimensional grids also accept a scalar or a plain vector of points.
    """
    z = np.asarray(z, dtype=float)
    d = f.grid.ndim
    if d == 1 and (z.ndim == 0 or z.shape[-1] != 1):
        lead = z.shape
        pts = z.reshape(-1, 1)
    elif z.ndim >= 1 and z.shape[-1] == d:
        lead = z.shape[:-1]
        pts = z.reshape(-1, d)
    else:
        raise InputError(f"expected states with {d} coordinates, got shape {z.shape}")
    base, frac = stencil(f.grid, pts)
    out = interpolate_stencil(f.flat, corner_offsets(f.grid.shape), base, frac)
    if lead == ():
        return float(out[0])
    return out.reshape(lead)


def check_kernel_normalization(model: DecisionModel, z, box: StateSpace, draws: int = 100_000,
                               seed: int = 0):
    """Monte Carlo integral of the transition density over ``box``.

    Returns ``(estimate, stderr)``; a correctly normalized kernel whose mass
    lies inside ``box`` gives an estimate within a few standard errors of 1.
    """
    if model.kernel_density is None:
        raise ConfigError("model has no transition density")
    rng = np.random.default_rng(seed)
    lo, hi = np.array(box.lower), np.array(box.upper)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ConfigError("normalization check needs a finite box")
    u = lo + (hi - lo) * rng.random((draws, lo.size))
    vol = float(np.prod(hi - lo))
    f = vol * np.asarray(model.kernel_density(u, np.asarray(z, dtype=float)), dtype=float)
    return float(f.mean()), float(f.std(ddof=1) / np.sqrt(draws))
