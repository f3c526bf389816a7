"""Compiled inner loops for expectation sweeps.

Every kernel walks nodes in order and accumulates shocks sequentially, so
results are bit-for-bit reproducible for a given thread count.
"""
import os

import numba as nb
import numpy as np
from numba import prange

# the bundled TBB is often too old; skip it rather than warn on every launch
nb.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


def _interp_points(values, offsets, base, frac, out):
    P = base.shape[0]
    d = frac.shape[1]
    nc = offsets.shape[0]
    for p in prange(P):
        acc = 0.0
        for c in range(nc):
            w = 1.0
            for j in range(d):
                if (c >> j) & 1:
                    w *= frac[p, j]
                else:
                    w *= 1.0 - frac[p, j]
            acc += w * values[base[p] + offsets[c]]
        out[p] = acc


def _expect(values, offsets, base, frac, reward, weights, out):
    # reward has shape (N, K) when the integrand is max(reward, f) and (0, 0) otherwise
    N = out.shape[0]
    K = weights.shape[1]
    d = frac.shape[1]
    nc = offsets.shape[0]
    shared = weights.shape[0] == 1
    use_reward = reward.shape[0] > 0
    o1 = offsets[1]
    o2 = offsets[2] if nc > 2 else 0
    o3 = offsets[3] if nc > 3 else 0
    for n in prange(N):
        row = 0 if shared else n
        acc = 0.0
        for k in range(K):
            p = n * K + k
            b = base[p]
            if d == 1:
                f = frac[p, 0]
                v = (1.0 - f) * values[b] + f * values[b + o1]
            elif d == 2:
                f0 = frac[p, 0]
                f1 = frac[p, 1]
                v = ((1.0 - f0) * (1.0 - f1) * values[b] + f0 * (1.0 - f1) * values[b + o1]
                     + (1.0 - f0) * f1 * values[b + o2] + f0 * f1 * values[b + o3])
            else:
                v = 0.0
                for c in range(nc):
                    w = 1.0
                    for j in range(d):
                        if (c >> j) & 1:
                            w *= frac[p, j]
                        else:
                            w *= 1.0 - frac[p, j]
                    v += w * values[b + offsets[c]]
            if use_reward:
                r = reward[n, k]
                if r > v:
                    v = r
            acc += weights[row, k] * v
        out[n] = acc


_serial = {
    "interp": nb.njit(cache=True)(_interp_points),
    "expect": nb.njit(cache=True)(_expect),
}
_parallel = {}


def kernel(name: str, parallel: bool = False):
    if not parallel:
        return _serial[name]
    if name not in _parallel:
        src = {"interp": _interp_points, "expect": _expect}[name]
        _parallel[name] = nb.njit(cache=True, parallel=True)(src)
    return _parallel[name]


def apply_thread_override(var: str = "CVSTOP_THREADS") -> int:
    """Set the compiled-kernel thread count from an environment variable, if present."""
    raw = os.environ.get(var)
    if raw:
        n = max(1, min(int(raw), nb.config.NUMBA_NUM_THREADS))
        nb.set_num_threads(n)
    return nb.get_num_threads()


NO_REWARD = np.zeros((0, 0))
