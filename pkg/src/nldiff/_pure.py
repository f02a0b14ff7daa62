"""Numpy fallback for the compiled kernels in ``_core``."""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_M1 = _U64(0xBF58476D1CE4E5B9)
_M2 = _U64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = _U64(30), _U64(27), _U64(31), _U64(11)


def correlate(ext: np.ndarray, w: np.ndarray, start: int, out: np.ndarray) -> None:
    nb, nout = out.shape
    nw = len(w)
    if ext.shape[0] != nb or start < 0 or start + nout + nw - 1 > ext.shape[1]:
        raise ValueError("correlation window out of range")
    win = sliding_window_view(ext[:, start: start + nout + nw - 1], nw, axis=1)
    np.matmul(win, w, out=out)


def splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        x = x + _GOLDEN
        x = (x ^ (x >> _S30)) * _M1
        x = (x ^ (x >> _S27)) * _M2
        return x ^ (x >> _S31)


def uniform(key: np.ndarray, draw: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = splitmix64(key + _U64(draw))
    return (z >> _S11).astype(np.float64) * (1.0 / 9007199254740992.0)


def _search(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1).astype(np.int64)


def walk(seed, first, count, start_cdf, poisson_cdf, jump_cdf, J, n, absorbing, reflect):
    ids = np.arange(first, first + count, dtype=np.int64).astype(_U64)
    key = splitmix64(_U64(seed) ^ splitmix64(ids))
    pos = _search(start_cdf, uniform(key, 0))
    jumps = _search(poisson_cdf, uniform(key, 1))
    alive = np.ones(count, dtype=np.uint8)
    for r in range(int(jumps.max(initial=0))):
        act = np.flatnonzero((jumps > r) & (alive == 1))
        if len(act) == 0:
            break
        step = _search(jump_cdf, uniform(key[act], 2 + r)) - J
        if reflect:
            step = -step
        pos[act] += step
        if absorbing:
            out = act[(pos[act] <= 0) | (pos[act] >= n)]
            alive[out] = 0
    return pos, alive, jumps
