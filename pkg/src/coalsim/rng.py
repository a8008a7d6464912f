"""Counter-based normal variates keyed by (seed, step, particle id, draw).

Every particle owns an independent stream per macro step, so the numbers a
particle sees do not depend on iteration order or thread count.
"""

from __future__ import annotations

import math

import numba
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@numba.njit(cache=True, inline="always")
def splitmix64(x):
    z = x + _GOLDEN
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@numba.njit(cache=True, inline="always")
def stream_key(seed, step, pid):
    return splitmix64(np.uint64(seed) ^ splitmix64(np.uint64(step) ^ splitmix64(np.uint64(pid))))


@numba.njit(cache=True, inline="always")
def _unit(z):
    # (0, 1]
    return ((z >> _S11) + np.uint64(1)) * _INV53


@numba.njit(cache=True, inline="always")
def normal_pair(key, counter):
    """Two independent N(0, 1) draws for the ``counter``-th slot of a stream."""
    c = np.uint64(2) * np.uint64(counter)
    u1 = _unit(splitmix64(key ^ splitmix64(c)))
    u2 = _unit(splitmix64(key ^ splitmix64(c + np.uint64(1))))
    r = math.sqrt(-2.0 * math.log(u1))
    a = 2.0 * math.pi * u2
    return r * math.cos(a), r * math.sin(a)


@numba.njit(cache=True)
def _normals(seed, step, pid, n):
    key = stream_key(seed, step, pid)
    out = np.empty((n, 2))
    for k in range(n):
        a, b = normal_pair(key, k)
        out[k, 0] = a
        out[k, 1] = b
    return out


def counter_normals(seed: int, step: int, pid: int, n: int) -> np.ndarray:
    """``n`` normal pairs from one particle's stream, shape (n, 2)."""
    return _normals(np.uint64(seed), np.uint64(step), np.uint64(pid), int(n))
