"""Counter-based random streams.

A stream is a 64-bit key; the ``i``-th uniform of the stream is a pure
function of ``(key, i)`` (SplitMix64 output function applied to
``key + (i + 1) * golden``).  Keys for sub-streams are derived by hashing
``(parent_key, index)``, so replica and class order never matter.
"""
from __future__ import annotations

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_ONE = np.uint64(1)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

U64_MASK = (1 << 64) - 1


@njit(inline="always", cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(inline="always", cache=True)
def derive(key, index):
    """Child key for sub-stream ``index`` of ``key``."""
    return mix64(key ^ mix64(np.uint64(index) * GOLDEN + _ONE))


@njit(inline="always", cache=True)
def uniform(key, counter):
    """Uniform on the open interval (0, 1)."""
    z = mix64(key + (np.uint64(counter) + _ONE) * GOLDEN)
    return (np.float64(z >> _S11) + 0.5) * _INV53


def seed_key(seed: int) -> np.uint64:
    """Master key from a (possibly negative or oversized) Python integer."""
    return np.uint64(int(seed) & U64_MASK)


class RngStream:
    """Python handle on a counter-based stream (key + position).

    >>> s = RngStream(7)
    >>> 0.0 < s.next_uniform() < 1.0
    True
    """

    def __init__(self, seed: int = 0, *path: int):
        key = seed_key(seed)
        for i in path:
            key = np.uint64(derive(key, np.uint64(int(i) & U64_MASK)))
        self.key = np.uint64(key)
        self.counter = 0

    def child(self, index: int) -> "RngStream":
        s = RngStream.__new__(RngStream)
        s.key = np.uint64(derive(self.key, np.uint64(index)))
        s.counter = 0
        return s

    def next_uniform(self) -> float:
        u = uniform(self.key, np.uint64(self.counter))
        self.counter += 1
        return float(u)

    def uniforms(self, n: int) -> np.ndarray:
        out = _uniform_block(self.key, np.uint64(self.counter), n)
        self.counter += n
        return out


@njit(cache=True)
def _uniform_block(key, start, n):
    out = np.empty(n)
    for i in range(n):
        out[i] = uniform(key, start + np.uint64(i))
    return out
