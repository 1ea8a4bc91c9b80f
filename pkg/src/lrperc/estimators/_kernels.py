"""Replica-parallel numba kernels.

Every kernel loops over replicas with ``prange``; replica ``i`` samples the
configuration keyed by ``derive(master, i)`` and writes only row ``i`` of
its output, so results are independent of the thread count.
"""
import numpy as np
from numba import njit, prange

from .. import _threads  # noqa: F401  (thread-pool ceiling before numba use)
from ..rng import derive
from ..sampler import build_configuration

_NO_EDGES = np.empty((0, 2), dtype=np.int64)


@njit(inline="always", cache=True)
def _one(master, rep, disp, width, lo, count, prob, ident, L, d, wrap, coupled, N, smax):
    parent = np.empty(N, dtype=np.int64)
    size = np.empty(N, dtype=np.int64)
    stamp = np.zeros(smax, dtype=np.int64)
    edges = np.empty((0, 2), dtype=np.int64)
    n_open, _ = build_configuration(derive(master, np.uint64(rep)), disp, width, lo, count,
                                    prob, ident, L, d, wrap, coupled, parent, size, stamp, edges)
    return parent, size, n_open


@njit(parallel=True, cache=True)
def edge_counts(master, n_rep, disp, width, lo, count, prob, ident, L, d, wrap, coupled, N, smax):
    out = np.empty(n_rep, dtype=np.int64)
    for i in prange(n_rep):
        _, _, n_open = _one(master, i, disp, width, lo, count, prob, ident, L, d, wrap, coupled, N, smax)
        out[i] = n_open
    return out


@njit(parallel=True, cache=True)
def same_cluster(master, n_rep, disp, width, lo, count, prob, ident, L, d, wrap, coupled, N, smax,
                 groups):
    """``out[i, g] = 1`` if all vertices of ``groups[g]`` (-1 padded) share a cluster."""
    G = groups.shape[0]
    out = np.zeros((n_rep, G), dtype=np.uint8)
    for i in prange(n_rep):
        parent, _, _ = _one(master, i, disp, width, lo, count, prob, ident, L, d, wrap, coupled, N, smax)
        for g in range(G):
            r0 = parent[groups[g, 0]]
            ok = 1
            for j in range(1, groups.shape[1]):
                v = groups[g, j]
                if v < 0:
                    break
                if parent[v] != r0:
                    ok = 0
                    break
            out[i, g] = ok
    return out


@njit(parallel=True, cache=True)
def origin_size(master, n_rep, disp, width, lo, count, prob, ident, L, d, wrap, coupled, N, smax,
                origin):
    out = np.empty(n_rep, dtype=np.int64)
    for i in prange(n_rep):
        parent, size, _ = _one(master, i, disp, width, lo, count, prob, ident, L, d, wrap, coupled, N, smax)
        out[i] = size[parent[origin]]
    return out


@njit(parallel=True, cache=True)
def ball_counts(master, n_rep, disp, width, lo, count, prob, ident, L, d, wrap, coupled, N, smax,
                origin, ball, cuts):
    """``out[i, j] = |K_origin cap ball[:cuts[j]]|`` (ball sorted by distance)."""
    R = cuts.shape[0]
    out = np.empty((n_rep, R), dtype=np.int64)
    for i in prange(n_rep):
        parent, _, _ = _one(master, i, disp, width, lo, count, prob, ident, L, d, wrap, coupled, N, smax)
        r0 = parent[origin]
        acc = 0
        pos = 0
        for j in range(R):
            while pos < cuts[j]:
                if parent[ball[pos]] == r0:
                    acc += 1
                pos += 1
            out[i, j] = acc
    return out


@njit(parallel=True, cache=True)
def gyration_sums(master, n_rep, disp, width, lo, count, prob, ident, L, d, wrap, coupled, N, smax,
                  origin, weight):
    """Per replica ``(|K|, sum_{x in K} weight[x])`` for the origin cluster."""
    out = np.empty((n_rep, 2))
    for i in prange(n_rep):
        parent, size, _ = _one(master, i, disp, width, lo, count, prob, ident, L, d, wrap, coupled, N, smax)
        r0 = parent[origin]
        s = 0.0
        for x in range(N):
            if parent[x] == r0:
                s += weight[x]
        out[i, 0] = size[r0]
        out[i, 1] = s
    return out


@njit(parallel=True, cache=True)
def max_in_ball(master, n_rep, disp, width, lo, count, prob, ident, L, d, wrap, coupled, N, smax,
                ball, cuts):
    """``out[i, j] = max_x |K_x cap ball[:cuts[j]]|`` (ball sorted by distance)."""
    R = cuts.shape[0]
    out = np.empty((n_rep, R), dtype=np.int64)
    for i in prange(n_rep):
        parent, size, _ = _one(master, i, disp, width, lo, count, prob, ident, L, d, wrap, coupled, N, smax)
        # reuse `size` as a per-root tally; tallies only grow, so the running
        # maximum over a prefix is the maximum for that ball
        for j in range(ball.shape[0]):
            size[parent[ball[j]]] = 0
        best = 0
        pos = 0
        for j in range(R):
            while pos < cuts[j]:
                r = parent[ball[pos]]
                size[r] += 1
                if size[r] > best:
                    best = size[r]
                pos += 1
            out[i, j] = best
    return out


@njit(parallel=True, cache=True)
def largest_cluster(master, n_rep, disp, width, lo, count, prob, ident, L, d, wrap, coupled, N, smax):
    out = np.empty(n_rep, dtype=np.int64)
    for i in prange(n_rep):
        parent, size, _ = _one(master, i, disp, width, lo, count, prob, ident, L, d, wrap, coupled, N, smax)
        best = 0
        for x in range(N):
            if parent[x] == x and size[x] > best:
                best = size[x]
        out[i] = best
    return out


@njit(parallel=True, cache=True)
def russo_terms(master, n_rep, disp, width, lo, count, prob, ident, L, d, wrap, coupled, N, smax,
                origin, ball, ball_weight):
    """Per replica ``(|K|, sum_y w_y 1(y not in K) |K_y|)`` over ``ball``."""
    out = np.empty((n_rep, 2))
    for i in prange(n_rep):
        parent, size, _ = _one(master, i, disp, width, lo, count, prob, ident, L, d, wrap, coupled, N, smax)
        r0 = parent[origin]
        s = 0.0
        for j in range(ball.shape[0]):
            r = parent[ball[j]]
            if r != r0:
                s += ball_weight[j] * size[r]
        out[i, 0] = size[r0]
        out[i, 1] = s
    return out
