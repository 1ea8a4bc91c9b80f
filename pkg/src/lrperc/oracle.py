"""Exact connection probabilities on small weighted graphs.

Every edge configuration is enumerated.  For graphs with at most
``TABLE_MAX_N`` vertices a single pass fills ``T[C]``, the probability that
``C`` is exactly a cluster, and a superset sum turns it into ``tau`` for
every vertex subset at once.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import CapacityError, DomainError
from .rng import derive, seed_key, uniform

__all__ = [
    "EDGE_CAP",
    "WeightedGraph",
    "tau_table",
    "exact_tau",
    "check_gladkov3",
    "gladkov_constant",
    "check_gladkov_higher",
    "check_tree_graph",
    "mc_tau",
    "random_graph",
]

EDGE_CAP = 24
TABLE_MAX_N = 20
TOL = 1e-12


@dataclass(frozen=True)
class WeightedGraph:
    n: int
    edges: tuple

    def __init__(self, n: int, edges, beta: float | None = None):
        """``edges`` holds ``(u, v, p)``; with ``beta`` given the third entry is a weight ``J``
        and ``p = 1 - exp(-beta J)``."""
        out, seen = [], set()
        for u, v, w in edges:
            u, v = int(u), int(v)
            if u == v or not (0 <= u < n and 0 <= v < n):
                raise DomainError(f"bad edge ({u}, {v})")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise DomainError(f"duplicate edge {key}")
            seen.add(key)
            p = -math.expm1(-beta * float(w)) if beta is not None else float(w)
            if not 0.0 <= p <= 1.0:
                raise DomainError(f"edge probability {p} outside [0, 1]")
            out.append((u, v, p))
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "edges", tuple(out))

    def arrays(self):
        e = self.edges
        return (
            np.array([x[0] for x in e], dtype=np.int64),
            np.array([x[1] for x in e], dtype=np.int64),
            np.array([x[2] for x in e], dtype=np.float64),
        )


def random_graph(rng: np.random.Generator, n: int, m: int) -> WeightedGraph:
    """``m`` distinct random edges on ``n`` vertices with uniform probabilities
    (a quarter of them pushed to 0 or 1 to hit boundary cases)."""
    pairs = list(itertools.combinations(range(n), 2))
    m = min(m, len(pairs))
    pick = rng.choice(len(pairs), size=m, replace=False)
    edges = []
    for i in pick:
        p = rng.random()
        if rng.random() < 0.25:
            p = float(rng.random() < 0.5)
        edges.append((*pairs[i], p))
    return WeightedGraph(n, edges)


@njit(cache=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True)
def _cluster_table(n, us, vs, ps):
    m = us.shape[0]
    T = np.zeros(1 << n)
    comp = np.zeros(1 << n)  # Kahan compensation
    parent = np.empty(n, dtype=np.int64)
    cmask = np.empty(n, dtype=np.int64)
    for omega in range(1 << m):
        w = 1.0
        for e in range(m):
            w *= ps[e] if (omega >> e) & 1 else 1.0 - ps[e]
        if w == 0.0:
            continue
        for i in range(n):
            parent[i] = i
            cmask[i] = 0
        for e in range(m):
            if (omega >> e) & 1:
                a = _find(parent, us[e])
                b = _find(parent, vs[e])
                if a != b:
                    parent[b] = a
        for i in range(n):
            cmask[_find(parent, i)] |= 1 << i
        for i in range(n):
            c = cmask[i]
            if c:
                y = w - comp[c]
                t = T[c] + y
                comp[c] = (t - T[c]) - y
                T[c] = t
    # superset sum: tau[A] = sum of T[C] over C containing A
    for b in range(n):
        bit = 1 << b
        for mask in range(1 << n):
            if not mask & bit:
                T[mask] += T[mask | bit]
    T[0] = 1.0
    return T


@njit(cache=True)
def _tau_targets(n, us, vs, ps, targets):
    m = us.shape[0]
    k = targets.shape[0]
    acc = np.zeros(k)
    comp = np.zeros(k)
    parent = np.empty(n, dtype=np.int64)
    for omega in range(1 << m):
        w = 1.0
        for e in range(m):
            w *= ps[e] if (omega >> e) & 1 else 1.0 - ps[e]
        if w == 0.0:
            continue
        for i in range(n):
            parent[i] = i
        for e in range(m):
            if (omega >> e) & 1:
                a = _find(parent, us[e])
                b = _find(parent, vs[e])
                if a != b:
                    parent[b] = a
        for j in range(k):
            t = targets[j]
            r = -1
            ok = True
            for i in range(n):
                if (t >> i) & 1:
                    ri = _find(parent, i)
                    if r < 0:
                        r = ri
                    elif ri != r:
                        ok = False
                        break
            if ok:
                y = w - comp[j]
                s = acc[j] + y
                comp[j] = (s - acc[j]) - y
                acc[j] = s
    return acc


def _check_cap(g: WeightedGraph):
    if len(g.edges) > EDGE_CAP:
        raise CapacityError(f"{len(g.edges)} edges exceed the enumeration cap {EDGE_CAP}; use mc_tau")


def _mask(g: WeightedGraph, A) -> int:
    A = [int(a) for a in A]
    if len(set(A)) != len(A) or any(not 0 <= a < g.n for a in A):
        raise DomainError(f"bad vertex set {A}")
    return sum(1 << a for a in A)


class _Tau:
    """Memoised ``tau`` lookups for one graph."""

    def __init__(self, g: WeightedGraph):
        _check_cap(g)
        self.g = g
        self.table = _cluster_table(g.n, *g.arrays()) if g.n <= TABLE_MAX_N else None
        self.cache: dict = {}

    def __call__(self, mask: int) -> float:
        if mask & (mask - 1) == 0:
            return 1.0
        if self.table is not None:
            return float(self.table[mask])
        if mask not in self.cache:
            self.cache[mask] = float(_tau_targets(self.g.n, *self.g.arrays(), np.array([mask], dtype=np.int64))[0])
        return self.cache[mask]


def tau_table(g: WeightedGraph) -> np.ndarray:
    """``tau`` for every vertex subset, indexed by bitmask (requires ``n <= 20``)."""
    _check_cap(g)
    if g.n > TABLE_MAX_N:
        raise CapacityError(f"table needs n <= {TABLE_MAX_N}")
    return _cluster_table(g.n, *g.arrays())


def exact_tau(g: WeightedGraph, A, _tau: _Tau | None = None) -> float:
    """Probability that all vertices of ``A`` lie in one cluster."""
    if len(A) < 2:
        raise DomainError("need |A| >= 2")
    t = _tau or _Tau(g)
    return t(_mask(g, A))


def check_gladkov3(g: WeightedGraph, x, y, z, _tau: _Tau | None = None) -> float:
    """``sqrt(8 tau(x,y) tau(y,z) tau(z,x)) - tau(x,y,z)``."""
    t = _tau or _Tau(g)
    bx, by, bz = (_mask(g, [v]) for v in (x, y, z))
    if len({bx, by, bz}) < 3:
        raise DomainError("vertices must be distinct")
    return math.sqrt(8.0 * t(bx | by) * t(by | bz) * t(bz | bx)) - t(bx | by | bz)


def gladkov_constant(k: int) -> int:
    return 4 * (k - 1) ** 2 * (2 ** (k - 2) - 1)


def _tripartitions(members):
    """Unordered tripartitions, the first element pinned to the first part."""
    first, rest = members[0], members[1:]
    for labels in itertools.product(range(3), repeat=len(rest)):
        parts = [[first], [], []]
        for v, lab in zip(rest, labels):
            parts[lab].append(v)
        if parts[1] and parts[2] and labels.index(1) < (labels.index(2) if 2 in labels else len(labels)):
            yield parts


def _singleton_partitions(members, a0):
    for a in members:
        if a == a0:
            continue
        others = [v for v in members if v not in (a, a0)]
        for r in range(1, len(others) + 1):
            for S in itertools.combinations(others, r):
                rest = [v for v in members if v != a and v not in S]
                yield [list(S), rest, [a]]


def check_gladkov_higher(g: WeightedGraph, A, variant: str = "symmetric", a0=None, _tau: _Tau | None = None) -> float:
    """``C_|A| max tau(A1+A2) tau(A2+A3) tau(A3+A1) - tau(A)^2``.

    ``variant="singleton"`` restricts the maximum to ``A3 = {a}``, ``a != a0``
    with ``a0`` in ``A2`` (the sharper form the argument actually yields).
    """
    A = [int(a) for a in A]
    if len(A) < 3:
        raise DomainError("need |A| >= 3")
    t = _tau or _Tau(g)
    bits = [_mask(g, [a]) for a in A]
    if variant == "symmetric":
        parts = _tripartitions(bits)
    elif variant == "singleton":
        a0 = A[0] if a0 is None else int(a0)
        if a0 not in A:
            raise DomainError("a0 must lie in A")
        parts = _singleton_partitions(bits, 1 << a0)
    else:
        raise DomainError(f"unknown variant {variant!r}")
    best = 0.0
    for P in parts:
        m1, m2, m3 = (sum(p) for p in P)
        best = max(best, t(m1 | m2) * t(m2 | m3) * t(m3 | m1))
    return gladkov_constant(len(A)) * best - t(sum(bits)) ** 2


def check_tree_graph(g: WeightedGraph, x, y, z, _tau: _Tau | None = None) -> float:
    """``sum_w tau(x,w) tau(w,y) tau(w,z) - tau(x,y,z)``."""
    t = _tau or _Tau(g)
    bx, by, bz = (_mask(g, [v]) for v in (x, y, z))
    if len({bx, by, bz}) < 3:
        raise DomainError("vertices must be distinct")
    rhs = 0.0
    for w in range(g.n):
        bw = 1 << w
        rhs += t(bx | bw) * t(bw | by) * t(bw | bz)
    return rhs - t(bx | by | bz)


@njit(cache=True)
def _mc_hits(n, us, vs, ps, target, samples, key):
    m = us.shape[0]
    parent = np.empty(n, dtype=np.int64)
    hits = 0
    for s in range(samples):
        k = derive(key, np.uint64(s))
        for i in range(n):
            parent[i] = i
        for e in range(m):
            if uniform(k, np.uint64(e)) < ps[e]:
                a = _find(parent, us[e])
                b = _find(parent, vs[e])
                if a != b:
                    parent[b] = a
        r = -1
        ok = True
        for i in range(n):
            if (target >> i) & 1:
                ri = _find(parent, i)
                if r < 0:
                    r = ri
                elif ri != r:
                    ok = False
                    break
        hits += ok
    return hits


def mc_tau(g: WeightedGraph, A, samples: int, seed: int) -> tuple[float, float]:
    """Monte-Carlo estimate of ``tau(A)`` with its binomial standard error (any edge count)."""
    if samples < 1:
        raise DomainError("samples must be >= 1")
    if g.n > 63:
        raise CapacityError("mc_tau packs vertex sets into 63-bit masks")
    hits = _mc_hits(g.n, *g.arrays(), np.int64(_mask(g, A)), int(samples), seed_key(seed))
    p = hits / samples
    return p, math.sqrt(max(p * (1 - p), 0.0) / samples)
