"""Geometric functionals of finite point sets: diam, spread, sweep and S.

Products are accumulated as sums of logarithms and exponentiated once at
the end.  ``sweep_exact`` and ``S_value`` are exact dynamic programmes
over subset bitmasks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import CapacityError, DomainError, PoleError

__all__ = [
    "PointSet",
    "Arborescence",
    "diameter",
    "spread_exact",
    "spread_greedy",
    "greedy_order",
    "sweep_exact",
    "sweep_greedy",
    "arborescence_value",
    "S_value",
    "S_log",
    "S_partition",
    "Generator",
    "MobiusMap",
    "mobius_apply",
    "mobius_jacobian",
    "random_mobius",
]


class PointSet:
    """Distinct points in R^d stored as an ``(n, d)`` float array."""

    def __init__(self, points, d: int | None = None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None] if d in (None, 1) else pts.reshape(-1, d)
        if pts.ndim != 2:
            raise DomainError("points must be an (n, d) array")
        if d is not None and pts.shape[1] != d:
            raise DomainError(f"expected dimension {d}, got {pts.shape[1]}")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise DomainError("duplicate points")
        self.points = pts

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)

    def scaled(self, lam: float) -> "PointSet":
        return PointSet(lam * self.points)

    def distances(self) -> np.ndarray:
        diff = self.points[:, None, :] - self.points[None, :, :]
        return np.sqrt(np.sum(diff * diff, axis=-1))


def _exp(x: float) -> float:
    """Exponentiate a log-space result; overflow gives ``inf`` instead of raising."""
    return math.exp(x) if x < 709.78 else math.inf


def _as_points(A) -> PointSet:
    return A if isinstance(A, PointSet) else PointSet(A)


@dataclass(frozen=True)
class Arborescence:
    root: int
    parent: dict = field(default_factory=dict)

    def encode(self) -> str:
        edges = ";".join(f"{c}>{p}" for c, p in sorted(self.parent.items()))
        return f"root={self.root};{edges}" if edges else f"root={self.root}"

    def children(self) -> dict:
        out: dict = {}
        for c, p in self.parent.items():
            out.setdefault(p, []).append(c)
        return out


def diameter(A) -> float:
    """Largest pairwise Euclidean distance (0 for a singleton)."""
    A = _as_points(A)
    if len(A) < 2:
        return 0.0
    return float(A.distances().max())


def _require_pairs(A: PointSet):
    if len(A) < 2:
        raise DomainError("need at least two points")


def spread_exact(A):
    """Minimum over spanning trees of the product of edge lengths; returns ``(value, edges)``.

    Kruskal on lengths (ties broken by ``(i, j)``); minimising the sum of
    logs and the plain weight give the same trees.
    """
    A = _as_points(A)
    _require_pairs(A)
    dist = A.distances()
    n = len(A)
    cand = sorted((dist[i, j], i, j) for i in range(n) for j in range(i + 1, n))
    parent = list(range(n))

    def root(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    edges, logsum = [], 0.0
    for w, i, j in cand:
        ri, rj = root(i), root(j)
        if ri != rj:
            parent[rj] = ri
            edges.append((i, j))
            logsum += math.log(w)
            if len(edges) == n - 1:
                break
    return _exp(logsum), edges


def greedy_order(A) -> tuple[list[int], list[int]]:
    """Farthest-point insertion order from point 0 and each point's nearest predecessor."""
    A = _as_points(A)
    dist = A.distances()
    n = len(A)
    order, near = [0], [-1]
    best = dist[0].copy()
    closest = np.zeros(n, dtype=int)
    placed = np.zeros(n, dtype=bool)
    placed[0] = True
    for _ in range(n - 1):
        cand = np.where(placed, -1.0, best)
        i = int(np.argmax(cand))  # first index on ties
        order.append(i)
        near.append(int(closest[i]))
        placed[i] = True
        upd = dist[i] < best
        best = np.where(upd, dist[i], best)
        closest = np.where(upd, i, closest)
    return order, near


def spread_greedy(A) -> float:
    """``prod_i d(x_i, {x_1..x_{i-1}})`` along the farthest-point order."""
    A = _as_points(A)
    _require_pairs(A)
    order, near = greedy_order(A)
    dist = A.distances()
    return _exp(sum(math.log(dist[order[i], near[i]]) for i in range(1, len(order))))


def arborescence_value(A, tree: Arborescence) -> float:
    """``prod_x diam(A_x)`` for a given arborescence."""
    A = _as_points(A)
    n = len(A)
    kids = tree.children()
    desc: dict = {}

    def collect(x):
        out = [x]
        for c in kids.get(x, []):
            out.extend(collect(c))
        desc[x] = out
        return out

    collect(tree.root)
    if len(desc) != n:
        raise DomainError("arborescence does not span the point set")
    logsum = 0.0
    for x in range(n):
        members = list(desc[x]) + ([tree.parent[x]] if x in tree.parent else [])
        if x == tree.root:
            members = list(range(n))
        logsum += math.log(diameter(A.points[members]))
    return _exp(logsum)


def sweep_greedy(A) -> float:
    """Sweep of the farthest-point arborescence (each point under its nearest predecessor)."""
    A = _as_points(A)
    _require_pairs(A)
    order, near = greedy_order(A)
    parent = {order[i]: near[i] for i in range(1, len(order))}
    return arborescence_value(A, Arborescence(order[0], parent))


# --------------------------------------------------------------------------
# subset dynamic programmes


@njit(cache=True)
def _log_subset_diam(dist):
    n = dist.shape[0]
    out = np.full(1 << n, -np.inf)
    for m in range(1, 1 << n):
        hb = 0
        while (m >> (hb + 1)) != 0:
            hb += 1
        rest = m ^ (1 << hb)
        best = out[rest] if rest else -np.inf
        for j in range(n):
            if (rest >> j) & 1:
                lv = math.log(dist[hb, j])
                if lv > best:
                    best = lv
        out[m] = best
    return out


@njit(cache=True)
def _sweep_dp(dist):
    n = dist.shape[0]
    full = (1 << n) - 1
    ld = _log_subset_diam(dist)
    f = np.full((1 << n, n), np.inf)
    g = np.full((1 << n, n), np.inf)
    fc = -np.ones((1 << n, n), dtype=np.int64)
    gb = -np.ones((1 << n, n), dtype=np.int64)
    for p in range(n):
        g[0, p] = 0.0
    for M in range(1, full + 1):
        for p in range(n):
            if (M >> p) & 1:
                continue
            # subtree on M hanging below p, rooted at c
            base = ld[M | (1 << p)]
            for c in range(n):
                if (M >> c) & 1:
                    v = base + g[M ^ (1 << c), c]
                    if v < f[M, p]:
                        f[M, p] = v
                        fc[M, p] = c
            # forest on M whose trees all hang below p
            low = M & -M
            R = M ^ low
            s = R
            while True:
                B = s | low
                v = f[B, p] + g[M ^ B, p]
                if v < g[M, p]:
                    g[M, p] = v
                    gb[M, p] = B
                if s == 0:
                    break
                s = (s - 1) & R
    best = np.inf
    root = -1
    for r in range(n):
        v = ld[full] + g[full ^ (1 << r), r]
        if v < best:
            best = v
            root = r
    return best, root, fc, gb


def sweep_exact(A, max_n: int = 8):
    """Exact sweep and a minimising arborescence.

    Dynamic programme: a subtree ``S`` hanging below an outside parent ``p``
    contributes ``diam(S + p)`` times the best forest on ``S - c`` below its
    root ``c``; forests split off the block holding their lowest point.
    """
    A = _as_points(A)
    _require_pairs(A)
    n = len(A)
    if n > max_n:
        raise CapacityError(f"|A|={n} exceeds max_n={max_n}; use sweep_greedy for an upper bound")
    best, root, fc, gb = _sweep_dp(A.distances())
    parent: dict = {}

    def forest(M, p):
        while M:
            B = int(gb[M, p])
            c = int(fc[B, p])
            parent[c] = p
            forest(B ^ (1 << c), c)
            M ^= B

    root = int(root)
    forest(((1 << n) - 1) ^ (1 << root), root)
    return _exp(best), Arborescence(root, parent)


@njit(cache=True)
def _S_dp(dist):
    n = dist.shape[0]
    full = (1 << n) - 1
    logS = np.full(1 << n, np.inf)
    arg1 = np.zeros(1 << n, dtype=np.int64)
    arg2 = np.zeros(1 << n, dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            logS[(1 << i) | (1 << j)] = 2.0 * math.log(dist[i, j])
    for M in range(1, full + 1):
        cnt = 0
        t = M
        while t:
            t &= t - 1
            cnt += 1
        if cnt < 3:
            continue
        low = M & -M
        R = M ^ low
        s = R
        while True:
            A1 = low | s
            rest = R ^ s
            # rest must hold at least two points (A2 and A3 nonempty)
            if rest != 0 and (rest & (rest - 1)) != 0:
                low2 = rest & -rest
                R2 = rest ^ low2
                s2 = R2
                while True:
                    if s2 != R2:
                        A2 = low2 | s2
                        A3 = R2 ^ s2
                        v = 0.5 * (logS[A1 | A2] + logS[A2 | A3] + logS[A3 | A1])
                        if v < logS[M]:
                            logS[M] = v
                            arg1[M] = A1
                            arg2[M] = A2
                    if s2 == 0:
                        break
                    s2 = (s2 - 1) & R2
            if s == 0:
                break
            s = (s - 1) & R
    return logS[full], arg1[full], arg2[full]


def _S_log_partition(A, max_n):
    A = _as_points(A)
    _require_pairs(A)
    n = len(A)
    if n > max_n:
        raise CapacityError(f"|A|={n} exceeds the S cap {max_n}")
    if n == 2:
        return 2.0 * math.log(float(A.distances()[0, 1])), None
    logS, a1, a2 = _S_dp(A.distances())
    a1, a2 = int(a1), int(a2)
    a3 = ((1 << n) - 1) ^ a1 ^ a2
    parts = tuple(tuple(i for i in range(n) if (m >> i) & 1) for m in (a1, a2, a3))
    return float(logS), parts


def S_partition(A, max_n: int = 14):
    """``S(A)`` and the top-level minimising tripartition as index tuples."""
    logS, parts = _S_log_partition(A, max_n)
    return _exp(logS), parts


def S_log(A, max_n: int = 14) -> float:
    """``log S(A)``, finite even where ``S(A)`` itself overflows."""
    return _S_log_partition(A, max_n)[0]


def S_value(A, max_n: int = 14) -> float:
    """Recursive Mobius-covariant functional: ``S({x,y}) = |x-y|^2`` and
    ``S(A) = min sqrt(S(A1+A2) S(A2+A3) S(A3+A1))`` over tripartitions."""
    return S_partition(A, max_n)[0]


# --------------------------------------------------------------------------
# Mobius maps


@dataclass(frozen=True)
class Generator:
    """One of ``translate`` (vector), ``orthogonal`` (matrix), ``dilate`` (scalar), ``invert``."""

    kind: str
    param: object = None

    def __post_init__(self):
        if self.kind not in ("translate", "orthogonal", "dilate", "invert"):
            raise DomainError(f"unknown generator {self.kind!r}")
        if self.kind == "dilate" and not float(self.param) > 0:
            raise DomainError("dilation factor must be positive")
        if self.kind == "orthogonal":
            Q = np.asarray(self.param, dtype=float)
            if not np.allclose(Q.T @ Q, np.eye(len(Q)), atol=1e-12, rtol=0):
                raise DomainError("matrix is not orthogonal to 1e-12")


@dataclass(frozen=True)
class MobiusMap:
    word: tuple = ()

    def __call__(self, x):
        return mobius_apply(self, x)


def _step(gen: Generator, x: np.ndarray, index: int):
    d = len(x)
    if gen.kind == "translate":
        return x + np.asarray(gen.param, dtype=float), 0.0
    if gen.kind == "orthogonal":
        return np.asarray(gen.param, dtype=float) @ x, 0.0
    if gen.kind == "dilate":
        lam = float(gen.param)
        return lam * x, d * math.log(lam)
    r2 = float(np.dot(x, x))
    if r2 == 0.0:
        raise PoleError(index)
    return x / r2, -d * math.log(r2)


def _orbit(m: MobiusMap, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    logjac = 0.0
    for i, gen in enumerate(m.word):
        x, lj = _step(gen, x, i)
        logjac += lj
    return x, logjac


def mobius_apply(m: MobiusMap, x) -> np.ndarray:
    """Apply the generators left to right."""
    return _orbit(m, x)[0]


def mobius_jacobian(m: MobiusMap, x) -> float:
    """``|det D psi(x)|``: product of generator Jacobian magnitudes along the orbit."""
    return math.exp(_orbit(m, x)[1])


def random_mobius(rng: np.random.Generator, d: int, n_generators: int) -> MobiusMap:
    """Random word of ``n_generators`` generators (for covariance checks)."""
    word = []
    for _ in range(n_generators):
        kind = rng.choice(["translate", "orthogonal", "dilate", "invert"])
        if kind == "translate":
            word.append(Generator("translate", rng.normal(size=d)))
        elif kind == "orthogonal":
            q, r = np.linalg.qr(rng.normal(size=(d, d)))
            word.append(Generator("orthogonal", q * np.sign(np.diag(r))))
        elif kind == "dilate":
            word.append(Generator("dilate", float(np.exp(rng.uniform(-1, 1)))))
        else:
            word.append(Generator("invert"))
    return MobiusMap(tuple(word))
