"""Finite-box configurations of long-range percolation.

Edges are sampled one displacement class at a time: every unordered pair
``{x, x+v}`` in the box shares the same open probability, so a class is a
single Binomial(count, p) draw followed by a uniform choice of which pairs
are open.  Each class reads its own counter-based stream keyed by the
displacement itself, so the output depends only on ``(seed, replica)`` and
the model parameters.

In coupled mode (the default) the count is the exact binomial quantile of
one uniform and the open pairs are the first ``K`` distinct entries of a
fixed random sequence.  For a fixed seed the open-edge set is then
nondecreasing in ``beta`` and in ``r_cut``.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numba import njit

from .binomial import binomial_draw, binomial_quantile
from .errors import CapacityError, ConfigError, DomainError
from .kernel import Kernel, edge_probability
from .rng import derive, seed_key, uniform

__all__ = [
    "Boundary",
    "BoxSpec",
    "DisplacementClass",
    "ClassTable",
    "Configuration",
    "displacement_classes",
    "class_table",
    "sample_configuration",
    "cluster_queries",
    "dump_configuration",
    "MAX_VERTICES",
]

MAX_VERTICES = 1 << 28


class Boundary(str, Enum):
    FREE = "free"
    TORUS = "torus"


@dataclass(frozen=True)
class BoxSpec:
    d: int
    side: int
    boundary: Boundary = Boundary.FREE

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if self.side < 2:
            raise ConfigError(f"box side must be >= 2, got {self.side}")
        if self.d < 1:
            raise ConfigError(f"dimension must be >= 1, got {self.d}")
        if self.side**self.d > MAX_VERTICES:
            raise CapacityError(f"box with {self.side}^{self.d} vertices exceeds {MAX_VERTICES}")

    @property
    def n_vertices(self) -> int:
        return self.side**self.d

    @property
    def origin(self) -> tuple[int, ...]:
        return (self.side // 2,) * self.d

    def index(self, x) -> int:
        """Vertex index of lattice point ``x`` given relative to the origin."""
        x = np.atleast_1d(np.asarray(x, dtype=np.int64)) + self.side // 2
        if x.shape != (self.d,) or np.any(x < 0) or np.any(x >= self.side):
            raise DomainError(f"point {x - self.side // 2} outside the box")
        return int(np.sum(x * self.side ** np.arange(self.d)))

    def coords(self, idx) -> np.ndarray:
        """Coordinates relative to the origin of vertex index/indices ``idx``."""
        idx = np.asarray(idx, dtype=np.int64)
        out = np.empty(idx.shape + (self.d,), dtype=np.int64)
        rem = idx.copy()
        for i in range(self.d):
            out[..., i] = rem % self.side - self.side // 2
            rem //= self.side
        return out


@dataclass(frozen=True)
class DisplacementClass:
    displacement: tuple[int, ...]
    pair_count: int
    probability: float


@dataclass
class ClassTable:
    """Array form of the class list, as consumed by the numba kernels."""

    disp: np.ndarray  # (C, d) int64
    width: np.ndarray  # (C, d) int64, mixed radix of the pair index
    lo: np.ndarray  # (C, d) int64, first coordinate of the lower endpoint
    count: np.ndarray  # (C,) int64
    prob: np.ndarray  # (C,) float64
    ident: np.ndarray  # (C,) uint64, stream index of the displacement
    distance: np.ndarray  # (C,) float64
    side: int
    d: int
    wrap: bool

    def __len__(self):
        return len(self.count)

    @property
    def expected_edges(self) -> float:
        return float(np.dot(self.count, self.prob))

    @property
    def edge_variance(self) -> float:
        return float(np.dot(self.count, self.prob * (1.0 - self.prob)))


def _free_displacements(d, L):
    axis = np.arange(-(L - 1), L, dtype=np.int64)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    v = np.stack([g.ravel() for g in grids], axis=-1)
    # canonical half: first nonzero coordinate positive
    keep = np.zeros(len(v), dtype=bool)
    decided = np.zeros(len(v), dtype=bool)
    for i in range(d):
        pos = ~decided & (v[:, i] > 0)
        keep |= pos
        decided |= v[:, i] != 0
    return v[keep]


def _torus_displacements(d, L):
    half = L // 2
    axis = np.arange(half - L + 1, half + 1, dtype=np.int64)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    v = np.stack([g.ravel() for g in grids], axis=-1)
    v = v[np.any(v != 0, axis=1)]
    w = np.mod(-v - (half - L + 1), L) + (half - L + 1)  # negation, same range
    # keep v if v >= w lexicographically
    keep = np.zeros(len(v), dtype=bool)
    decided = np.zeros(len(v), dtype=bool)
    for i in range(d):
        keep |= ~decided & (v[:, i] > w[:, i])
        decided |= v[:, i] != w[:, i]
    keep |= ~decided  # self-antipodal
    return v[keep], ~decided[keep]


def class_table(k: Kernel, beta: float, box: BoxSpec, r_cut: float = math.inf) -> ClassTable:
    """All displacement classes with positive probability, as arrays."""
    if not beta >= 0:
        raise DomainError(f"beta must be nonnegative, got {beta}")
    if not r_cut > 0:
        raise DomainError(f"r_cut must be positive, got {r_cut}")
    if k.d != box.d:
        raise ConfigError(f"kernel dimension {k.d} != box dimension {box.d}")
    d, L = box.d, box.side
    if d > 1 and (2 * L - 1) ** d > 50_000_000:
        raise CapacityError("displacement enumeration too large for this box")
    if box.boundary is Boundary.FREE:
        v = _free_displacements(d, L)
        anti = np.zeros(len(v), dtype=bool)
    else:
        v, anti = _torus_displacements(d, L)
    if k.nearest_neighbour:
        v_keep = np.sum(np.abs(v), axis=1) == 1
        v, anti = v[v_keep], anti[v_keep]
    dist = np.atleast_1d(k.norm(v))
    prob = np.atleast_1d(edge_probability(k, beta, dist, r_cut)) if len(v) else np.zeros(0)
    sel = prob > 0
    v, anti, dist, prob = v[sel], anti[sel], dist[sel], prob[sel]

    if box.boundary is Boundary.FREE:
        width = L - np.abs(v)
        lo = np.maximum(0, -v)
    else:
        width = np.full_like(v, L)
        lo = np.zeros_like(v)
        for c in np.flatnonzero(anti):
            first = int(np.flatnonzero(v[c])[0])
            width[c, first] = L // 2
    count = np.prod(width, axis=1).astype(np.int64)
    ident = np.zeros(len(v), dtype=np.uint64)
    base = np.uint64(2 * L - 1)
    for i in range(d - 1, -1, -1):
        ident = ident * base + (v[:, i] + (L - 1)).astype(np.uint64)
    order = np.lexsort((ident, dist))  # nearest classes first
    return ClassTable(
        disp=np.ascontiguousarray(v[order]),
        width=np.ascontiguousarray(width[order]),
        lo=np.ascontiguousarray(lo[order]),
        count=count[order],
        prob=prob[order].astype(np.float64),
        ident=ident[order],
        distance=dist[order],
        side=L,
        d=d,
        wrap=box.boundary is Boundary.TORUS,
    )


def displacement_classes(k: Kernel, beta: float, box: BoxSpec, r_cut: float = math.inf):
    """Duplicate-free list of :class:`DisplacementClass` with ``||v|| <= r_cut``.

    With ``beta == 0`` every pair has probability zero; the classes within
    range are still listed (with probability 0) so the geometry can be
    inspected.
    """
    table = class_table(k, beta if beta > 0 else 1.0, box, r_cut)
    probs = table.prob if beta > 0 else np.zeros_like(table.prob)
    return [
        DisplacementClass(tuple(int(a) for a in table.disp[c]), int(table.count[c]), float(probs[c]))
        for c in range(len(table))
    ]


# --------------------------------------------------------------------------
# numba core


@njit(inline="always", cache=True)
def find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(inline="always", cache=True)
def _union(parent, size, a, b):
    ra = find(parent, a)
    rb = find(parent, b)
    if ra == rb:
        return 0
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]
    return 1


@njit(inline="always", cache=True)
def _endpoints(j, c, disp, width, lo, L, d, wrap):
    u = 0
    v = 0
    mult = 1
    for i in range(d):
        w = width[c, i]
        t = j % w
        j //= w
        x = lo[c, i] + t
        y = x + disp[c, i]
        if wrap:
            y %= L
            if y < 0:
                y += L
        u += x * mult
        v += y * mult
        mult *= L
    return u, v


@njit(cache=True)
def build_configuration(key, disp, width, lo, count, prob, ident, L, d, wrap, coupled,
                        parent, size, stamp, edges):
    """Sample one configuration into ``parent``/``size`` (reinitialised here).

    ``stamp`` is scratch of length >= max(count), zero on entry.  When
    ``edges`` has rows, open edges are recorded until it is full.  Returns
    ``(open_edges, merges)``.
    """
    N = parent.shape[0]
    for x in range(N):
        parent[x] = x
        size[x] = 1
    cap = edges.shape[0]
    n_open = 0
    merges = 0
    for c in range(count.shape[0]):
        n = count[c]
        p = prob[c]
        ck = derive(key, ident[c])
        pk = derive(ck, np.uint64(1))
        mark = c + 1
        if coupled:
            K = binomial_quantile(n, p, uniform(ck, np.uint64(0)))
            got = 0
            ctr = np.uint64(0)
            while got < K:
                j = int(uniform(pk, ctr) * n)
                ctr += np.uint64(1)
                if j >= n:
                    j = n - 1
                if stamp[j] == mark:
                    continue
                stamp[j] = mark
                got += 1
                a, b = _endpoints(j, c, disp, width, lo, L, d, wrap)
                if n_open < cap:
                    edges[n_open, 0] = a
                    edges[n_open, 1] = b
                n_open += 1
                merges += _union(parent, size, a, b)
        else:
            K, _ = binomial_draw(n, p, ck, np.uint64(0))
            # Floyd's algorithm for a uniform K-subset of [0, n)
            ctr = np.uint64(0)
            for t in range(n - K, n):
                j = int(uniform(pk, ctr) * (t + 1))
                ctr += np.uint64(1)
                if j > t:
                    j = t
                if stamp[j] == mark:
                    j = t
                stamp[j] = mark
                a, b = _endpoints(j, c, disp, width, lo, L, d, wrap)
                if n_open < cap:
                    edges[n_open, 0] = a
                    edges[n_open, 1] = b
                n_open += 1
                merges += _union(parent, size, a, b)
    for x in range(N):
        parent[x] = find(parent, x)  # full compression: parent[x] is the root
    return n_open, merges


@njit(cache=True)
def _clear_stamp(stamp):
    for i in range(stamp.shape[0]):
        stamp[i] = 0


def replica_key(seed: int, replica: int) -> np.uint64:
    return np.uint64(derive(seed_key(seed), np.uint64(replica)))


def scratch(table: ClassTable, n_vertices: int):
    """Allocate (parent, size, stamp) arrays for one configuration."""
    try:
        parent = np.empty(n_vertices, dtype=np.int64)
        size = np.empty(n_vertices, dtype=np.int64)
        stamp = np.zeros(max(int(table.count.max(initial=1)), 1), dtype=np.int64)
    except MemoryError as exc:  # pragma: no cover - depends on the host
        raise CapacityError(f"cannot allocate a box of {n_vertices} vertices") from exc
    return parent, size, stamp


# --------------------------------------------------------------------------
# Python-facing configuration


@dataclass
class Configuration:
    """One sampled configuration on a finite box."""

    box: BoxSpec
    kernel: Kernel
    beta: float
    r_cut: float
    seed: int
    replica: int
    open_edge_count: int
    merged_count: int
    roots: np.ndarray  # root label per vertex
    sizes: np.ndarray  # size of each vertex's component
    edges: np.ndarray = field(repr=False)  # (open_edge_count, 2) vertex indices

    @property
    def cluster_sizes(self) -> np.ndarray:
        """Sizes of all components (one entry per component, descending)."""
        is_root = self.roots == np.arange(len(self.roots))
        return np.sort(self.sizes[is_root])[::-1]

    def _vertex(self, x) -> int:
        if isinstance(x, (int, np.integer)) and self.box.d > 1:
            raise DomainError("give lattice coordinates for d > 1")
        return self.box.index(x)

    def cluster_of(self, x=None) -> int:
        """Size of the component containing ``x`` (coordinates relative to the origin)."""
        if x is None:
            x = (0,) * self.box.d
        return int(self.sizes[self._vertex(x)])

    def connected(self, x, y) -> bool:
        return bool(self.roots[self._vertex(x)] == self.roots[self._vertex(y)])

    def ball_vertices(self, r: float) -> np.ndarray:
        """Vertex indices in ``B_r`` (scaled norm) around the origin, within the box."""
        m = int(math.floor(r / self.kernel.norm_scale))
        L, half = self.box.side, self.box.side // 2
        axis = np.arange(max(-m, -half), min(m, L - 1 - half) + 1)
        grids = np.meshgrid(*([axis] * self.box.d), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        pts = pts[np.atleast_1d(self.kernel.norm(pts)) <= r * (1 + 1e-12)]
        return np.sum((pts + half) * L ** np.arange(self.box.d), axis=1)

    def max_cluster_in_ball(self, r: float) -> int:
        """``max_x |K_x cap B_r|`` around the origin."""
        if r < 0:
            raise DomainError("radius must be nonnegative")
        idx = self.ball_vertices(r)
        if len(idx) == 0:
            return 0
        _, counts = np.unique(self.roots[idx], return_counts=True)
        return int(counts.max())

    def size_histogram(self) -> Counter:
        return Counter(int(s) for s in self.cluster_sizes)


def sample_configuration(k: Kernel, beta: float, r_cut: float, box: BoxSpec, seed: int,
                         replica: int = 0, coupled: bool = True) -> Configuration:
    """Sample the configuration for ``(seed, replica)`` and record its open edges."""
    table = class_table(k, beta, box, r_cut)
    parent, size, stamp = scratch(table, box.n_vertices)
    key = replica_key(seed, replica)
    cap = int(table.expected_edges + 10 * math.sqrt(table.edge_variance + 1) + 16)
    while True:
        try:
            edges = np.empty((cap, 2), dtype=np.int64)
        except MemoryError as exc:  # pragma: no cover
            raise CapacityError("edge buffer allocation failed") from exc
        _clear_stamp(stamp)
        n_open, merges = build_configuration(
            key, table.disp, table.width, table.lo, table.count, table.prob, table.ident,
            table.side, table.d, table.wrap, coupled, parent, size, stamp, edges)
        if n_open <= cap:
            break
        cap = n_open
    roots = parent.copy()
    return Configuration(
        box=box, kernel=k, beta=beta, r_cut=r_cut, seed=int(seed), replica=int(replica),
        open_edge_count=int(n_open), merged_count=int(merges), roots=roots,
        sizes=size[roots], edges=edges[:n_open].copy(),
    )


def configuration_from_edges(k: Kernel, box: BoxSpec, edges, beta=0.0, r_cut=math.inf, seed=0):
    """Build a Configuration from an explicit edge list (for hand-made cases)."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    parent = np.arange(box.n_vertices)
    size = np.ones(box.n_vertices, dtype=np.int64)
    merges = 0
    for a, b in edges:
        merges += _union(parent, size, int(a), int(b))
    for x in range(box.n_vertices):
        parent[x] = find(parent, x)
    return Configuration(box=box, kernel=k, beta=beta, r_cut=r_cut, seed=seed, replica=0,
                         open_edge_count=len(edges), merged_count=merges, roots=parent,
                         sizes=size[parent], edges=edges)


def cluster_queries(c: Configuration, r: float | None = None, vertex=None) -> dict:
    """Origin/vertex cluster size, largest cluster inside ``B_r`` and the size histogram."""
    if r is None:
        r = c.box.side * c.kernel.norm_scale
    return {
        "cluster_of": c.cluster_of(vertex),
        "max_cluster_in_ball": c.max_cluster_in_ball(r),
        "histogram": c.size_histogram(),
    }


def dump_configuration(c: Configuration, fh) -> None:
    """Write the open-edge list as ``u v`` lines after a ``#`` header."""
    r = "inf" if math.isinf(c.r_cut) else repr(float(c.r_cut))
    fh.write(f"# d={c.box.d} L={c.box.side} boundary={c.box.boundary.value} "
             f"alpha={c.kernel.alpha!r} beta={float(c.beta)!r} r_cut={r} seed={c.seed} "
             f"replica={c.replica}\n")
    for a, b in c.edges:
        fh.write(f"{a} {b}\n")
