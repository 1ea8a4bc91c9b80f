"""Power-law percolation kernels, cut-offs and edge probabilities.

The canonical kernel is ``J(s) = s**-(d+alpha) / (d+alpha)``, so that
``|J'(s)| = s**-(d+alpha+1)`` exactly.  Distances are measured in a norm
rescaled so that its unit ball has unit Lebesgue volume.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError

__all__ = [
    "Norm",
    "Kernel",
    "kernel_value",
    "cutoff_value",
    "edge_probability",
    "unit_ball_volume",
    "ball_count",
]


class Norm(str, Enum):
    EUCLIDEAN = "euclidean"
    SUP = "sup"
    ONE = "one"


def unit_ball_volume(d: int, base: Norm | str) -> float:
    """Lebesgue volume of the unit ball of the unscaled base norm in R^d."""
    base = Norm(base)
    if d == 1:
        return 2.0  # every base norm is |x|; the gamma formula is off by one ulp here
    if base is Norm.EUCLIDEAN:
        return math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    if base is Norm.SUP:
        return 2.0**d
    return 2.0**d / math.factorial(d)


@dataclass(frozen=True)
class Kernel:
    """Translation-invariant kernel ``J(x, y) = J(||x - y||)``.

    ``nearest_neighbour=True`` gives the degenerate adjacency kernel
    (``J = 1`` on lattice neighbours, zero elsewhere); it ignores ``alpha``
    and cut-offs.
    """

    d: int = 1
    alpha: float = 0.6
    norm_base: Norm = Norm.EUCLIDEAN
    nearest_neighbour: bool = False

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.d}")
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        object.__setattr__(self, "norm_base", Norm(self.norm_base))

    @property
    def c_prime(self) -> float:
        return 1.0

    @property
    def norm_scale(self) -> float:
        return unit_ball_volume(self.d, self.norm_base) ** (1.0 / self.d)

    @property
    def exponent(self) -> float:
        return self.d + self.alpha

    def norm(self, v) -> np.ndarray | float:
        """Scaled norm of lattice vector(s); the last axis indexes coordinates."""
        v = np.asarray(v, dtype=float)
        if v.ndim == 0:
            v = v[None]
        if self.norm_base is Norm.EUCLIDEAN:
            base = np.sqrt(np.sum(v * v, axis=-1))
        elif self.norm_base is Norm.SUP:
            base = np.max(np.abs(v), axis=-1)
        else:
            base = np.sum(np.abs(v), axis=-1)
        return self.norm_scale * base

    def derivative_magnitude(self, s: float) -> float:
        """``|J'(s)|``."""
        if not s > 0:
            raise DomainError(f"distance must be positive, got {s}")
        return s ** (-self.exponent - 1.0)


def _check_distance(s):
    s = np.asarray(s, dtype=float)
    if np.any(~(s > 0)):
        raise DomainError("distance must be positive")
    return s


def kernel_value(k: Kernel, s):
    """``J(s) = s^{-(d+alpha)} / (d+alpha)``; vectorised over ``s``."""
    s = _check_distance(s)
    out = s ** (-k.exponent) / k.exponent
    return float(out) if out.ndim == 0 else out


def cutoff_value(k: Kernel, s, r):
    """Cut-off kernel ``J_r(s) = int_s^r |J'(t)| dt`` for ``s <= r``, else 0.

    ``r = inf`` returns the uncut kernel.
    """
    s = _check_distance(s)
    if not r > 0:
        raise DomainError(f"cut-off must be positive, got {r}")
    if math.isinf(r):
        out = s ** (-k.exponent) / k.exponent
    else:
        out = np.where(s <= r, (s ** (-k.exponent) - r ** (-k.exponent)) / k.exponent, 0.0)
        out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def edge_probability(k: Kernel, beta: float, s, r: float = math.inf):
    """Probability ``1 - exp(-beta * J_r(s))`` that a pair at distance ``s`` is open."""
    if not beta >= 0:
        raise DomainError(f"beta must be nonnegative, got {beta}")
    if k.nearest_neighbour:
        s = _check_distance(s)
        out = np.where(np.isclose(s, k.norm_scale), -np.expm1(-beta), 0.0)
        return float(out) if out.ndim == 0 else out
    out = -np.expm1(-beta * np.asarray(cutoff_value(k, s, r)))
    return float(out) if out.ndim == 0 else out


def ball_count(k: Kernel, r: float) -> int:
    """``|B_r| = #{x in Z^d : ||x|| <= r}`` by direct enumeration."""
    if r < 0:
        return 0
    m = int(math.floor(r / k.norm_scale))
    if k.d == 1:
        return 2 * m + 1
    axis = np.arange(-m, m + 1)
    if k.d == 2:
        x, y = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([x.ravel(), y.ravel()], axis=-1)
        return int(np.count_nonzero(k.norm(pts) <= r * (1 + 1e-12)))
    # higher d: slice along the first axis to bound memory
    total = 0
    rest = Kernel(k.d - 1, k.alpha, k.norm_base)
    for x0 in axis:
        if k.norm_base is Norm.EUCLIDEAN:
            rem = (r / k.norm_scale) ** 2 - x0 * x0
            if rem < 0:
                continue
            total += ball_count(rest, math.sqrt(rem) * rest.norm_scale)
        elif k.norm_base is Norm.SUP:
            total += (2 * m + 1) ** (k.d - 1)
        else:
            rem = r / k.norm_scale - abs(x0)
            total += ball_count(rest, rem * rest.norm_scale)
    return total
