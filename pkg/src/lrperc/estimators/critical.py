"""Locating beta_c by finite-size crossings of the largest-cluster diagnostic."""
from __future__ import annotations

import math

import numpy as np

from ..errors import BracketError, ConfigError
from ..kernel import Kernel
from ..rng import derive, seed_key
from . import _kernels as K
from .montecarlo import _Model
from .series import CriticalPoint

Z95 = 1.959963984540054


def _size_seed(seed: int, L: int) -> int:
    return int(derive(seed_key(seed), np.uint64(0x5EED0000 + L)))


def diagnostic_exponent(k: Kernel) -> tuple[float, bool]:
    """Scaling exponent of the largest cluster and whether it is the low-dimensional one."""
    if k.d < 3 * k.alpha:
        return (k.d + k.alpha) / 2, True
    return float(k.d), False


class Diagnostic:
    """``median(max cluster) * (L * norm_scale)^(-exponent)`` with a cache over (L, beta)."""

    def __init__(self, k: Kernel, samples: int, seed: int, boundary="free"):
        self.kernel = k
        self.samples = int(samples)
        self.seed = int(seed)
        self.boundary = boundary
        self.exponent, self.low_dim = diagnostic_exponent(k)
        self.cache: dict[tuple[int, float], tuple[float, float]] = {}

    def __call__(self, L: int, beta: float) -> tuple[float, float]:
        """Return ``(value, stderr)``."""
        key = (int(L), float(beta))
        if key not in self.cache:
            model = _Model(self.kernel, beta, math.inf, L, self.boundary)
            maxes = np.sort(model.run(K.largest_cluster, _size_seed(self.seed, L), self.samples))
            n = len(maxes)
            scale = (L * self.kernel.norm_scale) ** (-self.exponent)
            half = Z95 * math.sqrt(n) / 2
            lo = maxes[max(0, int(math.floor(n / 2 - half)))]
            hi = maxes[min(n - 1, int(math.ceil(n / 2 + half)))]
            self.cache[key] = (float(np.median(maxes)) * scale, (hi - lo) / (2 * Z95) * scale)
        return self.cache[key]


def _crossing(diag: Diagnostic, L1: int, L2: int, lo: float, hi: float, tol: float):
    def g(beta):
        a, sa = diag(L1, beta)
        b, sb = diag(L2, beta)
        return b - a, math.hypot(sa, sb)

    if not (g(lo)[0] < 0 < g(hi)[0]):
        raise BracketError(f"no crossing of sizes {L1},{L2} inside [{lo}, {hi}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid)[0] < 0:
            lo = mid
        else:
            hi = mid
    beta = 0.5 * (lo + hi)
    # statistical error: stderr of g over its local slope
    delta = max(10 * tol, 0.02 * beta)
    slope = (g(beta + delta)[0] - g(beta - delta)[0]) / (2 * delta)
    sig = g(beta)[1]
    err = sig / slope if slope > 0 else math.inf
    return beta, err


def locate_beta_c(k: Kernel, sizes, beta_bracket, tolerance: float, samples: int, seed: int,
                  boundary="free") -> CriticalPoint:
    """Crossing of ``beta -> median(max cluster) * (L c)^{-(d+alpha)/2}`` for consecutive sizes.

    Each crossing is bisected to ``tolerance``; ``beta_hat`` is their mean and
    the uncertainty combines half the spread of the crossings with their
    propagated statistical errors.  For ``d >= 3 alpha`` the diagnostic falls
    back to the largest-cluster fraction ``|K_max| / L^d`` and the method
    string says so.
    """
    sizes = sorted(int(s) for s in sizes)
    if len(sizes) < 3:
        raise ConfigError("need at least three box sizes")
    ratios = [b / a for a, b in zip(sizes, sizes[1:])]
    if max(ratios) - min(ratios) > 1e-9 * max(ratios):
        raise ConfigError(f"sizes {sizes} are not a geometric progression")
    lo, hi = (float(b) for b in beta_bracket)
    if not 0 <= lo < hi:
        raise ConfigError(f"bad bracket {beta_bracket}")
    diag = Diagnostic(k, samples, seed, boundary)
    for L in sizes:
        if not (diag(L, lo)[0] < 0.05 and diag(L, hi)[0] > 0.5):
            raise BracketError(
                f"bracket [{lo}, {hi}] does not straddle the transition at L={L}: "
                f"diagnostic {diag(L, lo)[0]:.3g} .. {diag(L, hi)[0]:.3g}")
    crossings, errors = [], []
    for L1, L2 in zip(sizes, sizes[1:]):
        c, e = _crossing(diag, L1, L2, lo, hi, tolerance)
        crossings.append(c)
        errors.append(e)
    beta_hat = float(np.mean(crossings))
    spread = (max(crossings) - min(crossings)) / 2
    stat = math.sqrt(sum(e * e for e in errors)) / len(errors)
    unc = max(math.hypot(spread, stat), tolerance)
    if diag.low_dim:
        method = f"max-cluster crossing, scale (L*c)^-{diag.exponent:g}"
    else:
        method = "largest-cluster fraction crossing (d >= 3 alpha; lower confidence)"
    return CriticalPoint(beta_hat, unc, method, tuple(sizes), tuple(crossings), tuple(errors))
