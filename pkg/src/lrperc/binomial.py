"""Exact binomial variates driven by counter-based streams.

Two entry points:

* :func:`binomial_draw` -- inversion for small mean, BTPE rejection
  (Kachitvichyanukul & Schmeiser 1988) otherwise.  Fast, not monotone in p.
* :func:`binomial_quantile` -- exact inverse CDF at a supplied uniform, so
  that a shared uniform gives counts nondecreasing in ``p``.  Used by the
  coupled sampler.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .errors import DomainError
from .rng import RngStream, uniform

INVERSION_MEAN_CUTOFF = 30.0


@njit(cache=True)
def _inversion(n, p, u):
    # sequential search from 0; caller guarantees (1-p)^n does not underflow
    q = 1.0 - p
    ratio = p / q
    f = math.exp(n * math.log1p(-p))
    F = f
    k = 0
    while u > F and k < n:
        k += 1
        f *= (n - k + 1) / k * ratio
        F += f
        if f < 1e-18 * F and k > n * p:
            break
    return k


@njit(cache=True)
def binomial_quantile(n, p, u):
    """Smallest ``k`` with ``P(Bin(n, p) <= k) >= u``."""
    if n <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return n
    lam = -math.log1p(-p)
    if n * lam < 500.0:
        return _inversion(n, p, u)
    ratio = p / (1.0 - p)
    m = int(math.floor((n + 1) * p))
    if m > n:
        m = n
    logpm = (math.lgamma(n + 1.0) - math.lgamma(m + 1.0) - math.lgamma(n - m + 1.0)
             + m * math.log(p) - (n - m) * lam)
    pm = math.exp(logpm)
    # cdf at the mode, summed downward until negligible
    F = pm
    f = pm
    k = m
    while k > 0:
        f *= k / ((n - k + 1) * ratio)
        k -= 1
        F += f
        if f < 1e-18 * F:
            break
    if u <= F:
        k = m
        f = pm
        while k > 0:
            if u > F - f:
                break
            F -= f
            f *= k / ((n - k + 1) * ratio)
            k -= 1
        return k
    k = m
    f = pm
    while u > F and k < n:
        f *= (n - k) / (k + 1.0) * ratio
        k += 1
        F += f
        if f < 1e-18 * F:
            break
    return k


@njit(cache=True)
def _btpe(n, p, key, ctr):
    r = min(p, 1.0 - p)
    q = 1.0 - r
    fm = n * r + r
    m = int(math.floor(fm))
    p1 = math.floor(2.195 * math.sqrt(n * r * q) - 4.6 * q) + 0.5
    xm = m + 0.5
    xl = xm - p1
    xr = xm + p1
    c = 0.134 + 20.5 / (15.3 + m)
    a = (fm - xl) / (fm - xl * r)
    laml = a * (1.0 + a / 2.0)
    a = (xr - fm) / (xr * q)
    lamr = a * (1.0 + a / 2.0)
    p2 = p1 * (1.0 + 2.0 * c)
    p3 = p2 + c / laml
    p4 = p3 + c / lamr
    nrq = n * r * q
    y = 0
    while True:
        u = uniform(key, ctr) * p4
        v = uniform(key, ctr + np.uint64(1))
        ctr += np.uint64(2)
        if u <= p1:
            y = int(math.floor(xm - p1 * v + u))
            break
        if u <= p2:
            x = xl + (u - p1) / c
            v = v * c + 1.0 - abs(m - x + 0.5) / p1
            if v > 1.0:
                continue
            y = int(math.floor(x))
        elif u <= p3:
            y = int(math.floor(xl + math.log(v) / laml))
            if y < 0:
                continue
            v = v * (u - p2) * laml
        else:
            y = int(math.floor(xr - math.log(v) / lamr))
            if y > n:
                continue
            v = v * (u - p3) * lamr
        k = abs(y - m)
        if k <= 20 or k >= nrq / 2.0 - 1:
            # explicit pmf ratio
            s = r / q
            aa = s * (n + 1)
            F = 1.0
            if m < y:
                for i in range(m + 1, y + 1):
                    F *= aa / i - s
            elif m > y:
                for i in range(y + 1, m + 1):
                    F /= aa / i - s
            if v > F:
                continue
            break
        # squeeze on log f(y)/f(m)
        rho = (k / nrq) * ((k * (k / 3.0 + 0.625) + 0.16666666666666666) / nrq + 0.5)
        t = -k * k / (2.0 * nrq)
        A = math.log(v)
        if A < t - rho:
            break
        if A > t + rho:
            continue
        x1 = y + 1.0
        f1 = m + 1.0
        z = n + 1.0 - m
        w = n - y + 1.0
        x2 = x1 * x1
        f2 = f1 * f1
        z2 = z * z
        w2 = w * w
        bound = (xm * math.log(f1 / x1) + (n - m + 0.5) * math.log(z / w)
                 + (y - m) * math.log(w * r / (x1 * q))
                 + (13680. - (462. - (132. - (99. - 140. / f2) / f2) / f2) / f2) / f1 / 166320.
                 + (13680. - (462. - (132. - (99. - 140. / z2) / z2) / z2) / z2) / z / 166320.
                 + (13680. - (462. - (132. - (99. - 140. / x2) / x2) / x2) / x2) / x1 / 166320.
                 + (13680. - (462. - (132. - (99. - 140. / w2) / w2) / w2) / w2) / w / 166320.)
        if A > bound:
            continue
        break
    if p > 0.5:
        y = n - y
    return y, ctr


@njit(cache=True)
def binomial_draw(n, p, key, ctr):
    """Binomial(n, p) variate; returns ``(value, next_counter)``."""
    if n <= 0 or p <= 0.0:
        return 0, ctr
    if p >= 1.0:
        return n, ctr
    r = min(p, 1.0 - p)
    if n * r < INVERSION_MEAN_CUTOFF:
        k = _inversion(n, r, uniform(key, ctr))
        if p > 0.5:
            k = n - k
        return k, ctr + np.uint64(1)
    return _btpe(n, p, key, ctr)


@njit(cache=True)
def _draw_many(n, p, key, ctr, size):
    out = np.empty(size, dtype=np.int64)
    for i in range(size):
        out[i], ctr = binomial_draw(n, p, key, ctr)
    return out, ctr


def sample_binomial(n: int, p: float, stream: RngStream, size: int | None = None):
    """Exact Binomial(n, p) variate(s) from ``stream`` (advanced in place)."""
    n = int(n)
    if n < 0 or not 0.0 <= p < 1.0:
        raise DomainError(f"need n >= 0 and 0 <= p < 1, got n={n}, p={p}")
    out, ctr = _draw_many(n, float(p), stream.key, np.uint64(stream.counter), 1 if size is None else int(size))
    stream.counter = int(ctr)
    return int(out[0]) if size is None else out
