"""Power-law fits and trend tests for Monte-Carlo series."""
from __future__ import annotations

import numpy as np
from scipy import stats

from ..errors import WindowError
from .series import PowerLawFit, SeriesEstimate


def _ols_slopes(x, Y):
    """Slopes and intercepts of ``Y[b] ~ x`` for every row ``b``."""
    xc = x - x.mean()
    sxx = np.dot(xc, xc)
    slopes = (Y - Y.mean(axis=-1, keepdims=True)) @ xc / sxx
    intercepts = Y.mean(axis=-1) - slopes * x.mean()
    return slopes, intercepts


def fit_power_law(series: SeriesEstimate, window=None, n_boot: int = 2000, seed: int = 0,
                  level: float = 0.95) -> PowerLawFit:
    """Least-squares fit of ``log mean`` against ``log abscissa`` inside ``window``.

    The confidence interval is the percentile interval of slopes refitted to
    Gaussian resamples ``mean + stderr * Z`` (resamples with a nonpositive
    entry are redrawn).
    """
    x = np.asarray(series.abscissa, dtype=float)
    y = np.asarray(series.mean, dtype=float)
    s = np.asarray(series.stderr, dtype=float)
    lo, hi = (-np.inf, np.inf) if window is None else window
    sel = (x >= lo) & (x <= hi)
    if sel.sum() < 5:
        raise WindowError(f"window {window} holds {int(sel.sum())} points; need >= 5")
    x, y, s = x[sel], y[sel], s[sel]
    if np.any(y <= 0) or np.any(x <= 0):
        raise WindowError("nonpositive value inside the fit window")
    lx = np.log(x)
    slope, intercept = _ols_slopes(lx, np.log(y)[None, :])
    slope, intercept = float(slope[0]), float(intercept[0])

    rng = np.random.default_rng(seed)
    boots = np.empty((n_boot, len(y)))
    filled = 0
    for _ in range(100):
        draw = y + s * rng.standard_normal((n_boot, len(y)))
        ok = draw[np.all(draw > 0, axis=1)]
        take = min(len(ok), n_boot - filled)
        boots[filled:filled + take] = ok[:take]
        filled += take
        if filled == n_boot:
            break
    boots = boots[:filled]
    bslopes, _ = _ols_slopes(lx, np.log(boots))
    tail = 100 * (1 - level) / 2
    ci_low, ci_high = np.percentile(bslopes, [tail, 100 - tail])
    return PowerLawFit(
        exponent=slope,
        amplitude=float(np.exp(intercept)),
        ci_low=float(min(ci_low, slope)),
        ci_high=float(max(ci_high, slope)),
        window=(float(x.min()), float(x.max())),
        n_points=int(len(x)),
    )


def mann_kendall(values) -> tuple[float, float]:
    """One-sided Mann-Kendall test for an upward trend: returns ``(tau, p)``.

    Equivalent to Kendall's tau between the series and its index.
    """
    values = np.asarray(values, dtype=float)
    res = stats.kendalltau(np.arange(len(values)), values, alternative="greater")
    return float(res.statistic), float(res.pvalue)


def doubling_admits(big: SeriesEstimate, small: SeriesEstimate, n_sigma: float = 2.0) -> np.ndarray:
    """Mask of abscissae where two box sizes agree within ``n_sigma`` combined stderr.

    Points missing from ``small`` are not admitted.
    """
    admit = np.zeros(len(big), dtype=bool)
    lookup = {float(a): i for i, a in enumerate(small.abscissa)}
    for i, a in enumerate(big.abscissa):
        j = lookup.get(float(a))
        if j is None:
            continue
        sig = np.hypot(big.stderr[i], small.stderr[j])
        admit[i] = abs(big.mean[i] - small.mean[j]) <= n_sigma * sig
    return admit
