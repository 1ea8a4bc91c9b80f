"""Monte-Carlo estimators of cluster observables on finite boxes.

All estimators share one convention: replica ``i`` of master seed ``s`` is
the configuration ``sample_configuration(..., seed=s, replica=i)``, so two
estimators called with the same seed and model see the same clusters.
Observation points are given relative to the box centre (the "origin").
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DomainError, StepError
from ..kernel import Kernel, kernel_value
from ..rng import seed_key
from ..sampler import BoxSpec, class_table
from . import _kernels as K
from .series import SeriesEstimate

E_INV = math.exp(-1.0)
PADDING = 4.0


class _Model:
    """Class table plus the positional arguments every kernel expects."""

    def __init__(self, k: Kernel, beta: float, r_cut: float, L: int, boundary="free", coupled=True):
        self.kernel = k
        self.box = BoxSpec(k.d, int(L), boundary)
        self.table = class_table(k, beta, self.box, r_cut)
        smax = max(int(self.table.count.max(initial=1)), 1)
        t = self.table
        self.args = (t.disp, t.width, t.lo, t.count, t.prob, t.ident, np.int64(t.side),
                     np.int64(t.d), bool(t.wrap), bool(coupled), np.int64(self.box.n_vertices),
                     np.int64(smax))

    @property
    def origin(self) -> np.int64:
        return np.int64(self.box.index((0,) * self.box.d))

    def run(self, kernel, seed, samples, *extra):
        return kernel(seed_key(seed), np.int64(samples), *self.args, *extra)

    def coords(self) -> np.ndarray:
        return self.box.coords(np.arange(self.box.n_vertices))


def _check_samples(samples, minimum=2):
    if int(samples) < minimum:
        raise ConfigError(f"need at least {minimum} samples, got {samples}")


def _meta(estimator, k, beta, r_cut, L, seed, samples, boundary="free", **extra):
    meta = {
        "estimator": estimator,
        "d": k.d,
        "alpha": k.alpha,
        "norm": k.norm_base.value,
        "nearest_neighbour": k.nearest_neighbour,
        "beta": beta,
        "r_cut": r_cut,
        "L": int(L),
        "boundary": str(getattr(boundary, "value", boundary)),
        "seed": int(seed),
        "samples": int(samples),
    }
    meta.update(extra)
    return meta


def _binomial_stderr(p, n):
    return np.sqrt(np.clip(p * (1 - p), 0, None) / n)


def jackknife(values: np.ndarray, func):
    """Delete-one jackknife of ``func(column means)``; returns ``(estimate, stderr)``.

    ``values`` is ``(n, q)``; ``func`` maps an ``(..., q)`` array of means
    to ``(...)`` results and must be vectorised.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    total = values.sum(axis=0)
    est = func(total / n)
    loo = (total[None, :] - values) / (n - 1)
    f = func(loo)
    err = math.sqrt((n - 1) / n * float(np.sum((f - f.mean()) ** 2)))
    return float(est), err


def _ball(model: _Model, radii):
    """Box vertices sorted by scaled distance to the origin, and prefix cuts per radius."""
    k = model.kernel
    rmax = max(radii)
    m = int(math.floor(rmax / k.norm_scale))
    L, half = model.box.side, model.box.side // 2
    axis = np.arange(max(-m, -half), min(m, L - 1 - half) + 1)
    grids = np.meshgrid(*([axis] * k.d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    dist = np.atleast_1d(k.norm(pts))
    order = np.argsort(dist, kind="stable")
    pts, dist = pts[order], dist[order]
    idx = np.sum((pts + half) * L ** np.arange(k.d), axis=1).astype(np.int64)
    cuts = np.searchsorted(dist, np.asarray(radii, dtype=float) * (1 + 1e-12), side="right")
    return idx, cuts.astype(np.int64), dist


def _check_radius_cap(k, radii, L, what="radius"):
    cap = L * k.norm_scale / PADDING
    finite = [r for r in radii if math.isfinite(r)]
    if finite and max(finite) > cap * (1 + 1e-12):
        raise ConfigError(f"largest {what} {max(finite)} exceeds L*norm_scale/{PADDING:g} = {cap}")


def _check_padding(k, scale, r_cut, L):
    need = scale if math.isinf(r_cut) else max(scale, r_cut)
    if L < PADDING * need / k.norm_scale - 1e-9:
        raise ConfigError(
            f"box side {L} violates padding: need L >= {PADDING:g}*{need}/{k.norm_scale:g}")


def centered_pairs(lags, d: int = 1):
    """Pairs ``(x, x + n e_1)`` placed symmetrically about the origin."""
    out = []
    for n in lags:
        x = np.zeros(d, dtype=np.int64)
        x[0] = -(int(n) // 2)
        y = x.copy()
        y[0] += int(n)
        out.append((x, y))
    return out


def _vertex_groups(box: BoxSpec, groups):
    width = max(len(g) for g in groups)
    out = -np.ones((len(groups), width), dtype=np.int64)
    for i, g in enumerate(groups):
        for j, x in enumerate(g):
            out[i, j] = box.index(x)
    return out


# --------------------------------------------------------------------------


def estimate_two_point(k: Kernel, beta: float, r_cut: float, pairs, L: int, samples: int, seed: int,
                       boundary="free", coupled=True) -> SeriesEstimate:
    """Connection frequency of each pair; abscissa is ``||x - y||``."""
    _check_samples(samples)
    pairs = [(np.atleast_1d(np.asarray(x, dtype=np.int64)), np.atleast_1d(np.asarray(y, dtype=np.int64)))
             for x, y in pairs]
    dist = np.array([float(k.norm(x - y)) for x, y in pairs])
    if np.any(dist <= 0):
        raise DomainError("pairs must consist of distinct points")
    _check_padding(k, float(dist.max()), r_cut, L)
    model = _Model(k, beta, r_cut, L, boundary, coupled)
    groups = _vertex_groups(model.box, pairs)
    hits = model.run(K.same_cluster, seed, samples, groups)
    mean = hits.mean(axis=0)
    return SeriesEstimate(dist, mean, _binomial_stderr(mean, samples), int(samples),
                          _meta("two_point", k, beta, r_cut, L, seed, samples, boundary),
                          raw=hits)


def estimate_kpoint(k: Kernel, beta: float, r_cut: float, tuples, L: int, samples: int, seed: int,
                    boundary="free", coupled=True) -> SeriesEstimate:
    """Frequency that all points of each tuple share a cluster; abscissa is ``S(tuple)``."""
    from ..geometry import PointSet, S_value, diameter

    _check_samples(samples)
    tuples = [[np.atleast_1d(np.asarray(x, dtype=np.int64)) for x in t] for t in tuples]
    svals, scales = [], []
    for t in tuples:
        ps = PointSet(np.array(t, dtype=float))
        svals.append(S_value(ps))
        scales.append(max(float(k.norm(a - b)) for a in t for b in t))
        if diameter(ps) <= 0:
            raise DomainError("tuple points must be distinct")
    _check_padding(k, max(scales), r_cut, L)
    model = _Model(k, beta, r_cut, L, boundary, coupled)
    groups = _vertex_groups(model.box, tuples)
    hits = model.run(K.same_cluster, seed, samples, groups)
    mean = hits.mean(axis=0)
    return SeriesEstimate(np.array(svals), mean, _binomial_stderr(mean, samples), int(samples),
                          _meta("kpoint", k, beta, r_cut, L, seed, samples, boundary), raw=hits)


def volume_cap(k: Kernel, L: int) -> float:
    """Largest admissible cluster-size threshold for a box of side ``L``."""
    return (L * k.norm_scale / PADDING) ** ((k.d + k.alpha) / 2)


def estimate_volume_tail(k: Kernel, beta: float, r_cut: float, n_grid, L: int, samples: int,
                         seed: int, boundary="free", coupled=True) -> SeriesEstimate:
    """Empirical ``P(|K| >= n)`` for the origin cluster."""
    _check_samples(samples)
    n_grid = np.asarray(n_grid, dtype=np.int64)
    if n_grid.max() > volume_cap(k, L):
        raise ConfigError(f"n_grid max {n_grid.max()} exceeds box-limited cap {volume_cap(k, L):.1f}")
    model = _Model(k, beta, r_cut, L, boundary, coupled)
    sizes = model.run(K.origin_size, seed, samples, model.origin)
    srt = np.sort(sizes)
    mean = (samples - np.searchsorted(srt, n_grid, side="left")) / samples
    return SeriesEstimate(n_grid.astype(float), mean, _binomial_stderr(mean, samples), int(samples),
                          _meta("volume_tail", k, beta, r_cut, L, seed, samples, boundary),
                          raw=sizes)


def estimate_ball_moments(k: Kernel, beta: float, r_cut: float, p_list, r_list, L: int, samples: int,
                          seed: int, boundary="free", coupled=True) -> dict:
    """``E|K cap B_r|^p`` for every ``p`` in ``p_list``; returns ``{p: SeriesEstimate}``."""
    _check_samples(samples)
    r_list = [float(r) for r in r_list]
    _check_radius_cap(k, r_list, L)
    model = _Model(k, beta, r_cut, L, boundary, coupled)
    ball, cuts, _ = _ball(model, r_list)
    counts = model.run(K.ball_counts, seed, samples, model.origin, ball, cuts).astype(float)
    out = {}
    for p in p_list:
        vals = counts**p
        out[p] = SeriesEstimate(
            np.array(r_list), vals.mean(axis=0), vals.std(axis=0, ddof=1) / math.sqrt(samples),
            int(samples), _meta("ball_moments", k, beta, r_cut, L, seed, samples, boundary, p=p),
            raw=counts)
    return out


def estimate_gyration(k: Kernel, beta: float, r_cut: float, p: float, r_list, L: int, samples: int,
                      seed: int, boundary="free", coupled=True) -> SeriesEstimate:
    """Radius of gyration ``[E sum_{x in K} |x|_2^p / E|K|]^{1/p}`` at each cut-off ``r``.

    The measure at abscissa ``r`` uses cut-off ``min(r, r_cut)``; ``r = inf``
    gives the box-truncated full kernel.  Errors are delete-one jackknife.
    """
    _check_samples(samples)
    if not p > 0:
        raise DomainError(f"p must be positive, got {p}")
    r_list = [float(r) for r in r_list]
    for r in r_list:
        eff = min(r, r_cut)
        if math.isfinite(eff):
            _check_padding(k, eff, eff, L)
    mean, err = [], []
    weight = None
    for r in r_list:
        model = _Model(k, beta, min(r, r_cut), L, boundary, coupled)
        if weight is None:
            weight = np.sqrt(np.sum(model.coords().astype(float) ** 2, axis=1)) ** p
        sums = model.run(K.gyration_sums, seed, samples, model.origin, weight)
        est, se = jackknife(sums[:, ::-1], lambda m: np.clip(m[..., 0] / m[..., 1], 0, None) ** (1.0 / p))
        mean.append(est)
        err.append(se)
    return SeriesEstimate(np.array(r_list), np.array(mean), np.array(err), int(samples),
                          _meta("gyration", k, beta, r_cut, L, seed, samples, boundary, p=p))


def edian(values, threshold: float = E_INV, literal: bool = False) -> int:
    """Empirical ``1 - threshold`` quantile ``min{n : P(X > n) <= threshold}``.

    ``literal=True`` returns ``min{n >= 0 : P(X >= n) <= threshold}``, which
    for integer ``X`` is exactly one larger.
    """
    srt = np.sort(np.asarray(values, dtype=np.int64))
    n = len(srt)
    limit = threshold * n
    cands = np.concatenate([[0], np.unique(srt) + 1])
    tail = n - np.searchsorted(srt, cands, side="left")
    first = int(cands[np.argmax(tail <= limit)])
    return first if literal else first - 1


def edian_band(values, threshold: float = E_INV, z: float = 1.959963984540054):
    """Order-statistic 95% band for the ``1 - threshold`` quantile."""
    srt = np.sort(np.asarray(values, dtype=np.int64))
    n = len(srt)
    q = 1.0 - threshold
    half = z * math.sqrt(n * q * (1 - q))
    lo = int(max(0, math.floor(n * q - half)))
    hi = int(min(n - 1, math.ceil(n * q + half)))
    return int(srt[lo]), int(srt[hi])


def estimate_Mr(k: Kernel, beta: float, r_cut_policy: str, r_list, L: int, samples: int, seed: int,
                boundary="free", coupled=True) -> SeriesEstimate:
    """Edians of ``max_x |K_x cap B_r|``.

    ``r_cut_policy='cutoff'`` samples ``P_{beta,r}`` for each ``r``
    (the quantity ``M_r``); ``'full'`` uses the box-truncated full kernel
    (``M_r^*``).  ``stderr`` is the order-statistic band half-width / 1.96.
    """
    if int(samples) < 100:
        raise ConfigError("edian estimation needs at least 100 samples")
    if r_cut_policy not in ("cutoff", "full"):
        raise ConfigError(f"unknown r_cut policy {r_cut_policy!r}")
    r_list = [float(r) for r in r_list]
    _check_radius_cap(k, r_list, L)
    if r_cut_policy == "full":
        model = _Model(k, beta, math.inf, L, boundary, coupled)
        ball, cuts, _ = _ball(model, r_list)
        raw = model.run(K.max_in_ball, seed, samples, ball, cuts)
    else:
        raw = np.empty((int(samples), len(r_list)), dtype=np.int64)
        for j, r in enumerate(r_list):
            model = _Model(k, beta, r, L, boundary, coupled)
            ball, cuts, _ = _ball(model, [r])
            raw[:, j] = model.run(K.max_in_ball, seed, samples, ball, cuts)[:, 0]
    mean, err = [], []
    for j in range(len(r_list)):
        mean.append(edian(raw[:, j]))
        lo, hi = edian_band(raw[:, j])
        err.append((hi - lo) / (2 * 1.959963984540054))
    return SeriesEstimate(np.array(r_list), np.array(mean, dtype=float), np.array(err), int(samples),
                          _meta("Mr", k, beta, r_cut_policy, L, seed, samples, boundary), raw=raw)


@dataclass(frozen=True)
class SubcriticalPoint:
    beta: float
    chi: float
    chi_err: float
    zeta: float
    zeta_err: float
    xi_star: float
    xi_star_err: float
    moment_ratio: float
    moment_ratio_err: float


def estimate_susceptibility_family(k: Kernel, beta_list, L: int, samples: int, seed: int,
                                   beta_c=None, check_doubling: bool = True, boundary="free",
                                   coupled=True) -> list[SubcriticalPoint]:
    """``chi = E|K|``, ``zeta = E|K|^2/E|K|`` and ``xi* = chi^(1/alpha)`` per beta.

    ``beta_c`` (a :class:`CriticalPoint`) makes every ``beta`` within its
    uncertainty of the critical point an error.  With ``check_doubling`` the
    box must already be converged: ``chi`` at ``L/2`` and ``L`` differ by
    less than 5%.
    """
    _check_samples(samples)
    out = []
    for beta in beta_list:
        if beta_c is not None and beta >= beta_c.beta_hat - beta_c.uncertainty:
            raise ConfigError(f"beta={beta} is not below beta_c={beta_c.beta_hat}+-{beta_c.uncertainty}")
        model = _Model(k, beta, math.inf, L, boundary, coupled)
        sizes = model.run(K.origin_size, seed, samples, model.origin).astype(float)
        if check_doubling and beta > 0:
            half = _Model(k, beta, math.inf, max(2, L // 2), boundary, coupled)
            chi_half = half.run(K.origin_size, seed, samples, half.origin).mean()
            if abs(sizes.mean() - chi_half) > 0.05 * sizes.mean():
                raise ConfigError(f"chi not converged in L at beta={beta}: "
                                  f"{chi_half:.4g} (L/2) vs {sizes.mean():.4g} (L)")
        mom = np.stack([sizes, sizes**2, sizes**3], axis=1)
        chi, chi_err = float(sizes.mean()), float(sizes.std(ddof=1) / math.sqrt(samples))
        zeta, zeta_err = jackknife(mom, lambda m: m[..., 1] / m[..., 0])
        xi, xi_err = jackknife(mom, lambda m: m[..., 0] ** (1.0 / k.alpha))
        ratio, ratio_err = jackknife(mom, lambda m: m[..., 2] * m[..., 0] / m[..., 1] ** 2)
        out.append(SubcriticalPoint(float(beta), chi, chi_err, zeta, zeta_err, xi, xi_err, ratio,
                                    ratio_err))
    return out


def subcritical_two_point_ratio(k: Kernel, beta: float, chi: float, chi_err: float, lags, L: int,
                                samples: int, seed: int, boundary="free") -> SeriesEstimate:
    """``P_beta(x <-> y) / (beta chi^2 J(x, y))`` for centred pairs at each lag."""
    if not beta > 0:
        raise DomainError(f"the ratio needs beta > 0, got {beta}")
    tp = estimate_two_point(k, beta, math.inf, centered_pairs(lags, k.d), L, samples, seed, boundary)
    denom = beta * chi**2 * np.asarray(kernel_value(k, tp.abscissa))
    ratio = tp.mean / denom
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.hypot(np.where(tp.mean > 0, tp.stderr / tp.mean, 0.0), 2 * chi_err / chi)
    err = np.where(tp.mean > 0, ratio * rel, tp.stderr / denom)
    meta = dict(tp.meta, estimator="subcritical_ratio", chi=chi, chi_err=chi_err)
    return SeriesEstimate(tp.abscissa, ratio, err, int(samples), meta)


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RussoCheck:
    lhs: float
    rhs: float
    sigma: float
    step: float
    r: float

    @property
    def z(self) -> float:
        return abs(self.lhs - self.rhs) / self.sigma if self.sigma > 0 else (
            0.0 if self.lhs == self.rhs else math.inf)


def russo_step(k: Kernel, r: float, L: int, step=None, min_classes: int = 3) -> float:
    """Finite-difference half-step whose window ``[r-h, r+h]`` holds ``min_classes`` distances."""
    model_box = BoxSpec(k.d, int(L))
    tab = class_table(k, 1.0, model_box, math.inf)
    dists = np.unique(np.round(tab.distance, 12))
    if step is None:
        gaps = np.sort(np.abs(dists - r))
        if len(gaps) < min_classes:
            raise StepError("not enough distance classes in the box")
        step = float(gaps[min_classes - 1])
    inside = np.count_nonzero((dists >= r - step - 1e-12) & (dists <= r + step + 1e-12))
    if inside < min_classes or not r - step > 0:
        raise StepError(f"step {step} around r={r} contains {inside} distance classes; "
                        f"need {min_classes}")
    return float(step)


def russo_rate_check(k: Kernel, beta: float, r: float, L: int, samples: int, seed: int,
                     step=None, boundary="free", sphere_weight: float = 0.5) -> RussoCheck:
    """Compare ``d/dr E_{beta,r}|K|`` with its Russo-formula expression.

    ``lhs`` is the paired central difference ``(E_{r+h}|K| - E_{r-h}|K|)/2h``;
    ``rhs`` is ``beta |J'(r)| E_{beta,r}[|K| sum_{y in B_r} 1(y not in K) |K_y|]``
    with the sphere ``||y|| = r`` weighted by ``sphere_weight`` (``1/2``
    matches the symmetric derivative a central difference estimates).
    ``sigma`` is the stderr of the per-replica difference ``lhs_i - rhs_i``.
    """
    _check_samples(samples)
    h = russo_step(k, r, L, step)
    _check_radius_cap(k, [r + h], L)
    lo = _Model(k, beta, r - h, L, boundary)
    hi = _Model(k, beta, r + h, L, boundary)
    mid = _Model(k, beta, r, L, boundary)
    a = hi.run(K.origin_size, seed, samples, hi.origin).astype(float)
    b = lo.run(K.origin_size, seed, samples, lo.origin).astype(float)
    ball, cuts, dist = _ball(mid, [r])
    ball, dist = ball[: cuts[0]], dist[: cuts[0]]
    w = np.where(np.isclose(dist, r, rtol=1e-12, atol=0), sphere_weight, 1.0)
    terms = mid.run(K.russo_terms, seed, samples, mid.origin, ball, w)
    lhs_i = (a - b) / (2 * h)
    rhs_i = beta * k.derivative_magnitude(r) * terms[:, 0] * terms[:, 1]
    diff = lhs_i - rhs_i
    return RussoCheck(float(lhs_i.mean()), float(rhs_i.mean()),
                      float(diff.std(ddof=1) / math.sqrt(samples)), h, float(r))
