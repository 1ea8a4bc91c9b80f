import math

import numpy as np
import pytest

from lrperc import Kernel, set_threads
from lrperc.errors import BracketError, ConfigError, DomainError, StepError, WindowError
from lrperc.estimators import (
    CriticalPoint,
    Diagnostic,
    SeriesEstimate,
    centered_pairs,
    doubling_admits,
    edian,
    edian_band,
    estimate_ball_moments,
    estimate_gyration,
    estimate_kpoint,
    estimate_Mr,
    estimate_susceptibility_family,
    estimate_two_point,
    estimate_volume_tail,
    fit_power_law,
    jackknife,
    locate_beta_c,
    mann_kendall,
    russo_rate_check,
    russo_step,
    subcritical_two_point_ratio,
    volume_cap,
)
from lrperc.kernel import edge_probability
from lrperc.sampler import BoxSpec, sample_configuration

K1 = Kernel()


def series(x, y, s=None):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return SeriesEstimate(x, y, np.zeros_like(y) if s is None else s, 100)


# ---------------------------------------------------------------- beta = 0


def test_two_point_vanishes_at_beta_zero():
    s = estimate_two_point(K1, 0.0, math.inf, centered_pairs([1, 2, 5]), 64, 50, 1)
    assert np.all(s.mean == 0) and np.all(s.stderr == 0)
    assert list(s.abscissa) == [2.0, 4.0, 10.0]


def test_kpoint_vanishes_at_beta_zero():
    s = estimate_kpoint(K1, 0.0, math.inf, [[0, 1, 3], [-2, 0, 2, 4]], 64, 50, 1)
    assert np.all(s.mean == 0)


def test_volume_tail_at_beta_zero():
    s = estimate_volume_tail(K1, 0.0, math.inf, [1, 2, 3], 64, 50, 1)
    assert list(s.mean) == [1.0, 0.0, 0.0]


def test_volume_tail_starts_at_one():
    s = estimate_volume_tail(K1, 1.5, math.inf, [1, 2], 256, 200, 2)
    assert s.mean[0] == 1.0


def test_ball_moments_at_beta_zero():
    out = estimate_ball_moments(K1, 0.0, math.inf, [1, 2], [0, 2, 8], 64, 50, 1)
    for s in out.values():
        assert np.all(s.mean == 1.0)


def test_gyration_at_beta_zero():
    s = estimate_gyration(K1, 0.0, math.inf, 2.0, [4, 8], 64, 50, 1)
    assert np.all(s.mean == 0.0)


def test_Mr_at_beta_zero():
    for policy in ("cutoff", "full"):
        s = estimate_Mr(K1, 0.0, policy, [2, 8], 64, 100, 1)
        assert np.all(s.mean == 1.0)


def test_susceptibility_at_beta_zero():
    (pt,) = estimate_susceptibility_family(K1, [0.0], 64, 50, 1)
    assert pt.chi == 1.0 and pt.zeta == 1.0 and pt.xi_star == 1.0 and pt.chi_err == 0.0


def test_russo_at_beta_zero():
    res = russo_rate_check(K1, 0.0, 16, 256, 50, 1)
    assert res.lhs == 0.0 and res.rhs == 0.0 and res.z == 0.0


# ---------------------------------------------------------------- simple regimes


def test_direct_edge_lower_bound():
    beta, lag = 40.0, 3
    s = estimate_two_point(K1, beta, math.inf, centered_pairs([lag]), 64, 2000, 5)
    p = edge_probability(K1, beta, 2.0 * lag)
    assert s.mean[0] >= p - 3 * math.sqrt(p * (1 - p) / 2000)


def test_kpoint_with_pairs_equals_two_point():
    pairs = centered_pairs([1, 3, 7, 12])
    tp = estimate_two_point(K1, 1.4, math.inf, pairs, 128, 300, 9)
    kp = estimate_kpoint(K1, 1.4, math.inf, [[int(x[0]), int(y[0])] for x, y in pairs], 128, 300, 9)
    assert np.array_equal(tp.mean, kp.mean)
    assert np.array_equal(tp.raw, kp.raw)
    # S of a pair is its squared distance
    assert np.allclose(kp.abscissa, np.array([1, 3, 7, 12]) ** 2)


def test_replica_i_is_sample_configuration():
    beta, L, seed = 1.5, 128, 77
    s = estimate_volume_tail(K1, beta, math.inf, [1], L, 6, seed)
    box = BoxSpec(1, L)
    for i in range(6):
        c = sample_configuration(K1, beta, math.inf, box, seed, replica=i)
        assert c.cluster_of() == s.raw[i]


def test_consistency_of_subcritical_definitions():
    pts = estimate_susceptibility_family(K1, [0.5, 1.0], 512, 400, 3, check_doubling=False)
    for pt in pts:
        assert pt.zeta >= pt.chi >= 1.0
        assert pt.xi_star == pytest.approx(pt.chi ** (1 / K1.alpha), rel=1e-12)
        assert pt.moment_ratio >= 1.0
    assert pts[1].chi > pts[0].chi


# ---------------------------------------------------------------- coupling


def test_two_point_hits_monotone_in_beta():
    pairs = centered_pairs([2, 5, 11, 20])
    prev = None
    for beta in (0.5, 1.0, 1.5, 2.0):
        s = estimate_two_point(K1, beta, math.inf, pairs, 128, 200, 4)
        if prev is not None:
            assert np.all(s.raw >= prev)
        prev = s.raw


def test_cluster_size_monotone_in_beta_and_cutoff():
    prev = None
    for beta in (0.6, 1.2, 1.8):
        s = estimate_volume_tail(K1, beta, math.inf, [1], 128, 200, 8)
        if prev is not None:
            assert np.all(s.raw >= prev)
        prev = s.raw
    prev = None
    for r in (4.0, 16.0, 64.0, math.inf):
        s = estimate_volume_tail(K1, 1.5, r, [1], 512, 200, 8)
        if prev is not None:
            assert np.all(s.raw >= prev)
        prev = s.raw


def test_Mr_below_Mr_star_samplewise():
    r_list = [4, 16, 64]
    cut = estimate_Mr(K1, 1.6, "cutoff", r_list, 512, 200, 12)
    full = estimate_Mr(K1, 1.6, "full", r_list, 512, 200, 12)
    assert np.all(cut.raw <= full.raw)
    assert np.all(cut.mean <= full.mean)


def test_diagnostic_nondecreasing_in_beta():
    diag = Diagnostic(K1, 100, 3)
    vals = [diag(512, b)[0] for b in np.linspace(0.5, 2.5, 9)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_outputs_do_not_depend_on_threads():
    pairs = centered_pairs([1, 4, 9])
    got = []
    for n in (1, 2, 4):
        set_threads(n)
        got.append(estimate_two_point(K1, 1.6, math.inf, pairs, 256, 300, 21).raw)
    set_threads(1)
    assert all(np.array_equal(got[0], g) for g in got[1:])


# ---------------------------------------------------------------- preconditions


def test_padding_rule():
    with pytest.raises(ConfigError):
        estimate_two_point(K1, 1.0, math.inf, centered_pairs([20]), 64, 10, 1)
    estimate_two_point(K1, 1.0, math.inf, centered_pairs([16]), 128, 10, 1)
    with pytest.raises(ConfigError):
        estimate_two_point(K1, 1.0, 100.0, centered_pairs([2]), 64, 10, 1)
    with pytest.raises(ConfigError):
        estimate_kpoint(K1, 1.0, math.inf, [[0, 10, 30]], 64, 10, 1)


def test_pairs_must_be_distinct():
    with pytest.raises(DomainError):
        estimate_two_point(K1, 1.0, math.inf, [((0,), (0,))], 64, 10, 1)


def test_volume_grid_cap():
    cap = volume_cap(K1, 256)
    assert cap == pytest.approx((256 * 2 / 4) ** 0.8)
    with pytest.raises(ConfigError):
        estimate_volume_tail(K1, 1.0, math.inf, [1, int(cap) + 1], 256, 10, 1)


def test_radius_cap():
    with pytest.raises(ConfigError):
        estimate_ball_moments(K1, 1.0, math.inf, [1], [40], 64, 10, 1)
    with pytest.raises(ConfigError):
        estimate_Mr(K1, 1.0, "cutoff", [40], 64, 100, 1)


def test_Mr_needs_100_samples():
    with pytest.raises(ConfigError):
        estimate_Mr(K1, 1.0, "cutoff", [4], 64, 99, 1)
    with pytest.raises(ConfigError):
        estimate_Mr(K1, 1.0, "sideways", [4], 64, 100, 1)


def test_sample_minimum():
    with pytest.raises(ConfigError):
        estimate_two_point(K1, 1.0, math.inf, centered_pairs([1]), 64, 1, 1)


def test_gyration_needs_positive_p():
    with pytest.raises(DomainError):
        estimate_gyration(K1, 1.0, math.inf, 0.0, [4], 64, 10, 1)


def test_susceptibility_refuses_near_critical():
    cp = CriticalPoint(1.7, 0.01, "test", (1, 2, 4))
    with pytest.raises(ConfigError):
        estimate_susceptibility_family(K1, [1.695], 64, 10, 1, beta_c=cp)
    estimate_susceptibility_family(K1, [1.0], 64, 10, 1, beta_c=cp, check_doubling=False)


def test_susceptibility_doubling_check():
    with pytest.raises(ConfigError, match="not converged"):
        estimate_susceptibility_family(K1, [1.5], 16, 200, 1)


def test_russo_step_rules():
    assert russo_step(K1, 16, 256) == pytest.approx(2.0)
    with pytest.raises(StepError):
        russo_step(K1, 16, 256, step=0.5)
    with pytest.raises(StepError):
        russo_step(K1, 1.0, 256, step=1.0)


def test_locate_beta_c_preconditions():
    with pytest.raises(ConfigError):
        locate_beta_c(K1, [64, 128], (0.5, 3.0), 0.01, 50, 1)
    with pytest.raises(ConfigError):
        locate_beta_c(K1, [64, 128, 512], (0.5, 3.0), 0.01, 50, 1)
    with pytest.raises(BracketError):
        locate_beta_c(K1, [64, 128, 256], (0.1, 0.3), 0.01, 50, 1)


# ---------------------------------------------------------------- Russo


def test_russo_rhs_linear_at_small_beta():
    a = russo_rate_check(K1, 0.01, 16, 256, 400, 31)
    b = russo_rate_check(K1, 0.02, 16, 256, 400, 31)
    assert b.rhs / a.rhs == pytest.approx(2.0, rel=0.05)


def test_russo_identity_small_run():
    res = russo_rate_check(K1, 0.8, 16, 256, 3000, 32)
    assert res.z <= 4.0
    assert res.step == pytest.approx(2.0)


# ---------------------------------------------------------------- edians


def test_edian_quantile_convention():
    assert edian(np.ones(100, dtype=int)) == 1
    assert edian(np.ones(100, dtype=int), literal=True) == 2
    # P(X > 3) = 0.3 <= e^-1 while P(X > 2) = 0.4 > e^-1
    vals = np.repeat([1, 2, 3, 4], [30, 30, 10, 30])
    assert edian(vals) == 3
    assert edian(vals, literal=True) == 4


def test_edian_band_brackets_estimate():
    rng = np.random.default_rng(0)
    vals = rng.geometric(0.1, size=2000)
    lo, hi = edian_band(vals)
    assert lo <= edian(vals) <= hi


# ---------------------------------------------------------------- fitting


def test_fit_recovers_exact_power_law():
    x = np.geomspace(1, 1000, 12)
    fit = fit_power_law(series(x, 3 * x**-0.4))
    assert fit.exponent == pytest.approx(-0.4, abs=1e-12)
    assert fit.amplitude == pytest.approx(3.0, rel=1e-12)
    assert fit.ci_low <= fit.exponent <= fit.ci_high
    assert fit.n_points == 12


def test_fit_square():
    x = np.array([1, 2, 4, 8, 16])
    assert fit_power_law(series(x, x**2)).exponent == pytest.approx(2.0, abs=1e-12)


def test_fit_calibration():
    rng = np.random.default_rng(2024)
    x = np.geomspace(10, 1000, 10)
    truth = 2 * x**-0.25
    covered = 0
    for trial in range(100):
        noisy = truth * (1 + 0.01 * rng.standard_normal(len(x)))
        fit = fit_power_law(series(x, noisy, 0.01 * noisy), n_boot=500, seed=trial)
        covered += fit.covers(-0.25)
    assert covered >= 90


def test_fit_window_errors():
    x = np.arange(1.0, 10.0)
    with pytest.raises(WindowError):
        fit_power_law(series(x, x), window=(1, 3))
    y = x.copy()
    y[2] = 0
    with pytest.raises(WindowError):
        fit_power_law(series(x, y))
    assert fit_power_law(series(x, y), window=(4, 9)).window == (4.0, 9.0)


def test_mann_kendall_detects_trend():
    assert mann_kendall(np.arange(10.0))[1] < 0.01
    assert mann_kendall(np.arange(10.0)[::-1])[1] > 0.99


def test_doubling_admits():
    big = SeriesEstimate([1, 2, 3], [1.0, 2.0, 3.0], [0.1, 0.1, 0.1], 10)
    small = SeriesEstimate([1, 2], [1.05, 2.5], [0.1, 0.1], 10)
    assert list(doubling_admits(big, small)) == [True, False, False]


def test_jackknife_of_mean_is_standard_error():
    rng = np.random.default_rng(1)
    v = rng.normal(size=(200, 1))
    est, err = jackknife(v, lambda m: m[..., 0])
    assert est == pytest.approx(v.mean())
    assert err == pytest.approx(v.std(ddof=1) / math.sqrt(200))


# ---------------------------------------------------------------- series plumbing


def test_series_csv_round_trip():
    s = SeriesEstimate([1.0, 2.5], [0.5, 1 / 3], [0.0, 0.01], 7, {"seed": 3})
    t = SeriesEstimate.from_csv(s.to_csv())
    assert np.array_equal(s.abscissa, t.abscissa)
    assert np.array_equal(s.mean, t.mean)
    assert np.array_equal(s.stderr, t.stderr)
    assert t.n_samples == 7


def test_series_invariants():
    with pytest.raises(ValueError):
        SeriesEstimate([1.0], [1.0, 2.0], [0.0, 0.0], 2)
    with pytest.raises(ValueError):
        SeriesEstimate([1.0], [1.0], [-1.0], 2)


def test_critical_point_json_round_trip():
    cp = CriticalPoint(1.69, 0.005, "crossing", (4, 8, 16), (1.68, 1.7), (0.01, 0.02))
    assert CriticalPoint.from_json(cp.to_json()) == cp


def test_subcritical_ratio_shape():
    s = subcritical_two_point_ratio(K1, 0.8, 2.0, 0.1, [4, 8], 64, 200, 3)
    assert len(s) == 2 and np.all(s.mean >= 0)
    assert s.meta["estimator"] == "subcritical_ratio"


def test_subcritical_ratio_needs_positive_beta():
    with pytest.raises(DomainError):
        subcritical_two_point_ratio(K1, 0.0, 1.0, 0.0, [4], 64, 10, 3)


def test_two_point_decays_exponentially_beyond_cutoff():
    # only the sign of the rate is asserted; its value is not pinned down
    r_cut = 32.0
    lags = [12, 16, 18, 20, 22, 24]
    s = estimate_two_point(K1, 1.69, r_cut, centered_pairs(lags), 256, 20000, 15)
    far = s.abscissa > r_cut
    assert np.all(s.mean[far] > 0)
    slope = np.polyfit(s.abscissa[far], np.log(s.mean[far]), 1)[0]
    assert slope < 0
