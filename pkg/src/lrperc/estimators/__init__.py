from .critical import Diagnostic, locate_beta_c
from .fit import doubling_admits, fit_power_law, mann_kendall
from .montecarlo import (
    RussoCheck,
    SubcriticalPoint,
    centered_pairs,
    edian,
    edian_band,
    estimate_ball_moments,
    estimate_gyration,
    estimate_kpoint,
    estimate_Mr,
    estimate_susceptibility_family,
    estimate_two_point,
    estimate_volume_tail,
    jackknife,
    russo_rate_check,
    russo_step,
    subcritical_two_point_ratio,
    volume_cap,
)
from .series import CriticalPoint, PowerLawFit, SeriesEstimate

__all__ = [name for name in dir() if not name.startswith("_")]
