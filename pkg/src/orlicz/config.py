"""Numerical constants shared by every module.

All tolerances live here so that tests and experiments agree on them.
"""
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    # convexity: second differences >= -convex_rel * value scale
    convex_rel: float = 1e-9
    # default abscissa grids
    grid_points: int = 4096
    p_min: float = 2.0
    p_max: float = 256.0
    # Lyapunov post-check on moment curves (relative to the curve scale)
    lyapunov_rel: float = 1e-12
    # trend classification of log-ratio curves
    trend_slope_tol: float = 0.05
    membership_slope_tol: float = 0.25
    comparable_band: float = 10.0
    # tail regression window on P(|X| > u)
    tail_q_lo: float = 1e-5
    tail_q_hi: float = 1e-2
    tail_points: int = 32
    tail_min_points: int = 8
    # log(u_hi / u_lo) below this means the window is pinned to a bounded support
    tail_min_log_span: float = 0.05
    # moment reliability cap p_max(n) = cap_factor * log2(n)
    cap_factor: float = 2.0
    # tail inversion by bisection
    inversion_xtol: float = 1e-12
    # golden-section refinement
    golden_xtol: float = 1e-10
    # beta scan in the R-function
    beta_lo: float = 1.0 + 1e-3
    beta_hi: float = 1e3
    beta_points: int = 512


DEFAULT = Tolerances()


def with_overrides(**kwargs) -> Tolerances:
    return replace(DEFAULT, **kwargs)
