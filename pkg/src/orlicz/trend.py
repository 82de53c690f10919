"""Tail-trend classification of positive curves indexed by p."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DECREASING = "decreasing"
PLATEAU = "plateau"
GROWING = "growing"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Trend:
    verdict: str
    slope: float
    p: np.ndarray
    ratio: np.ndarray

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "slope": self.slope,
            "p": self.p.tolist(),
            "ratio": self.ratio.tolist(),
        }


def _slope(lp, lr) -> float:
    return float(np.polyfit(lp, lr, 1)[0])


def _label(s: float, tol: float) -> str:
    if s < -tol:
        return DECREASING
    if s > tol:
        return GROWING
    return PLATEAU


def classify(p, ratio, tol: float) -> Trend:
    """Least-squares slope of log(ratio) against log(p) over the upper half.

    The verdict is inconclusive when the two quarters of the upper half
    point in opposite directions, or when the ratio is not positive.
    """
    p = np.asarray(p, float)
    ratio = np.asarray(ratio, float)
    h = p.size // 2
    up, ur = p[h:], ratio[h:]
    if up.size < 2:
        raise ValueError("need at least four grid points to classify a trend")
    if np.all(ur == 0):
        # identically zero: trivially inside every closure of bounded functions
        return Trend(DECREASING, -np.inf, p, ratio)
    if np.any(~np.isfinite(ur)) or np.any(ur <= 0):
        return Trend(INCONCLUSIVE, float("nan"), p, ratio)
    with np.errstate(divide="ignore"):
        # only the upper half, already checked positive, is used
        lr = np.log(ratio)
    return _classify_logs(p, lr, tol, ratio)


def classify_log(p, log_ratio, tol: float) -> Trend:
    """:func:`classify` for a curve given by its logarithm, which may exceed float range."""
    p = np.asarray(p, float)
    lr = np.asarray(log_ratio, float)
    if p.size - p.size // 2 < 2:
        raise ValueError("need at least four grid points to classify a trend")
    if np.any(~np.isfinite(lr[p.size // 2:])):
        return Trend(INCONCLUSIVE, float("nan"), p, lr)
    return _classify_logs(p, lr, tol, lr)


def _classify_logs(p, lr_all, tol, shown) -> Trend:
    h = p.size // 2
    lp, lr = np.log(p[h:]), lr_all[h:]
    s = _slope(lp, lr)
    verdict = _label(s, tol)
    q = lp.size // 2
    if q >= 2 and lp.size - q >= 2:
        a = _label(_slope(lp[:q], lr[:q]), tol)
        b = _label(_slope(lp[q:], lr[q:]), tol)
        if {a, b} == {GROWING, DECREASING}:
            verdict = INCONCLUSIVE
    return Trend(verdict, s, p, shown)
