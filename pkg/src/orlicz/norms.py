"""Empirical moment curves, the G(psi) and Luxemburg-type norms, tail fits."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from . import trend
from .config import DEFAULT
from .convex import NFunctionSpec
from .errors import DomainError, InsufficientTailError, OutsideSpaceError, ValidationError
from .psi import PsiSpec, SlowlyVaryingSpec

_COUNT = np.dtype("<u8")
_F64 = np.dtype("<f8")


@dataclass(frozen=True, eq=False)
class Sample:
    values: np.ndarray
    provenance: dict = field(default_factory=lambda: {"source": "external"})

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size == 0:
            raise ValidationError("a sample needs at least one value")
        if not np.all(np.isfinite(v)):
            raise ValidationError("sample values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    def scaled(self, c: float) -> "Sample":
        return Sample(c * self.values, {**self.provenance, "scale": c})

    # -- io ------------------------------------------------------------
    def to_csv(self, path) -> None:
        np.savetxt(path, self.values, fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "Sample":
        v = np.loadtxt(path, delimiter=",", ndmin=1, comments="#")
        return cls(v, {"source": "external", "path": str(path)})

    def to_binary(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(np.array([self.n], dtype=_COUNT).tobytes())
            fh.write(self.values.astype(_F64).tobytes())

    @classmethod
    def from_binary(cls, path) -> "Sample":
        raw = Path(path).read_bytes()
        if len(raw) < 8:
            raise ValidationError("binary sample is missing its count header")
        n = int(np.frombuffer(raw[:8], dtype=_COUNT)[0])
        if len(raw) != 8 + 8 * n:
            raise ValidationError(f"binary sample declares {n} values but holds {(len(raw) - 8) / 8:g}")
        return cls(np.frombuffer(raw[8:], dtype=_F64), {"source": "external", "path": str(path)})

    @classmethod
    def load(cls, path) -> "Sample":
        path = Path(path)
        return cls.from_csv(path) if path.suffix.lower() in (".csv", ".txt") else cls.from_binary(path)


def _log_abs(x: np.ndarray):
    """``(log max|x|, log(|x|/max|x|))`` with zeros dropped; None for the zero sample."""
    a = np.abs(x)
    a = a[a > 0]
    if a.size == 0:
        return None
    m = float(a.max())
    # ratios that underflow to 0 contribute exp(-inf) = 0 downstream
    with np.errstate(divide="ignore"):
        return math.log(m), np.log(a / m)


def _lp_from_logs(logs, n: int, p: float) -> float:
    if logs is None:
        return 0.0
    lm, la = logs
    return math.exp(lm + (logsumexp(p * la) - math.log(n)) / p)


def lp_norm(s: Sample | np.ndarray, p: float) -> float:
    """``(mean |x|**p)**(1/p)``, computed after factoring out ``max|x|``."""
    if p < 1:
        raise DomainError("lp_norm needs p >= 1")
    x = s.values if isinstance(s, Sample) else np.asarray(s, float)
    if x.size == 0:
        raise ValidationError("empty sample")
    return _lp_from_logs(_log_abs(x), x.size, p)


def reliability_cap(n: int) -> float:
    return DEFAULT.cap_factor * math.log2(max(n, 2))


@dataclass(frozen=True, eq=False)
class MomentCurve:
    p_grid: np.ndarray
    lp_values: np.ndarray
    n: int
    p_cap: float
    # grid points above the reliability cap
    over_cap: bool = False

    def to_dict(self) -> dict:
        return {"p": self.p_grid.tolist(), "lp": self.lp_values.tolist(), "n": self.n,
                "p_cap": self.p_cap, "over_cap": self.over_cap}


def moment_curve(s: Sample | np.ndarray, p_grid) -> MomentCurve:
    x = s.values if isinstance(s, Sample) else np.asarray(s, float)
    if x.size == 0:
        raise ValidationError("empty sample")
    p = np.asarray(p_grid, float)
    if p.ndim != 1 or p.size == 0 or np.any(np.diff(p) <= 0) or p[0] < 1:
        raise ValidationError("p_grid must be increasing and >= 1")
    logs = _log_abs(x)
    vals = np.array([_lp_from_logs(logs, x.size, q) for q in p])
    scale = float(vals.max()) if vals.size else 0.0
    if np.any(np.diff(vals) < -DEFAULT.lyapunov_rel * max(scale, 1e-300)):
        raise ValidationError("moment curve violates the Lyapunov inequality")
    vals = np.maximum.accumulate(vals)
    cap = reliability_cap(x.size)
    return MomentCurve(p, vals, x.size, cap, bool(p[-1] > cap))


@dataclass
class NormReport:
    gpsi_norm: float
    argmax_p: float
    luxemburg_norm: float | None = None
    tail_fit: dict | None = None

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "NormReport":
        return cls(**json.loads(text))


def gpsi_norm(curve: MomentCurve, psi: PsiSpec) -> NormReport:
    """``max_p |x|_p / psi(p)`` over the curve's grid."""
    r = curve.lp_values / psi(curve.p_grid)
    i = int(np.argmax(r))
    return NormReport(float(r[i]), float(curve.p_grid[i]))


def gpsi_value(s: Sample | np.ndarray, psi: PsiSpec, p_grid) -> float:
    return gpsi_norm(moment_curve(s, p_grid), psi).gpsi_norm


# -- Luxemburg-type functional -------------------------------------------

class _LogMeanN:
    """``t -> log mean N(e**t |x|)`` for a fixed sample.

    Below the splice ``N`` is exactly ``C u**2``, so that part of the mean is
    a prefix sum of ``x**2`` over the sorted sample; only the tail above the
    splice is evaluated through ``W``.
    """

    def __init__(self, N: NFunctionSpec, a: np.ndarray, n: int):
        la = np.sort(np.log(a))
        self.N, self.la, self.n = N, la, n
        self.top = float(la[-1])
        # log of prefix sums of (a / max a)**2
        with np.errstate(divide="ignore"):
            self.log_s2 = np.log(np.cumsum(np.exp(2.0 * (la - self.top))))
        self.log_splice = math.log(N.splice_u)

    def __call__(self, t: float) -> float:
        k = int(np.searchsorted(self.la, self.log_splice - t, side="left"))
        parts = []
        if k > 0:
            parts.append(math.log(self.N.quad_coeff) + 2.0 * (t + self.top) + float(self.log_s2[k - 1]))
        if k < self.la.size:
            try:
                with np.errstate(over="ignore", invalid="ignore"):
                    lw = np.asarray(self.N.w(t + self.la[k:]), float)
            except DomainError:
                # beyond the tabulated generator: N is astronomically large there
                return math.inf
            if np.any(~np.isfinite(lw)):
                return math.inf
            parts.append(float(logsumexp(lw)))
        return float(logsumexp(parts)) - math.log(self.n)


def luxemburg_norm(s: Sample | np.ndarray, N: NFunctionSpec, scan_points: int = 41) -> float:
    """``inf_{v>0} (1 + mean N(v x)) / v``.

    Scans ``t = log v`` on a bracket around ``-log max|x|`` and refines the
    best bracket by golden-section search.  The objective is convex in ``t``
    (log-sum-exp of convex functions), so one interior scan minimum brackets
    the global one.
    """
    x = s.values if isinstance(s, Sample) else np.asarray(s, float)
    if x.size == 0:
        raise ValidationError("empty sample")
    a = np.abs(x)
    n = a.size
    a = a[a > 0]
    if a.size == 0:
        return 0.0
    log_mean = _LogMeanN(N, a, n)

    def obj(t: float) -> float:
        lm = log_mean(t)
        return -t + np.logaddexp(0.0, lm) if math.isfinite(lm) else math.inf

    centre = -math.log(float(a.max()))
    lo, hi = centre - 30.0, centre + 10.0
    for _ in range(8):
        ts = np.linspace(lo, hi, scan_points)
        vals = np.array([obj(t) for t in ts])
        if not np.any(np.isfinite(vals)):
            raise OutsideSpaceError("the Luxemburg objective is infinite on the whole bracket")
        i = int(np.argmin(vals))
        if i == 0:
            lo, hi = lo - 40.0, lo + (hi - lo) / 4
            continue
        if i == ts.size - 1:
            lo, hi = hi - (hi - lo) / 4, hi + 40.0
            continue
        break
    else:
        raise OutsideSpaceError("no interior minimum of the Luxemburg objective")
    res = minimize_scalar(obj, bracket=(ts[i - 1], ts[i], ts[i + 1]), method="golden",
                          tol=DEFAULT.golden_xtol)
    best = min(float(res.fun), float(vals[i]))
    return math.exp(best)


# -- membership diagnostics -----------------------------------------------

def g0_membership(curve: MomentCurve, psi: PsiSpec, tol: float | None = None) -> trend.Trend:
    """Trend of ``|x|_p / psi(p)``: decreasing, plateau, growing or inconclusive."""
    ratio = curve.lp_values / psi(curve.p_grid)
    return trend.classify(curve.p_grid, ratio, DEFAULT.membership_slope_tol if tol is None else tol)


def ucn_diagnostic(curves, psi: PsiSpec, tol: float | None = None) -> trend.Trend:
    """Trend of the family envelope ``sup_k |x_k|_p / psi(p)``."""
    curves = list(curves)
    if not curves:
        raise ValidationError("ucn_diagnostic needs at least one curve")
    p = curves[0].p_grid
    for c in curves[1:]:
        if c.p_grid.shape != p.shape or not np.array_equal(c.p_grid, p):
            raise ValidationError("curves must share one p_grid")
    env = np.max([c.lp_values for c in curves], axis=0) / psi(p)
    return trend.classify(p, env, DEFAULT.membership_slope_tol if tol is None else tol)


# -- tail exponent fit -----------------------------------------------------

@dataclass(frozen=True)
class TailFit:
    model: str
    slope: float
    intercept: float
    stderr: float
    u_lo: float
    u_hi: float
    q_lo: float
    q_hi: float
    n_points: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def tail_points(values: np.ndarray, q_lo: float, q_hi: float, k: int):
    """Distinct levels ``u`` with their strict exceedance fractions in ``[q_lo, q_hi]``."""
    a = np.sort(np.abs(np.asarray(values, float)))
    n = a.size
    qs = np.geomspace(q_lo, q_hi, k)
    idx = np.clip(n - np.round(qs * n).astype(np.int64), 0, n - 1)
    u = np.unique(a[idx])
    # strict exceedance count: values > u
    p_hat = (n - np.searchsorted(a, u, side="right")) / n
    keep = (p_hat > 0) & (p_hat < 1) & (u > 0)
    return u[keep], p_hat[keep]


def tail_exponent_fit(s: Sample | np.ndarray, model: str = "weibull", L: SlowlyVaryingSpec | None = None,
                      q_lo: float | None = None, q_hi: float | None = None,
                      points: int | None = None) -> TailFit:
    """Regress ``log(-log P(|x| > u))`` on ``log u`` (weibull) or ``log log u`` (loglog).

    For the weibull model a slowly varying factor ``L`` may be divided out,
    since ``-log P = u**m L(u)`` gives ``log(-log P) - log L(u) = m log u``.
    """
    x = s.values if isinstance(s, Sample) else np.asarray(s, float)
    q_lo = DEFAULT.tail_q_lo if q_lo is None else q_lo
    q_hi = DEFAULT.tail_q_hi if q_hi is None else q_hi
    k = DEFAULT.tail_points if points is None else points
    if not 0 < q_lo < q_hi < 1:
        raise ValidationError("need 0 < q_lo < q_hi < 1")
    if x.size * q_lo < 1:
        raise InsufficientTailError(f"n={x.size} cannot resolve exceedance level {q_lo:g}")
    u, ph = tail_points(x, q_lo, q_hi, k)
    if model == "weibull":
        xs = np.log(u)
        ys = np.log(-np.log(ph))
        if L is not None:
            ys = ys - np.log(L(u))
    elif model == "loglog":
        keep = u > 1
        u, ph = u[keep], ph[keep]
        xs = np.log(np.log(u))
        ys = np.log(-np.log(ph))
    else:
        raise ValidationError(f"unknown tail model {model!r}")
    if u.size < DEFAULT.tail_min_points:
        raise InsufficientTailError(
            f"only {u.size} distinct tail points in the window [{q_lo:g}, {q_hi:g}]")
    if math.log(u.max() / u.min()) < DEFAULT.tail_min_log_span:
        raise InsufficientTailError(
            f"tail window [{u.min():g}, {u.max():g}] collapses onto the sample maximum; the law looks bounded")
    fit = stats.linregress(xs, ys)
    return TailFit(model, float(fit.slope), float(fit.intercept), float(fit.stderr),
                   float(u.min()), float(u.max()), q_lo, q_hi, int(u.size))
