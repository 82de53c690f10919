"""Spectral partial sums and the conjugate function on [0, 1), with the
moment-growth experiments built on them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT
from .errors import AliasingError, DomainError, ValidationError
from .norms import InsufficientTailError, lp_norm, moment_curve, tail_exponent_fit


@dataclass(frozen=True, eq=False)
class GridSignal:
    """Values at the cell midpoints ``(j + 1/2) / M`` of ``[0, 1)``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        M = v.size
        if M < 8 or M & (M - 1):
            raise ValidationError(f"signal length must be a power of two >= 8, got {M}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("signal values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def M(self) -> int:
        return self.values.size

    @staticmethod
    def midpoints(M: int) -> np.ndarray:
        return (np.arange(M) + 0.5) / M

    @classmethod
    def from_function(cls, f, M: int) -> "GridSignal":
        return cls(f(cls.midpoints(M)))

    def lp(self, p: float) -> float:
        return lp_norm(self.values, p)

    def mean(self) -> float:
        return float(np.mean(self.values))

    def __sub__(self, other: "GridSignal") -> "GridSignal":
        return GridSignal(self.values - other.values)


def fourier_coefficients(f: GridSignal) -> np.ndarray:
    """``c_k ~ int f(x) exp(-2 pi i k x) dx`` for k = 0..M/2, sampled at midpoints."""
    k = np.arange(f.M // 2 + 1)
    return np.fft.rfft(f.values) * np.exp(-1j * np.pi * k / f.M) / f.M


def parseval_gap(f: GridSignal) -> float:
    """Relative gap between ``mean f**2`` and ``sum |c_k|**2`` over both signs of k."""
    c = fourier_coefficients(f)
    w = np.full(c.size, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    spec = float(np.sum(w * np.abs(c) ** 2))
    direct = float(np.mean(f.values**2))
    return abs(spec - direct) / max(direct, 1e-300)


def fourier_partial_sum(f: GridSignal, N: int) -> GridSignal:
    """Projection onto frequencies ``|k| <= N``."""
    if N < 0:
        raise ValidationError("N must be nonnegative")
    if N >= f.M // 2:
        raise AliasingError(f"N={N} is not below M/2={f.M // 2}")
    c = np.fft.rfft(f.values)
    c[N + 1:] = 0.0
    return GridSignal(np.fft.irfft(c, n=f.M))


def hilbert_transform(f: GridSignal) -> GridSignal:
    """Conjugate function: multiplier ``-i sign(k)``; mean and Nyquist mode dropped."""
    c = np.fft.rfft(f.values)
    c *= -1j
    c[0] = 0.0
    c[-1] = 0.0
    return GridSignal(np.fft.irfft(c, n=f.M))


def gm_signal(m: float, M: int) -> GridSignal:
    """``g_m(x) = |log x|**(1/m)`` at the cell midpoints; ``|{g_m > u}| = exp(-u**m)``."""
    if not m > 0:
        raise DomainError("g_m needs m > 0")
    x = GridSignal.midpoints(M)
    return GridSignal(np.abs(np.log(x)) ** (1.0 / m))


# -- moment growth of partial sums -----------------------------------------

@dataclass(frozen=True, eq=False)
class GrowthFit:
    a: float
    C: float
    b: float
    d: float
    p: np.ndarray
    ratio: np.ndarray
    residuals: np.ndarray
    # smallest C with ratio(p) <= C p on the grid
    C_linear: float = 0.0

    def to_dict(self) -> dict:
        return {"a": self.a, "C": self.C, "b": self.b, "d": self.d, "C_linear": self.C_linear,
                "p": self.p.tolist(), "ratio": self.ratio.tolist(), "residuals": self.residuals.tolist()}


def riesz_growth_fit(f: GridSignal, p_grid, N_set, b: float = 1.0, d: float = 1.0) -> GrowthFit:
    """Fit ``sup_N |S_N f|_p / |f|_p ~ C p**a`` by least squares in log-log."""
    p = np.asarray(p_grid, float)
    if not np.any(f.values):
        raise ValidationError("zero signal has no growth to fit")
    if p.size < 2:
        raise ValidationError("need at least two p values")
    base = moment_curve(f.values, p).lp_values
    sup = np.zeros_like(p)
    for N in N_set:
        s = fourier_partial_sum(f, int(N))
        sup = np.maximum(sup, moment_curve(s.values, p).lp_values)
    ratio = sup / base
    lp, lr = np.log(p), np.log(ratio)
    a, logc = np.polyfit(lp, lr, 1)
    resid = lr - (a * lp + logc)
    return GrowthFit(float(a), float(math.exp(logc)), b, d, p, ratio, resid, float(np.max(ratio / p)))


def transfer_index(m: float, a: float, b: float, d: float) -> float:
    """``n = m / (a m + b d)``."""
    if not m > 0 or a < 0 or not b > 0 or not d > 0:
        raise ValidationError("need m > 0, a >= 0, b > 0, d > 0")
    den = a * m + b * d
    if not den > 0:
        raise ValidationError("a m + b d must be positive")
    return m / den


# -- optimality of the transfer index ---------------------------------------

@dataclass
class Lemma1Report:
    m: float
    M: int
    band: float
    band_min: float
    band_max: float
    tail_slope: float
    tail_slope_refined: float
    predicted_slope: float
    gm_tail_slope: float
    unresolved: bool
    x_window: tuple
    fit_window: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _conjugate_growth(m: float, M: int):
    g = gm_signal(m, M)
    h = hilbert_transform(g)
    x = GridSignal.midpoints(M)
    lo, hi = 10.0 / M, 1e-3
    sel = (x >= lo) & (x <= hi)
    ratio = np.abs(h.values[sel]) / (np.abs(np.log(x[sel])) ** ((m + 1) / m) + 1.0)
    fit = tail_exponent_fit(h.values)
    return g, h, ratio, fit, (lo, hi)


def lemma1_experiment(m: float, M: int = 1 << 20, stability: float = 0.2) -> Lemma1Report:
    """Growth band of ``|H g_m|`` near 0 and the tail exponent of its level sets.

    The experiment is repeated at ``2M``; a slope change beyond
    ``stability`` (relative) marks the result unresolved.
    """
    if m < 1:
        raise DomainError("the experiment is posed for m >= 1")
    g, h, ratio, fit, window = _conjugate_growth(m, M)
    _, _, ratio2, fit2, _ = _conjugate_growth(m, 2 * M)
    g_fit = tail_exponent_fit(g.values)
    unresolved = abs(fit2.slope - fit.slope) > stability * abs(fit.slope)
    return Lemma1Report(
        m=m, M=M,
        band=float(ratio.max() / ratio.min()), band_min=float(ratio.min()), band_max=float(ratio.max()),
        tail_slope=fit.slope, tail_slope_refined=fit2.slope, predicted_slope=m / (m + 1),
        gm_tail_slope=g_fit.slope, unresolved=bool(unresolved), x_window=window,
        fit_window=fit.to_dict(),
    )


# -- non-convergence of partial sums in G(psi_m) ------------------------------

@dataclass
class NonconvergenceReport:
    m: float
    M: int
    N: list
    gpsi: list
    l2: list
    argmax_p: list
    p_grid: list

    @property
    def floor_ratio(self) -> float:
        return self.gpsi[-1] / self.gpsi[0]

    @property
    def l2_drop(self) -> float:
        return self.l2[0] / self.l2[-1]

    def to_dict(self) -> dict:
        return {**self.__dict__, "floor_ratio": self.floor_ratio, "l2_drop": self.l2_drop}


def nonconvergence_experiment(m: float, M: int, N_set, p_grid=None) -> NonconvergenceReport:
    """``|S_N g_m - g_m|`` in G(p**(1/m)) and in L2 for each ``N``.

    The default p-grid runs from 2 to the reliability cap of an M-point grid.
    """
    g = gm_signal(m, M)
    p = np.geomspace(2.0, DEFAULT.cap_factor * math.log2(M), 32) if p_grid is None else np.asarray(p_grid, float)
    psi = p ** (1.0 / m)
    gp, l2, am = [], [], []
    for N in N_set:
        r = fourier_partial_sum(g, int(N)).values - g.values
        lp = moment_curve(r, p).lp_values
        q = lp / psi
        i = int(np.argmax(q))
        gp.append(float(q[i]))
        am.append(float(p[i]))
        l2.append(lp_norm(r, 2.0))
    return NonconvergenceReport(m, M, [int(N) for N in N_set], gp, l2, am, p.tolist())
