"""Reproducible samplers for Rademacher series, symmetric Weibull-type laws
and their products, with the matching theoretical tail and MGF shapes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import integrate, special
from scipy.special import logsumexp

from .config import DEFAULT
from .errors import ValidationError
from .norms import Sample
from .psi import Const, SlowlyVaryingSpec
from .rng import BLOCK, SeedSpec, block_generator, blocks


def _sv(L) -> SlowlyVaryingSpec:
    if L is None:
        return Const(1.0)
    if isinstance(L, dict):
        return SlowlyVaryingSpec.from_dict(L)
    return L


# -- Rademacher series ---------------------------------------------------

@dataclass(frozen=True)
class RademacherSeriesSpec:
    """``xi = sum_{k=2}^{K} k**(-B) L(k) eps(k)``."""

    B: float
    L: SlowlyVaryingSpec = field(default_factory=Const)
    K: int = 10_000

    def __post_init__(self):
        object.__setattr__(self, "L", _sv(self.L))
        if not 0.5 < self.B < 1.0:
            raise ValidationError(f"B must lie in (0.5, 1), got {self.B}")
        if int(self.K) != self.K or self.K < 2:
            raise ValidationError("truncation K must be an integer >= 2")
        object.__setattr__(self, "K", int(self.K))

    def weights(self) -> np.ndarray:
        k = np.arange(2, self.K + 1, dtype=float)
        return k ** (-self.B) * np.asarray(self.L(k), float)

    def variance(self) -> float:
        w = self.weights()
        return float(np.sum(w * w))

    def tail_variance(self) -> float:
        """Variance discarded by truncating at ``K``."""
        if self.L.is_constant:
            c = float(self.L(1.0))
            return c * c * float(special.zeta(2 * self.B, self.K + 1))
        # midpoint rule for the sum, as an integral from K + 1/2
        f = lambda x: x ** (-2 * self.B) * float(self.L(x)) ** 2
        return float(integrate.quad(f, self.K + 0.5, np.inf, limit=200)[0])

    def to_dict(self) -> dict:
        return {"kind": "rademacher", "B": self.B, "L": self.L.to_dict(), "K": self.K}


@numba.njit(cache=True)
def _byte_table_sums(codes, tables):
    # codes: (n, G) uint8 sign patterns; tables: (G, 256) partial sums
    n, g = codes.shape
    out = np.empty(n)
    for i in range(n):
        s = 0.0
        for j in range(g):
            s += tables[j, codes[i, j]]
        out[i] = s
    return out


def _byte_tables(w: np.ndarray) -> np.ndarray:
    """``tables[g, c] = sum_b w[8g+b] * (+1 if bit b of c else -1)``."""
    g = -(-w.size // 8)
    wp = np.zeros(8 * g)
    wp[: w.size] = w
    bits = ((np.arange(256)[:, None] >> np.arange(8)[None, :]) & 1) * 2.0 - 1.0  # (256, 8)
    return wp.reshape(g, 8) @ bits.T


def sample_rademacher_series(spec: RademacherSeriesSpec, n: int, seed) -> Sample:
    """``n`` independent copies of the truncated series.

    Signs are read eight at a time as bytes and summed through per-byte
    lookup tables, one table per run of eight consecutive weights.
    """
    seed = SeedSpec.coerce(seed)
    if n < 1:
        raise ValidationError("n must be >= 1")
    tables = _byte_tables(spec.weights())
    g = tables.shape[0]
    out = np.empty(n)
    for b, lo, hi in blocks(n):
        codes = block_generator(seed, b).integers(0, 256, size=(hi - lo, g), dtype=np.uint8)
        out[lo:hi] = _byte_table_sums(codes, tables)
    return Sample(out, {"generator": spec.to_dict(), "seed": seed.to_dict(), "n": n,
                        "tail_variance": spec.tail_variance()})


@dataclass(frozen=True)
class TailExponent:
    """``-log P(|xi| > u)`` behaves like ``u**exponent * Ltilde(u)``."""

    exponent: float
    B: float
    L: SlowlyVaryingSpec

    def l_tilde(self, u):
        a = self.exponent
        return np.asarray(self.L(np.asarray(u, float) ** a), float) ** (-a)

    def shape(self, u):
        u = np.asarray(u, float)
        return u**self.exponent * self.l_tilde(u)

    def to_dict(self) -> dict:
        return {"exponent": self.exponent, "B": self.B, "L": self.L.to_dict()}


def rademacher_tail_exponent(spec: RademacherSeriesSpec) -> TailExponent:
    return TailExponent(1.0 / (1.0 - spec.B), spec.B, spec.L)


# -- symmetric Weibull-type laws ------------------------------------------

@dataclass(frozen=True)
class WeibullSymSpec:
    """Symmetric law with ``P(|X| > x) = exp(-x**m L(x))``."""

    m: float
    L: SlowlyVaryingSpec = field(default_factory=Const)

    def __post_init__(self):
        object.__setattr__(self, "L", _sv(self.L))
        if not self.m > 0:
            raise ValidationError("WeibullSymSpec needs m > 0")
        if not self.L.is_constant:
            x = np.geomspace(1e-6, 1e6, 4001)
            h = self.hazard(x)
            if not (np.all(np.isfinite(h)) and np.all(np.diff(h) > 0) and h[0] < 1e-3):
                raise ValidationError("x**m L(x) is not increasing from 0; the tail cannot be inverted")

    def hazard(self, x):
        x = np.asarray(x, float)
        return x**self.m * np.asarray(self.L(x), float)

    def to_dict(self) -> dict:
        return {"kind": "weibull", "m": self.m, "L": self.L.to_dict()}


def _invert_hazard(spec: WeibullSymSpec, e: np.ndarray) -> np.ndarray:
    """Solve ``x**m L(x) = e`` by vectorised bisection."""
    if spec.L.is_constant:
        return (e / float(spec.L(1.0))) ** (1.0 / spec.m)
    lo = np.zeros_like(e)
    hi = np.ones_like(e)
    while True:
        short = spec.hazard(hi) < e
        if not np.any(short):
            break
        hi[short] *= 2.0
    tol = DEFAULT.inversion_xtol
    while np.any(hi - lo > tol * np.maximum(hi, 1.0)):
        mid = 0.5 * (lo + hi)
        up = spec.hazard(mid) >= e
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    return 0.5 * (lo + hi)


def sample_weibull_symmetric(spec: WeibullSymSpec, n: int, seed) -> Sample:
    seed = SeedSpec.coerce(seed)
    if n < 1:
        raise ValidationError("n must be >= 1")
    out = np.empty(n)
    for b, lo, hi in blocks(n):
        gen = block_generator(seed, b)
        e = gen.standard_exponential(hi - lo)
        sign = gen.integers(0, 2, hi - lo) * 2.0 - 1.0
        out[lo:hi] = sign * _invert_hazard(spec, e)
    return Sample(out, {"generator": spec.to_dict(), "seed": seed.to_dict(), "n": n})


def sample_product(xi, eta, n: int, seed) -> Sample:
    """Coordinatewise product of independent draws; either factor may be a fixed Sample."""
    seed = SeedSpec.coerce(seed)

    def draw(f, k):
        if isinstance(f, Sample):
            if f.n != n:
                raise ValidationError("fixed factor length differs from n")
            return f
        return sample_weibull_symmetric(f, n, seed.substream(k))

    a, b = draw(xi, 0), draw(eta, 1)
    return Sample(a.values * b.values, {"generator": {"kind": "product", "xi": a.provenance, "eta": b.provenance},
                                        "seed": seed.to_dict(), "n": n})


# -- moment generating function bound --------------------------------------

@dataclass(frozen=True)
class MGFMargin:
    lam: np.ndarray
    log_mgf: np.ndarray
    margin: np.ndarray
    C: float

    def to_dict(self) -> dict:
        return {"lambda": self.lam.tolist(), "log_mgf": self.log_mgf.tolist(),
                "margin": self.margin.tolist(), "C": self.C}


def mgf_bound_check(s: Sample, m: float, L: SlowlyVaryingSpec | None, lambda_grid) -> MGFMargin:
    """Margin ``log E exp(lam x) / (lam**(m/(m-1)) L(lam**(1/(m-1)))**(-1/(m-1)))``.

    The log-MGF is the larger of the two signs ``+-lam``; ``C`` is the
    smallest constant for which the bound holds on the grid.
    """
    if not m > 1:
        raise ValidationError("the MGF bound needs m > 1")
    L = _sv(L)
    x = s.values
    sd = float(np.std(x))
    if abs(float(np.mean(x))) > 3.0 * sd / math.sqrt(x.size) + 1e-300:
        raise ValidationError("sample is not centred: |mean| > 3 sd / sqrt(n)")
    lam = np.asarray(lambda_grid, float)
    if np.any(lam < 0):
        raise ValidationError("lambda grid must be nonnegative")
    logn = math.log(x.size)
    lm = np.array([max(logsumexp(l * x), logsumexp(-l * x)) - logn for l in lam])
    lm = np.where(lam == 0, 0.0, lm)
    q = 1.0 / (m - 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = lam ** (m * q) * np.asarray(L(lam**q), float) ** (-q)
        margin = np.where(lam > 0, lm / scale, np.nan)
    pos = margin[np.isfinite(margin)]
    C = float(pos.max()) if pos.size else 0.0
    return MGFMargin(lam, lm, margin, C)


# -- descriptor dispatch ----------------------------------------------------

def _simple_law(draw, name):
    def sampler(desc, n, seed):
        out = np.empty(n)
        for b, lo, hi in blocks(n):
            out[lo:hi] = draw(block_generator(seed, b), hi - lo, desc)
        return Sample(out, {"generator": dict(desc), "seed": seed.to_dict(), "n": n})
    sampler.__name__ = f"sample_{name}"
    return sampler


_SIMPLE = {
    "gaussian": _simple_law(lambda g, k, d: d.get("scale", 1.0) * g.standard_normal(k), "gaussian"),
    "exponential": _simple_law(lambda g, k, d: d.get("scale", 1.0) * g.standard_exponential(k), "exponential"),
    "uniform": _simple_law(lambda g, k, d: d.get("scale", 1.0) * (2.0 * g.random(k) - 1.0), "uniform"),
}


def generator_from_dict(desc: dict):
    """Spec object for a descriptor of kind ``rademacher``, ``weibull`` or ``product``."""
    kind = desc.get("kind")
    if kind == "rademacher":
        return RademacherSeriesSpec(float(desc["B"]), desc.get("L"), int(desc.get("K", 10_000)))
    if kind == "weibull":
        return WeibullSymSpec(float(desc["m"]), desc.get("L"))
    raise ValidationError(f"no spec object for generator kind {kind!r}")


def sample_from_dict(desc: dict, n: int, seed) -> Sample:
    """Draw ``n`` values for a JSON generator descriptor.

    Kinds: ``gaussian``, ``exponential``, ``uniform`` (optional ``scale``),
    ``weibull`` (``m``, ``L``), ``rademacher`` (``B``, ``L``, ``K``) and
    ``product`` (``xi``, ``eta``: two weibull descriptors).
    """
    seed = SeedSpec.coerce(seed)
    kind = desc.get("kind")
    if kind in _SIMPLE:
        return _SIMPLE[kind](desc, n, seed)
    if kind == "weibull":
        return sample_weibull_symmetric(generator_from_dict(desc), n, seed)
    if kind == "rademacher":
        return sample_rademacher_series(generator_from_dict(desc), n, seed)
    if kind == "product":
        return sample_product(generator_from_dict(desc["xi"]), generator_from_dict(desc["eta"]), n, seed)
    raise ValidationError(f"unknown generator kind {kind!r}")
