"""Catalog of moment functions, slowly varying functions and tail profiles.

Two analytic families are provided,

* ``MR(m, r)``:   ``psi(p) = p**(1/m) * log(p)**r``
* ``ZBeta(Z, b)``: ``psi(p) = exp(Z * p**b)``

plus :class:`GridBacked`, which stores the curve ``p log psi(p)`` on a grid.
Every spec is defined for ``p >= 2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import trend
from .config import DEFAULT
from .convex import GridFunction, default_p_grid, is_convex, w_from_psi
from .errors import DomainError, ValidationError


def _p_array(p):
    a = np.asarray(p, dtype=float)
    if np.any(a < DEFAULT.p_min - 1e-12) or np.any(np.isnan(a)):
        raise DomainError(f"psi is defined for p >= {DEFAULT.p_min}")
    return a


class PsiSpec:
    kind = "abstract"

    def log_psi(self, p):
        raise NotImplementedError

    def __call__(self, p):
        return np.exp(self.log_psi(p))

    def p_log_psi(self, p):
        p = _p_array(p)
        return p * self.log_psi(p)

    def p_log_psi_curve(self, p_grid=None) -> GridFunction:
        p = default_p_grid() if p_grid is None else np.asarray(p_grid, float)
        return GridFunction(p, self.p_log_psi(p))

    def validate(self, p_grid=None) -> None:
        c = self.p_log_psi_curve(p_grid)
        s = c.secant_slopes()
        if np.any(s < -DEFAULT.convex_rel * max(1.0, float(np.abs(s).max()))):
            raise ValidationError(f"{self!r}: p log psi(p) is not nondecreasing on [2, {c.grid[-1]:g}]")
        if not is_convex(c.grid, c.values):
            raise ValidationError(f"{self!r}: p log psi(p) is not convex on [2, {c.grid[-1]:g}]")

    @cached_property
    def generator(self) -> GridFunction:
        """``W = (p log psi(p))*`` on its resolved z-range."""
        return w_from_psi(self)

    def to_dict(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_dict(d: dict) -> "PsiSpec":
        kind = d["kind"]
        if kind == "MR":
            return MR(float(d["m"]), float(d.get("r", 0.0)))
        if kind == "ZBeta":
            return ZBeta(float(d["Z"]), float(d["beta"]))
        if kind == "GridBacked":
            return GridBacked(GridFunction(np.asarray(d["p"], float), np.asarray(d["p_log_psi"], float)))
        raise ValidationError(f"unknown psi kind {kind!r}")


@dataclass(frozen=True)
class MR(PsiSpec):
    m: float
    r: float = 0.0
    kind = "MR"

    def __post_init__(self):
        if not self.m > 0:
            raise ValidationError("MR needs m > 0")

    def log_psi(self, p):
        p = _p_array(p)
        out = np.log(p) / self.m
        if self.r:
            out = out + self.r * np.log(np.log(p))
        return out

    def to_dict(self):
        return {"kind": "MR", "m": self.m, "r": self.r}

    def __hash__(self):
        return hash(("MR", self.m, self.r))


@dataclass(frozen=True)
class ZBeta(PsiSpec):
    Z: float
    beta: float
    kind = "ZBeta"

    def __post_init__(self):
        if not (self.Z > 0 and self.beta > 0):
            raise ValidationError("ZBeta needs Z > 0 and beta > 0")

    def log_psi(self, p):
        return self.Z * _p_array(p) ** self.beta

    def to_dict(self):
        return {"kind": "ZBeta", "Z": self.Z, "beta": self.beta}

    def __hash__(self):
        return hash(("ZBeta", self.Z, self.beta))


@dataclass(frozen=True, eq=False)
class GridBacked(PsiSpec):
    curve: GridFunction
    kind = "GridBacked"

    def __post_init__(self):
        if self.curve.grid[0] < DEFAULT.p_min - 1e-12:
            raise DomainError("grid-backed psi must start at p >= 2")
        self.validate()

    def log_psi(self, p):
        p = _p_array(p)
        g = self.curve.grid
        if np.any(p > g[-1] * (1 + 1e-12)) or np.any(p < g[0] * (1 - 1e-12)):
            raise DomainError(f"grid-backed psi is tabulated on [{g[0]:g}, {g[-1]:g}]")
        return np.interp(p, g, self.curve.values) / p

    def p_log_psi_curve(self, p_grid=None):
        if p_grid is None:
            return GridFunction(self.curve.grid, self.curve.values)
        return super().p_log_psi_curve(p_grid)

    def validate(self, p_grid=None):
        super().validate(self.curve.grid if p_grid is None else p_grid)

    def to_dict(self):
        return {"kind": "GridBacked", "p": self.curve.grid.tolist(), "p_log_psi": self.curve.values.tolist()}


def psi_eval(spec: PsiSpec, p):
    """``psi(p)``; raises :class:`DomainError` for ``p < 2``."""
    return spec(p)


# -- tail profiles -----------------------------------------------------

def log_tail_profile(spec: PsiSpec, x, x_min: float = math.exp(2.0), exact: bool = False):
    """Logarithm of the tail shape attached to ``spec`` at level ``x``.

    ``MR(m, r)``: ``-x**m * log(x)**(-m r)``, the N_{m,r} exponent with unit
    constants.  ``ZBeta``: ``-Z**(-1/b) (1+b)**(1+1/b) log(x)**(1+1/b)`` as
    displayed for V(Z, beta) spaces; ``exact=True`` uses the coefficient of
    the Legendre transform of ``Z p**(1+b)`` instead.  ``GridBacked``:
    ``-W(log x)`` with ``W`` from :func:`~orlicz.convex.w_from_psi`.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < x_min):
        raise DomainError(f"tail profile is only valid for x >= {x_min:g}")
    lx = np.log(x)
    if isinstance(spec, MR):
        out = -(x**spec.m) * lx ** (-spec.m * spec.r)
    elif isinstance(spec, ZBeta):
        b, z = spec.beta, spec.Z
        if exact:
            coef = z ** (-1 / b) * b * (1 + b) ** (-1 - 1 / b)
        else:
            coef = z ** (-1 / b) * (1 + b) ** (1 + 1 / b)
        out = -coef * lx ** (1 + 1 / b)
    elif isinstance(spec, GridBacked):
        out = -np.asarray(spec.generator(lx))
    else:
        raise ValidationError(f"no tail profile for {spec!r}")
    return out if np.ndim(out) else float(out)


def tail_profile(spec: PsiSpec, x, x_min: float = math.exp(2.0), exact: bool = False):
    return np.exp(log_tail_profile(spec, x, x_min, exact))


# -- slowly varying functions ----------------------------------------

class SlowlyVaryingSpec:
    def __call__(self, u):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_dict(d: dict | None) -> "SlowlyVaryingSpec":
        if d is None:
            return Const(1.0)
        kind = d["kind"]
        if kind == "Const":
            return Const(float(d.get("c", 1.0)))
        if kind == "LogPower":
            return LogPower(float(d["s"]), float(d.get("C", 2.0)))
        if kind == "Product":
            return Product(tuple(SlowlyVaryingSpec.from_dict(f) for f in d["factors"]))
        raise ValidationError(f"unknown slowly varying kind {kind!r}")

    @property
    def is_constant(self) -> bool:
        return False


@dataclass(frozen=True)
class Const(SlowlyVaryingSpec):
    c: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValidationError("Const needs c > 0")

    def __call__(self, u):
        u = np.asarray(u, float)
        return np.full(u.shape, self.c) if u.ndim else self.c

    def to_dict(self):
        return {"kind": "Const", "c": self.c}

    @property
    def is_constant(self):
        return True


@dataclass(frozen=True)
class LogPower(SlowlyVaryingSpec):
    """``L(u) = log(C + u)**s``."""

    s: float
    C: float = 2.0

    def __post_init__(self):
        if self.C < 2:
            raise ValidationError("LogPower needs shift C >= 2")

    def __call__(self, u):
        return np.log(self.C + np.asarray(u, float)) ** self.s

    def to_dict(self):
        return {"kind": "LogPower", "s": self.s, "C": self.C}


@dataclass(frozen=True)
class Product(SlowlyVaryingSpec):
    factors: tuple = field(default_factory=tuple)

    def __call__(self, u):
        out = np.ones_like(np.asarray(u, float))
        for f in self.factors:
            out = out * f(u)
        return out if np.ndim(out) else float(out)

    def to_dict(self):
        return {"kind": "Product", "factors": [f.to_dict() for f in self.factors]}

    @property
    def is_constant(self):
        return all(f.is_constant for f in self.factors)


def slowly_varying_residual(L: SlowlyVaryingSpec, u_grid) -> np.ndarray:
    """``|L(u / L(u)) / L(u) - 1|`` on ``u_grid``."""
    u = np.asarray(u_grid, float)
    if np.any(u < 2) or np.any(np.diff(u) <= 0):
        raise ValidationError("u_grid must be increasing and >= 2")
    lu = np.asarray(L(u), float)
    return np.abs(np.asarray(L(u / lu), float) / lu - 1.0)


# -- essential ordering ------------------------------------------------

@dataclass(frozen=True)
class OrderVerdict:
    verdict: str  # dominated | comparable | dominating | inconclusive
    slope: float
    c1: float
    c2: float
    p: np.ndarray
    ratio: np.ndarray

    def to_dict(self):
        return {"verdict": self.verdict, "slope": self.slope, "c1": self.c1, "c2": self.c2,
                "p": self.p.tolist(), "ratio": self.ratio.tolist()}


def essential_order(psi: PsiSpec, nu: PsiSpec, p_grid=None, tol: float | None = None) -> OrderVerdict:
    """Trend of ``psi(p) / nu(p)`` on the upper half of ``p_grid``."""
    p = default_p_grid(256) if p_grid is None else np.asarray(p_grid, float)
    lr = psi.log_psi(p) - nu.log_psi(p)
    ratio = np.exp(lr)
    t = trend.classify(p, ratio, DEFAULT.trend_slope_tol if tol is None else tol)
    upper = ratio[p.size // 2:]
    c1, c2 = float(upper.min()), float(upper.max())
    verdict = {
        trend.DECREASING: "dominated",
        trend.GROWING: "dominating",
        trend.INCONCLUSIVE: "inconclusive",
    }.get(t.verdict)
    if verdict is None:
        verdict = "comparable" if c2 <= DEFAULT.comparable_band * c1 else "inconclusive"
    return OrderVerdict(verdict, t.slope, c1, c2, p, ratio)
