"""Discrete Legendre-Fenchel machinery.

A generator ``W`` lives on ``[2, inf)``; its conjugate
``W*(p) = sup_{z >= 2} (p z - W(z))`` gives the moment function
``psi(p) = exp(W*(p) / p)`` and the N-function is
``N(u) = exp(W(log u))`` for ``u >= e**2`` with a quadratic patch below.

Extrapolation convention for :class:`GridFunction`:

* ``left_slope = -inf`` is a wall: the grid start is a genuine domain
  boundary and a maximizer sitting there is legitimate.
* ``right_slope = +inf`` marks an *open* upper end: the true function
  continues beyond the grid, so a maximizer at the last node means the
  supremum was not resolved and :class:`TruncatedDomainError` is raised.
* finite slopes extend the function linearly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .config import DEFAULT
from .errors import DomainError, TruncatedDomainError, ValidationError

E2 = math.exp(2.0)


def _as_grid(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim != 1:
        raise ValidationError("grid must be one-dimensional")
    return a


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: np.ndarray
    values: np.ndarray
    left_slope: float = -math.inf
    right_slope: float = math.inf
    convex: bool = False
    # abscissa of the maximizer per node, filled in by fenchel_conjugate
    maximizer: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        g = _as_grid(self.grid)
        v = _as_grid(self.values)
        if g.size < 2:
            raise ValidationError("grid needs at least two points")
        if g.shape != v.shape:
            raise ValidationError("grid and values differ in length")
        if not np.all(np.diff(g) > 0):
            raise ValidationError("grid must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValidationError("values must be finite")
        g.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        if self.convex and not is_convex(g, v):
            raise ValidationError("function flagged convex fails the second-difference test")

    def __len__(self):
        return self.grid.size

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        g, v = self.grid, self.values
        out = np.interp(z, g, v)
        lo = z < g[0]
        hi = z > g[-1]
        if np.any(lo):
            if math.isinf(self.left_slope):
                raise DomainError(f"z={z[lo].min():g} below the grid start {g[0]:g}")
            out = np.where(lo, v[0] + self.left_slope * (z - g[0]), out)
        if np.any(hi):
            if math.isinf(self.right_slope):
                raise DomainError(f"z={z[hi].max():g} beyond the grid end {g[-1]:g}")
            out = np.where(hi, v[-1] + self.right_slope * (z - g[-1]), out)
        return out if out.ndim else float(out)

    def secant_slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.grid)

    def with_slopes(self, left_slope=None, right_slope=None) -> "GridFunction":
        return GridFunction(
            self.grid,
            self.values,
            self.left_slope if left_slope is None else left_slope,
            self.right_slope if right_slope is None else right_slope,
            self.convex,
        )

    # -- serialization -------------------------------------------------
    def to_csv(self, path) -> None:
        path = Path(path)
        np.savetxt(path, np.column_stack([self.grid, self.values]), delimiter=",",
                   header="z,value", comments="", fmt="%.17g")
        sidecar = {
            "left_slope": _enc(self.left_slope),
            "right_slope": _enc(self.right_slope),
            "convex": self.convex,
        }
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2))

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        path = Path(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        side = path.with_suffix(path.suffix + ".json")
        meta = json.loads(side.read_text()) if side.exists() else {}
        return cls(
            data[:, 0],
            data[:, 1],
            _dec(meta.get("left_slope", "-inf")),
            _dec(meta.get("right_slope", "inf")),
            bool(meta.get("convex", False)),
        )


def _enc(x: float):
    return repr(float(x)) if math.isinf(x) else float(x)


def _dec(x) -> float:
    return float(x)


def second_differences(grid, values) -> np.ndarray:
    """Divided second differences (exact zero for affine data)."""
    g = np.asarray(grid, float)
    v = np.asarray(values, float)
    s = np.diff(v) / np.diff(g)
    return np.diff(s) / (0.5 * (g[2:] - g[:-2]))


def is_convex(grid, values, rel: float = DEFAULT.convex_rel) -> bool:
    if len(grid) < 3:
        return True
    s = np.diff(values) / np.diff(grid)
    scale = max(1.0, float(np.max(np.abs(s))))
    return bool(np.all(np.diff(s) >= -rel * scale))


@numba.njit(cache=True)
def _hull_kernel(grid, values):
    idx = np.empty(grid.size, dtype=np.int64)
    top = 0
    for i in range(grid.size):
        while top >= 2:
            a = idx[top - 2]
            b = idx[top - 1]
            # drop b if it lies on or above the chord a -> i
            cross = (grid[b] - grid[a]) * (values[i] - values[a]) - (values[b] - values[a]) * (grid[i] - grid[a])
            if cross <= 0:
                top -= 1
            else:
                break
        idx[top] = i
        top += 1
    return idx[:top]


def lower_hull(grid: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Indices of the lower convex hull of the points (monotone chain)."""
    return _hull_kernel(np.ascontiguousarray(grid, float), np.ascontiguousarray(values, float)).astype(np.intp)


def fenchel_conjugate(f: GridFunction, dual_grid) -> GridFunction:
    """Discrete conjugate ``g(p) = max_z (p z - f(z))`` on ``dual_grid``.

    Maximizers are found by sweeping the dual points against the secant
    slopes of the lower hull of ``f``; for convex ``f`` the hull is the
    whole grid and the argmax is nondecreasing in ``p``.

    Raises
    ------
    TruncatedDomainError
        If some maximizer sits at an open grid end, or ``p`` exceeds a
        finite extrapolation slope (the supremum is then infinite).
    """
    p = _as_grid(dual_grid)
    if p.size < 2 or not np.all(np.diff(p) > 0):
        raise ValidationError("dual grid must be strictly increasing with >= 2 points")
    if is_convex(f.grid, f.values):
        hz, hv = f.grid, f.values
        # absorb rounding-level dents so the slopes are sorted
        slopes = np.maximum.accumulate(np.diff(hv) / np.diff(hz))
    else:
        hull = lower_hull(f.grid, f.values)
        hz, hv = f.grid[hull], f.values[hull]
        slopes = np.diff(hv) / np.diff(hz)
    # first hull node whose outgoing slope is >= p
    k = np.searchsorted(slopes, p, side="left")
    last = hz.size - 1

    if not math.isinf(f.left_slope):
        bad = p < f.left_slope
        if np.any(bad):
            raise TruncatedDomainError(
                f"p={p[bad][0]:g} below the left extrapolation slope {f.left_slope:g}: supremum is infinite")
    if math.isinf(f.right_slope):
        bad = k == last
        if np.any(bad):
            raise TruncatedDomainError(
                f"maximizer at the open upper grid end z={f.grid[-1]:g} for p={p[bad][0]:g}")
    else:
        bad = p > f.right_slope
        if np.any(bad):
            raise TruncatedDomainError(
                f"p={p[bad][0]:g} exceeds the right extrapolation slope {f.right_slope:g}: supremum is infinite")

    zstar = hz[k]
    vals = p * zstar - hv[k]
    return GridFunction(p, vals, -math.inf, math.inf, convex=False, maximizer=zstar)


def brute_force_conjugate(f: GridFunction, dual_grid) -> tuple[np.ndarray, np.ndarray]:
    """Reference double loop, O(len(f) * len(dual_grid)); grid nodes only."""
    p = np.asarray(dual_grid, float)
    vals = np.empty_like(p)
    arg = np.empty_like(p)
    for j, pj in enumerate(p):
        obj = pj * f.grid - f.values
        i = int(np.argmax(obj))
        vals[j] = obj[i]
        arg[j] = f.grid[i]
    return vals, arg


def default_p_grid(n: int | None = None, p_max: float | None = None) -> np.ndarray:
    return np.geomspace(DEFAULT.p_min, p_max or DEFAULT.p_max, n or DEFAULT.grid_points)


def psi_from_w(w: GridFunction, p_grid=None):
    """Grid-backed moment function ``psi(p) = exp(W*(p) / p)``."""
    from .psi import GridBacked

    p = default_p_grid() if p_grid is None else _as_grid(p_grid)
    if np.any(p < DEFAULT.p_min):
        raise DomainError("moment functions are defined for p >= 2")
    if not is_convex(w.grid, w.values):
        raise ValidationError("W must be convex on its grid")
    ws = fenchel_conjugate(w, p)
    curve = GridFunction(ws.grid, ws.values, -math.inf, math.inf, maximizer=ws.maximizer)
    return GridBacked(curve)


def w_from_psi(psi, z_grid=None, p_grid=None, n_z: int | None = None) -> GridFunction:
    """Generator ``W = (p log psi(p))*`` tabulated on ``z_grid``.

    Without ``z_grid`` the grid spans the slope range of the curve
    ``p log psi(p)``, i.e. exactly the ``z`` whose maximizer is resolved.
    """
    curve = psi.p_log_psi_curve(p_grid)
    if not is_convex(curve.grid, curve.values):
        raise ValidationError("p log psi(p) is not convex on the grid")
    s = curve.secant_slopes()
    if np.any(s < -DEFAULT.convex_rel * max(1.0, float(np.max(np.abs(s))))):
        raise ValidationError("p log psi(p) is not nondecreasing on the grid")
    if z_grid is None:
        lo, hi = float(s[0]), float(s[-1])
        if not hi > lo:
            raise TruncatedDomainError("p log psi(p) is affine on the grid; the supremum is unresolved for every z")
        z_grid = np.linspace(lo, hi, n_z or DEFAULT.grid_points)
    w = fenchel_conjugate(curve, z_grid)
    # below the grid the maximizer is pinned at p = p_grid[0]: W is affine there
    return GridFunction(w.grid, w.values, float(curve.grid[0]), math.inf, maximizer=w.maximizer)


def biconjugate_residual(f: GridFunction) -> float:
    """Sup distance between ``f`` and ``f**`` on the interior grid nodes."""
    s = f.secant_slopes()
    lo, hi = float(s.min()), float(s.max())
    if hi <= lo:
        return 0.0
    ext = GridFunction(f.grid, f.values, left_slope=lo, right_slope=hi)
    p = np.linspace(lo, hi, max(f.grid.size, 2))
    fs = fenchel_conjugate(ext, p)
    fs = GridFunction(fs.grid, fs.values, left_slope=float(f.grid[0]), right_slope=float(f.grid[-1]))
    inner = f.grid[1:-1]
    fss = fenchel_conjugate(fs, inner)
    return float(np.max(np.abs(f.values[1:-1] - fss.values)))


@dataclass(frozen=True)
class ClosedFormW:
    """Generator given by a formula, usable far beyond any tabulated grid.

    ``kind="exp"``: ``W(z) = exp(m z - 1) / m``, the generator of ``psi(p) = p**(1/m)``.
    ``kind="power"``: ``W(z) = c * z**m``.
    """

    kind: str
    m: float
    c: float = 1.0

    def __post_init__(self):
        if self.kind not in ("exp", "power"):
            raise ValidationError(f"unknown closed-form generator {self.kind!r}")
        if not (self.m > 0 and self.c > 0):
            raise ValidationError("closed-form generator needs m > 0 and c > 0")
        if self.kind == "power" and self.m < 1:
            raise ValidationError("c z**m is convex only for m >= 1")

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if np.any(z < DEFAULT.p_min - 1e-12):
            raise DomainError("generators are defined on [2, inf)")
        with np.errstate(over="ignore"):
            out = np.exp(self.m * z - 1.0) / self.m if self.kind == "exp" else self.c * z**self.m
        return out if out.ndim else float(out)

    def tabulate(self, z_grid) -> GridFunction:
        z = _as_grid(z_grid)
        return GridFunction(z, self(z), -math.inf, math.inf)


@dataclass(frozen=True, eq=False)
class NFunctionSpec:
    """``N(u) = exp(W(log u))`` for ``u >= e**2``, ``C u**2`` below, even in ``u``."""

    w: GridFunction | ClosedFormW
    quad_coeff: float
    splice_u: float = E2

    def log_value(self, u) -> np.ndarray:
        a = np.abs(np.asarray(u, dtype=float))
        out = np.full(a.shape, -np.inf)
        hi = a >= self.splice_u
        lo = (a > 0) & ~hi
        if np.any(hi):
            out[hi] = self.w(np.log(a[hi]))
        if np.any(lo):
            out[lo] = math.log(self.quad_coeff) + 2.0 * np.log(a[lo])
        return out if out.ndim else float(out)

    def log_value_at_log(self, log_u: np.ndarray) -> np.ndarray:
        """``log N(u)`` from ``log u`` (u > 0); avoids recomputing logarithms in scans."""
        lu = np.asarray(log_u, dtype=float)
        ls = math.log(self.splice_u)
        hi = lu >= ls
        out = math.log(self.quad_coeff) + 2.0 * lu
        if np.any(hi):
            out = np.where(hi, self.w(np.where(hi, lu, ls)), out)
        return out

    def __call__(self, u):
        with np.errstate(over="ignore"):
            return np.exp(self.log_value(u))

    def check(self, n: int = 2001) -> None:
        """Continuity, monotonicity and convexity on a test grid."""
        if isinstance(self.w, GridFunction):
            zg, wv = self.w.grid, self.w.values
        else:
            zg = np.linspace(math.log(self.splice_u), 60.0, 4001)
            wv = self.w(zg)
        z_hi = float(zg[-1])
        # keep N(u) representable
        zs = zg[wv <= 600.0]
        if zs.size:
            z_hi = min(z_hi, float(zs[-1]))
        z_hi = max(z_hi, math.log(self.splice_u) + 1e-3)
        u = np.unique(np.concatenate([
            np.linspace(0.0, self.splice_u, n // 2),
            np.exp(np.linspace(math.log(self.splice_u), z_hi, n // 2)),
        ]))
        v = self(u)
        left = self.quad_coeff * self.splice_u**2
        right = float(np.exp(self.w(math.log(self.splice_u))))
        if not math.isclose(left, right, rel_tol=1e-9):
            raise ValidationError(f"N is discontinuous at the splice: {left:g} vs {right:g}")
        if np.any(np.diff(v) < -1e-12 * v.max()):
            raise ValidationError("N is not nondecreasing")
        if not is_convex(u, v, rel=1e-7):
            raise ValidationError("spliced N is not convex on the test grid")


def n_from_w(w: GridFunction | ClosedFormW) -> NFunctionSpec:
    w2 = float(w(2.0))
    spec = NFunctionSpec(w, math.exp(w2) / math.exp(4.0), E2)
    spec.check()
    return spec
