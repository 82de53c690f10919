"""Martingale simulators, the R-function bound and convergence diagnostics."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from pathlib import Path

import numpy as np
from scipy import integrate, special
from scipy.optimize import minimize_scalar

from .config import DEFAULT
from .convex import NFunctionSpec
from .errors import BudgetExceeded, DomainError, ValidationError
from .norms import gpsi_norm, moment_curve, reliability_cap
from .psi import Const, PsiSpec, SlowlyVaryingSpec, essential_order
from .rng import SeedSpec, block_generator
from . import trend

KINDS = ("Simple", "DoubleProduct", "YSeries")


@dataclass(frozen=True)
class MartingaleSpec:
    """``Simple``: ``S_n = sum_{k=2}^n k**-B L0(k) eps(k)``.

    ``DoubleProduct``: ``sum_{i != j <= n} a_i a_j eps(i,1) eps(j,2)`` with
    ``a_k = k**-B L0(k)``.  ``YSeries``: ``sum_{d <= d_max} d**(-d gamma)
    Y(d, n)``, ``Y(d, n)`` the sum over distinct ``k_1..k_d <= n`` of
    ``prod_i eps(k_i, i, d) k_i**-B``.
    """

    kind: str
    B: float
    n_max: int
    L0: SlowlyVaryingSpec = field(default_factory=Const)
    gamma: float = 1.0
    d_max: int = 6
    K: int | None = None

    def __post_init__(self):
        if isinstance(self.L0, dict):
            object.__setattr__(self, "L0", SlowlyVaryingSpec.from_dict(self.L0))
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}")
        if not 0.5 < self.B < 1.0:
            raise ValidationError(f"B must lie in (0.5, 1), got {self.B}")
        if int(self.n_max) != self.n_max or self.n_max < 2:
            raise ValidationError("n_max must be an integer >= 2")
        if not self.gamma > 0:
            raise ValidationError("gamma must be positive")
        if int(self.d_max) != self.d_max or self.d_max < 1:
            raise ValidationError("d_max must be an integer >= 1")
        K = self.n_max if self.K is None else self.K
        if K < self.n_max:
            raise ValidationError("truncation K must be >= n_max")
        object.__setattr__(self, "K", int(K))

    @property
    def first_index(self) -> int:
        return 2 if self.kind == "Simple" else 1

    def weights(self, upto: int | None = None) -> np.ndarray:
        """``a_k`` for k = first_index..upto (default K)."""
        k = np.arange(self.first_index, (upto or self.K) + 1, dtype=float)
        L = self.L0 if self.kind != "YSeries" else Const(1.0)
        return k ** (-self.B) * np.asarray(L(k), float)

    def _power_sum_beyond(self, j: int, n: int) -> float:
        """``sum_{k > n} a_k**(2j)``."""
        if self.kind == "YSeries" or self.L0.is_constant:
            c = 1.0 if self.kind == "YSeries" else float(self.L0(1.0))
            return c ** (2 * j) * float(special.zeta(2 * j * self.B, n + 1))
        f = lambda x: (x ** (-self.B) * float(self.L0(x))) ** (2 * j)
        return float(integrate.quad(f, n + 0.5, np.inf, limit=200)[0])

    def _second_moment(self, power_sums) -> float:
        """``E S**2`` from the power sums ``p_j = sum a_k**(2j)``, j = 1..d_max."""
        if self.kind == "Simple":
            return power_sums[0]
        if self.kind == "DoubleProduct":
            return power_sums[0] ** 2 - power_sums[1]
        e = _elementary_from_power_sums(power_sums, self.d_max)
        return sum(float(d) ** (-2 * d * self.gamma) * math.factorial(d) * e[d] for d in range(1, self.d_max + 1))

    def _orders(self) -> int:
        return {"Simple": 1, "DoubleProduct": 2, "YSeries": self.d_max}[self.kind]

    def variance(self, n: int) -> float:
        """Exact ``E S_n**2``."""
        w2 = self.weights(n) ** 2
        return self._second_moment([float(np.sum(w2**j)) for j in range(1, self._orders() + 1)])

    def tail_variance(self) -> float:
        """``E (S_inf - S_K)**2``, the variance discarded by the truncation.

        Every kind is orthogonal across index sets, so this is the limit
        variance minus the variance at ``K``.
        """
        w2 = self.weights() ** 2
        inner = [float(np.sum(w2**j)) for j in range(1, self._orders() + 1)]
        full = [v + self._power_sum_beyond(j, self.K) for j, v in enumerate(inner, start=1)]
        return self._second_moment(full) - self._second_moment(inner)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "B": self.B, "n_max": self.n_max, "L0": self.L0.to_dict(),
                "gamma": self.gamma, "d_max": self.d_max, "K": self.K}


def _elementary_from_power_sums(p, d: int) -> list:
    """Elementary symmetric ``e_0..e_d`` via Newton's identities."""
    e = [1.0]
    for k in range(1, d + 1):
        e.append(sum((-1) ** (i - 1) * e[k - i] * p[i - 1] for i in range(1, k + 1)) / k)
    return e


# -- partition-lattice evaluation of distinct-index sums ----------------------

@lru_cache(maxsize=None)
def _set_partitions(d: int):
    """All set partitions of ``range(d)`` as tuples of bitmasks, with Moebius weights."""
    out = []

    def rec(items, blocks):
        if not items:
            w = 1
            for b in blocks:
                size = bin(b).count("1")
                w *= (-1) ** (size - 1) * math.factorial(size - 1)
            out.append((tuple(blocks), w))
            return
        first, rest = items[0], items[1:]
        for r in range(len(rest) + 1):
            for comb in combinations(rest, r):
                mask = 1 << first
                for c in comb:
                    mask |= 1 << c
                rec([x for x in rest if x not in comb], blocks + [mask])

    rec(list(range(d)), [])
    return tuple(out)


def _distinct_sum(cols: np.ndarray, at: np.ndarray) -> np.ndarray:
    """``sum_{k_1..k_d distinct, k_i <= n} prod_i cols[k_i, i]`` for each ``n`` in ``at``.

    ``cols`` has shape (paths, n_max, d).  Moebius inversion over set
    partitions reduces the distinct-index sum to products of power sums
    ``P_T(n) = sum_{k <= n} prod_{i in T} cols[k, i]``.
    """
    P, n, d = cols.shape
    power = {}
    for mask in range(1, 1 << d):
        prod = np.ones((P, n))
        for i in range(d):
            if mask >> i & 1:
                prod = prod * cols[:, :, i]
        power[mask] = np.cumsum(prod, axis=1)[:, at]
    out = np.zeros((P, at.size))
    for blocks, w in _set_partitions(d):
        term = np.full((P, at.size), float(w))
        for b in blocks:
            term = term * power[b]
        out += term
    return out


# -- simulation ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PathSet:
    """Paths stored at checkpoints (``S_n``, running ``max_{l<=n} |S_l|``) plus the limit ``S_K``."""

    spec: MartingaleSpec
    seed: SeedSpec
    checkpoints: np.ndarray
    values: np.ndarray
    running_max: np.ndarray
    limit: np.ndarray
    tail_variance: float
    partial: bool = False

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def save(self, path) -> None:
        """Binary little-endian float64 block plus a JSON manifest beside it."""
        path = Path(path)
        block = np.concatenate([self.values.ravel(), self.running_max.ravel(), self.limit])
        with open(path, "wb") as fh:
            fh.write(np.array([block.size], dtype="<u8").tobytes())
            fh.write(block.astype("<f8").tobytes())
        manifest = {"spec": self.spec.to_dict(), "seed": self.seed.to_dict(),
                    "checkpoints": self.checkpoints.tolist(), "n_paths": self.n_paths,
                    "tail_variance": self.tail_variance, "partial": self.partial}
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(manifest, indent=2))

    @classmethod
    def load(cls, path) -> "PathSet":
        path = Path(path)
        man = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        raw = path.read_bytes()
        block = np.frombuffer(raw[8:], dtype="<f8")
        P, C = man["n_paths"], len(man["checkpoints"])
        vals = block[: P * C].reshape(P, C)
        rmax = block[P * C: 2 * P * C].reshape(P, C)
        lim = block[2 * P * C:]
        spec = MartingaleSpec(**{k: v for k, v in man["spec"].items()})
        return cls(spec, SeedSpec.coerce(man["seed"]), np.array(man["checkpoints"]), vals, rmax, lim,
                   man["tail_variance"], man["partial"])


def _signs(gen: np.random.Generator, shape) -> np.ndarray:
    return gen.integers(0, 2, size=shape, dtype=np.int8).astype(float) * 2.0 - 1.0


def _simulate_block(spec: MartingaleSpec, gen, P: int, at: np.ndarray):
    """Values at ``at`` (0-based step indices), running max there, and the limit."""
    K = spec.K
    a = spec.weights()  # length K - first_index + 1
    steps = a.size
    if spec.kind == "Simple":
        s = np.cumsum(_signs(gen, (P, steps)) * a, axis=1)
    elif spec.kind == "DoubleProduct":
        e1 = _signs(gen, (P, steps))
        e2 = _signs(gen, (P, steps))
        A = np.cumsum(e1 * a, axis=1)
        Bs = np.cumsum(e2 * a, axis=1)
        D = np.cumsum(e1 * e2 * a * a, axis=1)
        s = A * Bs - D
    else:
        s = np.zeros((P, steps))
        all_idx = np.arange(steps)
        for d in range(1, spec.d_max + 1):
            cols = _signs(gen, (P, steps, d)) * a[None, :, None]
            s += float(d) ** (-d * spec.gamma) * _distinct_sum(cols, all_idx)
    rmax = np.maximum.accumulate(np.abs(s), axis=1)
    return s[:, at], rmax[:, at], s[:, -1]


def simulate(spec: MartingaleSpec, n_paths: int, seed, checkpoints=None,
             block_paths: int = 500, max_cells: float = 5e9) -> PathSet:
    """Independent paths, generated ``block_paths`` at a time from counter blocks.

    ``checkpoints`` default to every ``n`` in ``[first_index, n_max]``.  The
    limit is the truncation ``S_K``; its discarded variance is recorded.  If
    ``n_paths * K * work`` exceeds ``max_cells`` the run stops at the last
    full block and is flagged partial (or raises when no block fits).
    """
    seed = SeedSpec.coerce(seed)
    if n_paths < 1:
        raise ValidationError("n_paths must be >= 1")
    f = spec.first_index
    cps = np.arange(f, spec.n_max + 1) if checkpoints is None else np.asarray(checkpoints, dtype=np.int64)
    if np.any(cps < f) or np.any(cps > spec.n_max) or np.any(np.diff(cps) <= 0):
        raise ValidationError(f"checkpoints must increase within [{f}, {spec.n_max}]")
    at = cps - f
    work = {"Simple": 1, "DoubleProduct": 3, "YSeries": sum(2**d for d in range(1, spec.d_max + 1))}[spec.kind]
    per_path = spec.K * work
    affordable = int(max_cells // per_path)
    if affordable < min(block_paths, n_paths):
        raise BudgetExceeded(f"one block of {block_paths} paths needs {block_paths * per_path:.3g} cells")
    partial = affordable < n_paths
    n_run = min(n_paths, affordable // block_paths * block_paths) if partial else n_paths
    vals, rmax, lim = [], [], []
    for b, start in enumerate(range(0, n_run, block_paths)):
        P = min(block_paths, n_run - start)
        v, r, l = _simulate_block(spec, block_generator(seed, b), P, at)
        vals.append(v)
        rmax.append(r)
        lim.append(l)
    return PathSet(spec, seed, cps, np.vstack(vals), np.vstack(rmax), np.concatenate(lim),
                   spec.tail_variance(), partial)


# -- the R-function ------------------------------------------------------

def _r_log_objective(delta: float, p: float, psi: PsiSpec, scale: float):
    ld, lk = math.log(delta), math.log(scale)

    def f(beta):
        beta = np.asarray(beta, float)
        alpha = beta / (beta - 1.0)
        w = p * beta / (p * beta + 2.0)
        return 2.0 / (p * beta + 2.0) * ld + w * (psi.log_psi(alpha * p) + lk)

    return f


@dataclass(frozen=True)
class RValue:
    value: float
    beta: float


def _r_min(delta: float, p: float, psi: PsiSpec, scale: float = 1.0) -> RValue:
    f = _r_log_objective(delta, p, psi, scale)
    betas = 1.0 + np.geomspace(DEFAULT.beta_lo - 1.0, DEFAULT.beta_hi - 1.0, DEFAULT.beta_points)
    vals = f(betas)
    i = int(np.argmin(vals))
    best_b, best_v = float(betas[i]), float(vals[i])
    if 0 < i < betas.size - 1:
        # refine in log(beta - 1), where the scan grid is uniform
        g = lambda s: float(f(1.0 + math.exp(s)))
        s = np.log(betas - 1.0)
        res = minimize_scalar(g, bracket=(s[i - 1], s[i], s[i + 1]), method="golden", tol=DEFAULT.golden_xtol)
        if res.fun < best_v:
            best_b, best_v = 1.0 + math.exp(res.x), float(res.fun)
    return RValue(math.exp(best_v), best_b)


def r_function(delta: float, p: float, psi: PsiSpec, scale: float = 1.0) -> RValue:
    """``inf_beta delta**(2/(p beta+2)) (scale psi(alpha p))**(p beta/(p beta+2))``, ``1/alpha + 1/beta = 1``.

    Scanned on a log grid of ``beta - 1`` and refined by golden section.
    """
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    if p < 2:
        raise DomainError("p must be >= 2")
    return _r_min(delta, p, psi, scale)


def r_function_brute(delta: float, p: float, psi: PsiSpec, points: int = 10**6, scale: float = 1.0) -> RValue:
    """Dense-scan reference for :func:`r_function`."""
    f = _r_log_objective(delta, p, psi, scale)
    betas = 1.0 + np.geomspace(DEFAULT.beta_lo - 1.0, DEFAULT.beta_hi - 1.0, points)
    vals = f(betas)
    i = int(np.argmin(vals))
    return RValue(math.exp(float(vals[i])), float(betas[i]))


def corollary1_bound(delta: float, p: float, psi: PsiSpec, scale: float = 1.0) -> float:
    """The ``beta = 2`` value ``delta**(1/(p+1)) (scale psi(2p))**(p/(p+1))``."""
    if delta < 0 or p < 2:
        raise DomainError("need delta >= 0 and p >= 2")
    if delta == 0:
        return 0.0
    return math.exp((math.log(delta) + p * (math.log(scale) + float(psi.log_psi(2.0 * p)))) / (p + 1.0))


def theorem9_bound(gamma_n: float, psi: PsiSpec, nu: PsiSpec, K: float, p_grid, maximal: bool = False) -> float:
    """``5 sqrt 2 max_p R(gamma_n, p, K psi) / nu(p)`` (``10 sqrt 2`` for the running maximum).

    ``gamma_n >= 1`` is accepted: the objective stays well defined and
    increasing in ``gamma_n``.
    """
    if gamma_n < 0 or not K > 0:
        raise DomainError("need gamma_n >= 0 and K > 0")
    if gamma_n == 0:
        return 0.0
    p = np.asarray(p_grid, float)
    r = np.array([_r_min(gamma_n, q, psi, K).value for q in p])
    factor = (10.0 if maximal else 5.0) * math.sqrt(2.0)
    return float(factor * np.max(r / nu(p)))


# -- Delta_2 / nabla_2 ---------------------------------------------------

@dataclass
class DeltaClassReport:
    delta2: bool | None
    delta2_witness: tuple | None
    nabla2: bool | None
    nabla2_witness: tuple | None
    delta2_slope: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def delta2_nabla2_check(N: NFunctionSpec, u_grid, l_grid=(1.5, 2.0, 3.0, 4.0, 8.0)) -> DeltaClassReport:
    """Witness search for ``N(2u) <= beta N(u)`` and ``N(u) <= N(l u) / (2 l)`` for ``u >= u0``.

    Both are judged on the upper half of ``u_grid``.  Delta_2 fails when
    ``log N(2u) - log N(u)`` grows with ``u``; the grid must span at least
    a factor 16 with 8 points, else the verdicts are undecided (None).
    """
    u = np.asarray(u_grid, float)
    if u.ndim != 1 or np.any(np.diff(u) <= 0) or u[0] <= 0:
        raise ValidationError("u_grid must be positive and increasing")
    if u.size < 8 or u[-1] / u[0] < 16:
        return DeltaClassReport(None, None, None, None, float("nan"))
    ln = N.log_value
    lu = ln(u)
    lr = ln(2 * u) - lu
    h = u.size // 2
    t = trend.classify_log(u, lr, DEFAULT.trend_slope_tol)
    if t.verdict == trend.INCONCLUSIVE:
        d2, d2w = None, None
    elif t.verdict == trend.GROWING:
        d2, d2w = False, None
    else:
        d2, d2w = True, (float(u[h]), float(np.exp(lr[h:].max())))
    n2, n2w = False, None
    for l in l_grid:
        ok = ln(l * u) - math.log(2 * l) - lu >= -1e-12
        if ok[h:].all():
            # smallest u0 from which the inequality holds on the rest of the grid
            bad = np.nonzero(~ok)[0]
            i0 = int(bad[-1]) + 1 if bad.size else 0
            n2, n2w = True, (float(u[i0]), float(l))
            break
    return DeltaClassReport(d2, d2w, n2, n2w, t.slope)


# -- convergence diagnostics ------------------------------------------------

@dataclass
class ConvergenceReport:
    checkpoints: list
    gamma_n: list
    empirical_norm: list
    bound: list
    K: float
    doob_ok: list
    order: str
    verdict: str
    final_over_initial: float
    wide_error: bool
    p_grid: list

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def csv_rows(self):
        yield "checkpoint,gamma_n,empirical_norm,bound"
        for row in zip(self.checkpoints, self.gamma_n, self.empirical_norm, self.bound):
            yield ",".join(f"{v:.17g}" for v in row)


def convergence_diagnostic(paths: PathSet, psi: PsiSpec, nu: PsiSpec, checkpoints=None, p_grid=None,
                           decay: float = 0.1, floor: float = 0.3) -> ConvergenceReport:
    """Per checkpoint: ``gamma_n``, the empirical ``|S_n - S|`` in G(nu), and the bound.

    ``gamma_n**2`` is the cross-path mean of ``(S_n - S_K)**2`` plus the
    exactly known variance beyond the truncation.  ``K`` is the largest
    empirical G(psi) norm of ``S_n`` over the checkpoints.
    """
    cps = paths.checkpoints if checkpoints is None else np.asarray(checkpoints)
    idx = np.searchsorted(paths.checkpoints, cps)
    if np.any(idx >= paths.checkpoints.size) or np.any(paths.checkpoints[np.minimum(idx, paths.checkpoints.size - 1)] != cps):
        raise ValidationError("requested checkpoints were not stored")
    p = np.geomspace(2.0, reliability_cap(paths.n_paths), 32) if p_grid is None else np.asarray(p_grid, float)
    gam, emp, doob = [], [], []
    K = 0.0
    for j in idx:
        sn = paths.values[:, j]
        res = sn - paths.limit
        gam.append(math.sqrt(float(np.mean(res * res)) + paths.tail_variance))
        emp.append(gpsi_norm(moment_curve(res, p), nu).gpsi_norm)
        norm_sn = gpsi_norm(moment_curve(sn, p), psi).gpsi_norm
        K = max(K, norm_sn)
        mx = gpsi_norm(moment_curve(paths.running_max[:, j], p), psi).gpsi_norm
        doob.append(bool(mx <= 2.0 * norm_sn * (1.0 + 3.0 / math.sqrt(paths.n_paths))))
    bound = [theorem9_bound(g, psi, nu, K, p) for g in gam]
    ratio = emp[-1] / emp[0] if emp[0] > 0 else 0.0
    verdict = "converges" if ratio < decay else ("plateau" if ratio >= floor else "indeterminate")
    order = essential_order(psi, nu).verdict
    return ConvergenceReport([int(c) for c in cps], gam, emp, bound, K, doob, order, verdict,
                             ratio, paths.n_paths < 1000, p.tolist())
