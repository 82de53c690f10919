"""Config-driven experiment runner.

    orlicz <experiment> --config CONFIG.json [--seed N] [--out DIR]
    orlicz suite --manifest MANIFEST.json [--out DIR]

Command-line flags override values in the config file; the config file
overrides the built-in defaults of each experiment.  Without ``--out`` the
output root is ``$ORLICZ_OUT`` or ``./orlicz-out``.

Exit codes: 0 pass, 2 invalid config, 3 acceptance bound missed, 4 budget.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import convex, generators, martingales, norms, operators
from .errors import BudgetExceeded, OrliczError, ValidationError
from .psi import MR, PsiSpec

EXIT_OK, EXIT_VALIDATION, EXIT_ACCEPTANCE, EXIT_BUDGET = 0, 2, 3, 4


@dataclass
class Outcome:
    results: dict
    metric: str
    value: float
    bound: str
    passed: bool
    rows: list
    columns: list


# -- experiments ------------------------------------------------------------
# each takes (params, seed) and returns an Outcome; params are already merged
# with the defaults below

def _conjugate(P, seed):
    w = convex.ClosedFormW(P["w"]["kind"], float(P["w"]["m"]), float(P["w"].get("c", 1.0)))
    z = np.linspace(P["z_lo"], P["z_hi"], int(P["points"]))
    f = w.tabulate(z)
    p = np.linspace(P["p_lo"], P["p_hi"], int(P["points"]))
    conj = convex.fenchel_conjugate(f, p)
    res = convex.biconjugate_residual(f)
    rows = list(zip(p.tolist(), conj.values.tolist(), conj.maximizer.tolist()))
    return Outcome({"biconjugate_residual": res, "grid_points": int(P["points"])},
                   "biconjugate_residual", res, f"<= {P['max_residual']}", res <= P["max_residual"],
                   rows, ["p", "conjugate", "maximizer"])


def _norm(P, seed):
    n = int(P["n"])
    psi = PsiSpec.from_dict(P["psi"])
    N = convex.n_from_w(convex.ClosedFormW("exp", float(P["psi"]["m"])))
    p = np.geomspace(2.0, norms.reliability_cap(n), int(P["p_points"]))
    rows, ratios = [], {}
    for i, (name, desc) in enumerate(sorted(P["generators"].items())):
        s = generators.sample_from_dict(desc, n, seed.substream(i))
        g = norms.gpsi_norm(norms.moment_curve(s, p), psi)
        lux = norms.luxemburg_norm(s, N)
        ratios[name] = lux / g.gpsi_norm
        rows.append((name, g.gpsi_norm, g.argmax_p, lux, ratios[name]))
    v = np.array(list(ratios.values()))
    spread = float(v.max() / v.min()) if v.size else 1.0
    return Outcome({"ratios": ratios, "spread": spread, "n": n}, "ratio_spread", spread,
                   f"<= {P['max_spread']}", spread <= P["max_spread"],
                   rows, ["generator", "gpsi_norm", "argmax_p", "luxemburg_norm", "ratio"])


def _tailfit(P, seed):
    s = generators.sample_from_dict(P["generator"], int(P["n"]), seed)
    fit = norms.tail_exponent_fit(s, P["model"])
    target = float(P["expected_slope"])
    err = abs(fit.slope - target) / target
    u, ph = norms.tail_points(s.values, fit.q_lo, fit.q_hi, norms.DEFAULT.tail_points)
    return Outcome({"fit": fit.to_dict(), "expected_slope": target, "relative_error": err},
                   "slope", fit.slope, f"{target} +- {P['rel_tol']:.0%}", err <= P["rel_tol"],
                   list(zip(u.tolist(), ph.tolist())), ["u", "exceedance"])


def _rademacher(P, seed):
    spec = generators.RademacherSeriesSpec(float(P["B"]), P["L"], int(P["K"]))
    target = generators.rademacher_tail_exponent(spec).exponent
    s = generators.sample_rademacher_series(spec, int(P["n"]), seed)
    fit = norms.tail_exponent_fit(s)
    err = abs(fit.slope - target) / target
    u, ph = norms.tail_points(s.values, fit.q_lo, fit.q_hi, norms.DEFAULT.tail_points)
    return Outcome({"fit": fit.to_dict(), "fitted_exponent": fit.slope, "theoretical_exponent": target,
                    "relative_error": err, "tail_variance": spec.tail_variance()},
                   "fitted_exponent", fit.slope, f"{target:g} +- {P['rel_tol']:.0%}", err <= P["rel_tol"],
                   list(zip(u.tolist(), ph.tolist())), ["u", "exceedance"])


def _product(P, seed):
    m = float(P["m"])
    s = generators.sample_product(generators.WeibullSymSpec(m), generators.WeibullSymSpec(m), int(P["n"]), seed)
    fit = norms.tail_exponent_fit(s)
    target = m / 2.0
    err = abs(fit.slope - target) / target
    u, ph = norms.tail_points(s.values, fit.q_lo, fit.q_hi, norms.DEFAULT.tail_points)
    return Outcome({"fit": fit.to_dict(), "expected_slope": target, "relative_error": err},
                   "slope", fit.slope, f"{target:g} +- {P['rel_tol']:.0%}", err <= P["rel_tol"],
                   list(zip(u.tolist(), ph.tolist())), ["u", "exceedance"])


def _hilbert(P, seed):
    rep = operators.lemma1_experiment(float(P["m"]), int(P["M"]))
    err = abs(rep.tail_slope - rep.predicted_slope)
    ok = err <= P["abs_tol"] and not rep.unresolved
    rows = [(rep.M, rep.tail_slope), (2 * rep.M, rep.tail_slope_refined)]
    return Outcome(rep.to_dict(), "tail_slope", rep.tail_slope,
                   f"{rep.predicted_slope:g} +- {P['abs_tol']}, stable under M -> 2M", ok,
                   rows, ["M", "tail_slope"])


def _fourier(P, seed):
    N_set = [int(N) for N in P["N_set"]]
    rep = operators.nonconvergence_experiment(float(P["m"]), int(P["M"]), N_set)
    ok = rep.floor_ratio >= P["min_floor"] and rep.l2_drop >= P["min_l2_drop"]
    return Outcome(rep.to_dict(), "floor_ratio", rep.floor_ratio,
                   f">= {P['min_floor']} with L2 drop >= {P['min_l2_drop']}", ok,
                   list(zip(rep.N, rep.gpsi, rep.l2)), ["N", "gpsi_residual", "l2_residual"])


def _martingale(P, seed):
    spec = martingales.MartingaleSpec(**P["spec"])
    cps = P.get("checkpoints")
    paths = martingales.simulate(spec, int(P["n_paths"]), seed, checkpoints=cps,
                                 max_cells=float(P["max_cells"]))
    psi, nu = PsiSpec.from_dict(P["psi"]), PsiSpec.from_dict(P["nu"])
    rep = martingales.convergence_diagnostic(paths, psi, nu)
    bound_ok = all(b >= e for b, e in zip(rep.bound, rep.empirical_norm))
    expect = P.get("expect", "bound")
    ok = bound_ok and (expect == "bound" or rep.verdict == expect)
    return Outcome({**rep.to_dict(), "partial": paths.partial, "expect": expect}, "final_over_initial",
                   rep.final_over_initial, f"bound holds; verdict {expect}", ok,
                   list(zip(rep.checkpoints, rep.gamma_n, rep.empirical_norm, rep.bound)),
                   ["checkpoint", "gamma_n", "empirical_norm", "bound"])


def _bound(P, seed):
    from .rng import block_generator
    g = block_generator(seed, 0)
    rows, worst, dominated = [], 0.0, True
    for _ in range(int(P["triples"])):
        delta = float(10 ** g.uniform(-8, -0.01))
        p = float(g.uniform(2, 64))
        psi = MR(float(g.uniform(0.5, 4)))
        r = martingales.r_function(delta, p, psi)
        b = martingales.r_function_brute(delta, p, psi, points=int(P["brute_points"]))
        c = martingales.corollary1_bound(delta, p, psi)
        worst = max(worst, abs(r.value / b.value - 1.0))
        dominated &= r.value <= c * (1 + 1e-12)
        rows.append((delta, p, psi.m, r.value, b.value, c, r.beta))
    ok = worst <= P["rel_tol"] and dominated
    return Outcome({"worst_relative_error": worst, "below_corollary": dominated}, "worst_relative_error",
                   worst, f"<= {P['rel_tol']}", ok, rows,
                   ["delta", "p", "psi_m", "r_function", "brute_force", "corollary1", "argmin_beta"])


_SUITE_GENERATORS = {
    "gaussian": {"kind": "gaussian"},
    "exponential": {"kind": "exponential"},
    **{f"weibull_{m}": {"kind": "weibull", "m": m} for m in (0.5, 1, 2, 4)},
    "uniform": {"kind": "uniform"},
    **{f"rademacher_{B}": {"kind": "rademacher", "B": B} for B in (0.6, 0.75, 0.9)},
    "product_2x2": {"kind": "product", "xi": {"kind": "weibull", "m": 2}, "eta": {"kind": "weibull", "m": 2}},
    "product_1x1": {"kind": "product", "xi": {"kind": "weibull", "m": 1}, "eta": {"kind": "weibull", "m": 1}},
}

EXPERIMENTS = {
    "conjugate": (_conjugate, {"w": {"kind": "power", "m": 2}, "z_lo": 2.0, "z_hi": 50.0, "p_lo": 4.0,
                               "p_hi": 96.0, "points": 100_000, "max_residual": 1e-6}),
    "norm": (_norm, {"n": 1_000_000, "psi": {"kind": "MR", "m": 0.5, "r": 0}, "p_points": 48,
                     "generators": _SUITE_GENERATORS, "max_spread": 20.0}),
    "tailfit": (_tailfit, {"generator": {"kind": "weibull", "m": 2}, "n": 10_000_000, "expected_slope": 2.0,
                           "model": "weibull", "rel_tol": 0.10}),
    "rademacher": (_rademacher, {"B": 0.75, "L": None, "K": 10_000, "n": 1_000_000, "rel_tol": 0.20}),
    "product": (_product, {"m": 2.0, "n": 10_000_000, "rel_tol": 0.15}),
    "hilbert": (_hilbert, {"m": 1.0, "M": 1 << 20, "abs_tol": 0.1}),
    "fourier": (_fourier, {"m": 1.0, "M": 1 << 20, "N_set": [2**k for k in range(2, 17)],
                           "min_floor": 0.5, "min_l2_drop": 10.0}),
    "martingale": (_martingale, {"spec": {"kind": "Simple", "B": 0.75, "n_max": 8192}, "n_paths": 10_000,
                                 "checkpoints": [2**k for k in range(1, 13)],
                                 "psi": {"kind": "MR", "m": 4}, "nu": {"kind": "MR", "m": 2},
                                 "expect": "converges", "max_cells": 5e9}),
    "bound": (_bound, {"triples": 20, "brute_points": 1_000_000, "rel_tol": 1e-6}),
}


# -- running ----------------------------------------------------------------

def _merge(defaults: dict, given: dict) -> dict:
    unknown = set(given) - set(defaults)
    if unknown:
        raise ValidationError(f"unknown parameters: {sorted(unknown)}")
    return {**defaults, **given}


def _validate(kind: str, P: dict) -> None:
    """Build the spec objects up front so bad parameters fail before any computation."""
    if kind == "rademacher":
        generators.RademacherSeriesSpec(float(P["B"]), P.get("L"), int(P["K"]))
    elif kind == "product":
        generators.WeibullSymSpec(float(P["m"]))
    elif kind == "martingale":
        martingales.MartingaleSpec(**P["spec"])
        PsiSpec.from_dict(P["psi"])
        PsiSpec.from_dict(P["nu"])
    elif kind in ("hilbert", "fourier"):
        M = int(P["M"])
        if M < 8 or M & (M - 1):
            raise ValidationError("M must be a power of two >= 8")
    elif kind == "norm":
        PsiSpec.from_dict(P["psi"])
        for d in P["generators"].values():
            if d.get("kind") in ("rademacher", "weibull"):
                generators.generator_from_dict(d)
    for key in ("n", "n_paths", "points"):
        if key in P and int(P[key]) < 1:
            raise ValidationError(f"{key} must be positive")


def _versions() -> dict:
    return {"orlicz": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def run(kind: str, config: dict, seed: int | None = None, out: Path | None = None, name: str | None = None) -> tuple[int, dict]:
    """Run one experiment; write ``<name>.json`` and ``<name>.csv`` under ``out``."""
    from .rng import SeedSpec

    name = name or kind
    out = Path(out) if out is not None else Path(os.environ.get("ORLICZ_OUT", "orlicz-out"))
    out.mkdir(parents=True, exist_ok=True)
    cfg = dict(config)
    if seed is not None:
        cfg["seed"] = seed
    report = {"name": name, "experiment": kind, "config": cfg, "versions": _versions()}
    try:
        if kind not in EXPERIMENTS:
            raise ValidationError(f"unknown experiment {kind!r}; choose from {sorted(EXPERIMENTS)}")
        fn, defaults = EXPERIMENTS[kind]
        params = _merge(defaults, cfg.get("params", {}))
        s = int(cfg.get("seed", 0))
        seed_spec = SeedSpec(s)
        _validate(kind, params)
        report["params"] = params
        oc = fn(params, seed_spec)
        report.update({"results": oc.results, "metric": oc.metric, "value": oc.value,
                       "bound": oc.bound, "passed": bool(oc.passed)})
        with open(out / f"{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(oc.columns)
            w.writerows(oc.rows)
        code = EXIT_OK if oc.passed else EXIT_ACCEPTANCE
    except BudgetExceeded as e:
        report["error"] = {"type": "budget", "message": str(e)}
        code = EXIT_BUDGET
    except (ValidationError, OrliczError, ValueError, KeyError, TypeError) as e:
        report["error"] = {"type": "validation", "message": f"{type(e).__name__}: {e}"}
        code = EXIT_VALIDATION
    report["exit_code"] = code
    report = _jsonable(report)
    (out / f"{name}.json").write_text(json.dumps(report, indent=2))
    return code, report


def suite(manifest: list, out: Path | None = None) -> tuple[int, list]:
    """Run every manifest entry ``{name, experiment, config}``; one summary row each."""
    out = Path(out) if out is not None else Path(os.environ.get("ORLICZ_OUT", "orlicz-out"))
    names = [e.get("name") for e in manifest]
    if any(n is None for n in names):
        raise ValidationError("every manifest entry needs a name")
    if len(set(names)) != len(names):
        raise ValidationError("duplicate experiment names in manifest")
    rows = []
    for e in manifest:
        code, rep = run(e["experiment"], e.get("config", {}), out=out, name=e["name"])
        rows.append({"name": e["name"], "experiment": e["experiment"], "metric": rep.get("metric", ""),
                     "value": rep.get("value", ""), "bound": rep.get("bound", ""),
                     "passed": rep.get("passed", False), "exit_code": code})
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, ["name", "experiment", "metric", "value", "bound", "passed", "exit_code"])
        w.writeheader()
        w.writerows(rows)
    codes = {r["exit_code"] for r in rows}
    for c in (EXIT_ACCEPTANCE, EXIT_BUDGET, EXIT_VALIDATION):
        if c in codes:
            return c, rows
    return EXIT_OK, rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="orlicz", description="Exponential Orlicz space experiments.")
    ap.add_argument("experiment", choices=sorted(EXPERIMENTS) + ["suite"])
    ap.add_argument("--config", type=Path, help="JSON config: {\"seed\": N, \"params\": {...}}")
    ap.add_argument("--manifest", type=Path, help="JSON list of {name, experiment, config} (suite only)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", type=Path)
    a = ap.parse_args(argv)
    try:
        if a.experiment == "suite":
            if a.manifest is None:
                raise ValidationError("suite needs --manifest")
            manifest = json.loads(a.manifest.read_text())
            if isinstance(manifest, dict):
                manifest = manifest.get("experiments", [])
            code, rows = suite(manifest, a.out)
            for r in rows:
                print(f"{r['name']:<24} {r['metric']:<22} {r['value']!s:<24} {'PASS' if r['passed'] else 'FAIL'}")
            return code
        config = json.loads(a.config.read_text()) if a.config else {}
    except (OSError, json.JSONDecodeError, ValidationError) as e:
        print(f"orlicz: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    code, rep = run(a.experiment, config, a.seed, a.out)
    if "error" in rep:
        print(f"orlicz: {rep['error']['message']}", file=sys.stderr)
    else:
        print(f"{rep['metric']} = {rep['value']}  ({rep['bound']})  {'PASS' if rep['passed'] else 'FAIL'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
