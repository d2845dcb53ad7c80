"""The acceptance suite as plain functions, shared by the verify command and the tests."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import perturbation
from .fixedpoint import NONUNIQUE, UNIQUE, classify_uniqueness, solve_diagonal
from .graphs import RegularGraph, gen_random_regular
from .mcmc import DEFAULT_BURN_IN, estimate_neighbor_law, fit_mu_shape, run_chain, state_law
from .model import (
    ModelSpec,
    ThetaVector,
    induced_mu,
    is_log_convex,
    is_reverse_ultra_log_concave,
    theta_for_family,
)
from .oracle import (
    BOUNDARY_LABELS,
    FiniteGraph,
    conditional_pk_exact,
    configuration_law,
    dp_partition_exact,
    enumerate_root_law,
    enumerate_subtree,
)
from .phase import critical_bracket, hardcore_critical_activity, lambda_lower, lambda_upper
from .recursion import contraction_check, parity_gap


@dataclass
class CheckResult:
    name: str
    passed: bool
    seconds: float = 0.0
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name} ({self.seconds:.1f}s)"

    def to_dict(self) -> dict:
        return {"check": self.name, "passed": self.passed, "seconds": round(self.seconds, 3), "detail": self.detail}


def random_log_convex_theta(delta: int, rng: np.random.Generator, spread: float = 10.0) -> ThetaVector:
    """theta_0 = 1 and nondecreasing ratios whose max/min is at most ``spread``."""
    base = math.exp(rng.uniform(math.log(0.1), math.log(10.0)))
    ratios = base * np.sort(np.exp(rng.uniform(0.0, math.log(spread), delta)))
    return ThetaVector(delta, tuple(np.concatenate([[1.0], np.cumprod(ratios)]).tolist()))


def random_non_log_convex_theta(delta: int, rng: np.random.Generator) -> ThetaVector:
    """Ratios with at least one clear descent."""
    while True:
        ratios = np.exp(rng.uniform(-2.0, 2.0, delta))
        if np.any(ratios[1:] < ratios[:-1] * 0.9):
            return ThetaVector(delta, tuple(np.concatenate([[1.0], np.cumprod(ratios)]).tolist()))


def random_rational_theta(delta: int, rng: np.random.Generator) -> ThetaVector:
    return ThetaVector(
        delta, tuple(Fraction(int(rng.integers(1, 13)), int(rng.integers(1, 13))) for _ in range(delta + 1))
    )


def check_hardcore_threshold() -> dict:
    rows = []
    for delta in (3, 4, 5, 6):
        target = hardcore_critical_activity(delta)
        br = critical_bracket(ThetaVector.ones(delta), tol=1e-6)
        ok = (
            br.last_unique is not None
            and br.first_nonunique is not None
            and br.last_unique <= target <= br.first_nonunique
            and br.width <= 1e-6
        )
        rows.append({"delta": delta, "target": target, "bracket": [br.last_unique, br.first_nonunique], "ok": ok})
    return {"passed": all(r["ok"] for r in rows), "rows": rows}


def check_sandwich(count: int = 100, seed: int = 2) -> dict:
    rng = np.random.default_rng(seed)
    failures = []
    for i in range(count):
        delta = 3 + i % 4
        theta = random_log_convex_theta(delta, rng)
        lo, hi = float(lambda_lower(theta)), float(lambda_upper(theta))
        below = classify_uniqueness(ModelSpec(theta, 0.99 * lo)).verdict
        above = classify_uniqueness(ModelSpec(theta, 1.01 * hi)).verdict
        if below != UNIQUE or above != NONUNIQUE:
            failures.append({"theta": list(theta.values), "below": below, "above": above})
    return {"passed": not failures, "count": count, "failures": failures}


def check_goodxis() -> dict:
    bad = [d for d in range(3, 13) if not perturbation.goodxis_check(d, rtol=1e-10)]
    return {"passed": not bad, "failing_deltas": bad}


def check_sign_pattern() -> dict:
    bad = [d for d in range(3, 21) if not perturbation.sign_pattern_holds(d)]
    return {"passed": not bad, "failing_deltas": bad}


def check_slopes(count: int = 30, seed: int = 5, rtol: float = 1e-3) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    failures = []
    for delta in (3, 4, 5):
        for _ in range(count):
            c = perturbation.random_convex_direction(delta, rng)
            rep = perturbation.slope_report(delta, c)
            for a, b in ((rep.x_c_numeric, rep.x_c_formula), (rep.gap_slope_numeric, rep.gap_slope_formula)):
                err = abs(a - b) / abs(b)
                worst = max(worst, err)
                if not err <= rtol:
                    failures.append({"delta": delta, "c": c.tolist(), "numeric": a, "formula": b})
    return {"passed": not failures, "worst_relative_error": worst, "failures": failures}


def check_e0_scan() -> dict:
    grid = [0.01 * k for k in range(1, 51)]
    scan = perturbation.nonmonotonicity_scan(3, grid)
    non = [h for h, v in scan if v == NONUNIQUE]
    if not non:
        return {"passed": False, "nonunique_h": None}
    doubling = perturbation.doubling_search(3, non[-1], 1e3, want=UNIQUE)
    unique_h = next((h for h, v in doubling if v == UNIQUE), None)
    return {"passed": unique_h is not None, "nonunique_h": non, "doubling": doubling, "unique_h": unique_h}


def check_oracle(count: int = 20, seed: int = 7) -> dict:
    rng = np.random.default_rng(seed)
    failures = []
    worst = 0.0
    for _ in range(count):
        theta = random_rational_theta(3, rng)
        lam = Fraction(int(rng.integers(1, 9)), int(rng.integers(1, 9)))
        model = ModelSpec(theta, lam)
        float_model = ModelSpec(theta.as_float(), float(lam))
        for d in (3, 4):
            for b in BOUNDARY_LABELS:
                if dp_partition_exact(model, d, b) != enumerate_subtree(model, d, b):
                    failures.append({"theta": [str(v) for v in theta.values], "lam": str(lam), "d": d, "boundary": b})
            for b in ("all_included", "all_excluded"):
                exact = enumerate_root_law(model, d, b)
                display = conditional_pk_exact(float_model, d, b)
                err = max(abs(float(x) - y) for x, y in zip(exact, display))
                worst = max(worst, err)
                if err > 1e-12:
                    failures.append({"theta": [str(v) for v in theta.values], "d": d, "boundary": b, "err": err})
    return {"passed": not failures, "worst_display_error": worst, "failures": failures}


def _bounding_thetas() -> list:
    out = [ThetaVector.ones(d) for d in (3, 4, 5, 6)]
    out += [theta_for_family(f, 3).as_float() for f in ("truncated_poisson", "truncated_geometric")]
    return out


def check_bounding() -> dict:
    rows = []
    for theta in _bounding_thetas():
        lo, hi = float(lambda_lower(theta)), float(lambda_upper(theta))
        for frac in (0.5, 0.9):
            lam = frac * lo
            holds, worst = contraction_check(ModelSpec(theta, lam), 200)
            ok = holds and worst <= lam / lo + 1e-9
            rows.append({"delta": theta.delta, "lam": lam, "kind": "contraction", "worst_ratio": worst, "ok": ok})
        lam = 1.01 * hi
        _, _, gap = parity_gap(ModelSpec(theta, lam))
        rows.append({"delta": theta.delta, "lam": lam, "kind": "parity_gap", "gap": gap, "ok": gap > 1e-3})
    return {"passed": all(r["ok"] for r in rows), "rows": rows}


def _mcmc_case(theta: ThetaVector, lam: float, sweeps: int, burn_in: int, seed: int, jobs: int) -> dict:
    graph = gen_random_regular(2000, theta.delta, seed=seed, min_girth=6)
    model = ModelSpec(theta, lam)
    est = estimate_neighbor_law(model, graph, sweeps, burn_in, chains=4, seed=seed, jobs=jobs)
    target = induced_mu(theta, 1, solve_diagonal(model))
    tv = est.mu.tv_distance(target)
    fit = fit_mu_shape(est.mu, theta)
    return {
        "lam": lam,
        "empirical": list(est.mu.probs),
        "target": list(target.probs),
        "tv": tv,
        "fit_residual": fit.residual,
        "ok": tv < 0.02 and fit.residual < 0.05,
    }


def check_mcmc(sweeps: int = 200_000, burn_in: int = DEFAULT_BURN_IN, seed: int = 11, jobs: int = 1) -> dict:
    cases = [
        _mcmc_case(ThetaVector.ones(3), 1.0, sweeps, burn_in, seed, jobs),
        _mcmc_case(theta_for_family("truncated_poisson", 3).as_float(), 0.1, sweeps, burn_in, seed, jobs),
    ]
    return {"passed": all(c["ok"] for c in cases), "cases": cases}


def check_small_graph(sweeps: int = 10**6, seed: int = 3) -> dict:
    model = ModelSpec(ThetaVector.ones(3), 1.0)
    k4 = FiniteGraph.complete(4)
    exact = configuration_law(model, k4)
    exact_ok = len(exact) == 5 and all(abs(v - 0.2) < 1e-12 for v in exact.values())
    _, hist, _ = run_chain(model, RegularGraph.from_finite(k4), sweeps, 0, seed, record_states=True)
    emp = state_law(hist, 4)
    tv = 0.5 * sum(abs(emp.get(k, 0.0) - exact.get(k, 0.0)) for k in set(emp) | set(exact))
    return {"passed": exact_ok and tv < 0.01, "tv": tv, "exact_law": {str(k): v for k, v in exact.items()}}


def check_asymptotic() -> dict:
    value = 100 * hardcore_critical_activity(100)
    rel = abs(value - math.e) / math.e
    return {"passed": rel <= 0.05, "value": value, "relative_error": rel}


def check_ultra(count: int = 200, seed: int = 13) -> dict:
    rng = np.random.default_rng(seed)
    mismatches = []
    for i in range(count):
        delta = int(rng.integers(3, 9))
        theta = random_log_convex_theta(delta, rng) if i % 2 == 0 else random_non_log_convex_theta(delta, rng)
        x = math.exp(rng.uniform(-2.0, 2.0))
        mu = induced_mu(theta, 1.0, x)
        if is_reverse_ultra_log_concave(mu) != is_log_convex(theta):
            mismatches.append({"theta": list(theta.values), "x": x})
    return {"passed": not mismatches, "count": count, "mismatches": mismatches}


CHECKS: dict[str, Callable[..., dict]] = {
    "hardcore_threshold": check_hardcore_threshold,
    "sandwich": check_sandwich,
    "goodxis": check_goodxis,
    "sign_pattern": check_sign_pattern,
    "slopes": check_slopes,
    "e0_scan": check_e0_scan,
    "oracle": check_oracle,
    "bounding": check_bounding,
    "mcmc": check_mcmc,
    "small_graph": check_small_graph,
    "asymptotic": check_asymptotic,
    "ultra": check_ultra,
}


def run_check(name: str, **kwargs) -> CheckResult:
    if name not in CHECKS:
        raise KeyError(f"unknown check {name!r}; expected one of {', '.join(CHECKS)}")
    t = time.perf_counter()
    try:
        out = CHECKS[name](**kwargs)
    except Exception as exc:  # a crash is a failure, not a usage error
        out = {"passed": False, "error": f"{type(exc).__name__}: {exc}"}
    passed = bool(out.pop("passed"))
    return CheckResult(name, passed, time.perf_counter() - t, out)
