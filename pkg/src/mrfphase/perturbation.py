"""First-order analysis of uniqueness at the hardcore critical point along theta = 1 + c h."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fixedpoint import UNIQUE, classify_uniqueness, solve_diagonal
from .model import ModelSpec, ThetaVector, binom, g_prime, is_convex, p_prime
from .phase import hardcore_critical_activity

DEAD_ZONE = 1e-12
RICHARDSON_STEPS = (1e-4, 5e-5, 2.5e-5)
UNIQUENESS = "Uniqueness"
NONUNIQUENESS = "NonUniqueness"
BOUNDARY = "Boundary"


@dataclass
class PerturbationReport:
    delta: int
    c: tuple
    convex: bool
    pi: tuple
    dot: float
    classification: str

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "c": list(self.c),
            "convex": self.convex,
            "pi": list(self.pi),
            "dot": self.dot,
            "classification": self.classification,
        }


@dataclass
class SlopeReport:
    x_c_formula: float = float("nan")
    x_c_numeric: float = float("nan")
    gap_slope_formula: float = float("nan")
    gap_slope_numeric: float = float("nan")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def lambda_capital(delta: int, j: int) -> float:
    if not 0 <= j <= delta:
        raise ValueError(f"j={j} outside 0..{delta}")
    return binom(delta, j) / (delta - 2) ** j


def pi_vector(delta: int) -> np.ndarray:
    if delta < 3:
        raise ValueError("delta must be at least 3")
    return np.array(
        [
            lambda_capital(delta, j) * ((delta - 2) + (6 - 5 * delta) * j + 2 * (delta - 1) * j * j)
            for j in range(delta + 1)
        ]
    )


def _check_direction(delta: int, c: Sequence) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.shape != (delta + 1,):
        raise ValueError(f"direction must have {delta + 1} entries")
    return c


def classify_direction(delta: int, c: Sequence) -> PerturbationReport:
    c = _check_direction(delta, c)
    pi = pi_vector(delta)
    dot = float(pi @ c)
    if dot < -DEAD_ZONE:
        cls = UNIQUENESS
    elif dot > DEAD_ZONE:
        cls = NONUNIQUENESS
    else:
        cls = BOUNDARY
    return PerturbationReport(delta, tuple(c), is_convex(c), tuple(pi), dot, cls)


def goodxis_identities(delta: int) -> dict:
    """Each identity as (computed, closed form)."""
    D = delta
    lam = np.array([lambda_capital(D, j) for j in range(D + 1)])
    pi = pi_vector(D)
    j = np.arange(D + 1)
    r = (D - 1) / (D - 2)
    x_star = solve_diagonal(ModelSpec(ThetaVector.ones(D), hardcore_critical_activity(D)))
    return {
        "x_star": (x_star, 1 / (D - 2)),
        "sum_lambda": (lam.sum(), r**D),
        "sum_i_lambda": ((j * lam).sum(), D * (D - 1) ** (D - 1) / (D - 2) ** D),
        "sum_i2_lambda": ((j * j * lam).sum(), 2 * D * (D - 1) ** (D - 1) / (D - 2) ** D),
        "sum_pi": (pi.sum(), -(r ** (D - 1))),
        "sum_i_pi": ((j * pi).sum(), D * r ** (D - 1)),
    }


def goodxis_check(delta: int, rtol: float = 1e-10) -> bool:
    return all(
        abs(a - b) <= rtol * max(1.0, abs(b)) for a, b in goodxis_identities(delta).values()
    )


def sign_pattern_holds(delta: int) -> bool:
    pi = pi_vector(delta)
    return bool(pi[0] > 0 and pi[1] < 0 and pi[2] < 0 and np.all(pi[3:] > 0))


def z_coefficient(delta: int, c: Sequence, shift: int) -> float:
    """sum_{i<D} C(D-1,i) x1^i c_{i+shift}, x1 = 1/(D-2)."""
    c = _check_direction(delta, c)
    x1 = 1 / (delta - 2)
    return float(sum(binom(delta - 1, i) * x1**i * c[i + shift] for i in range(delta)))


def w_coefficient(delta: int, c: Sequence, shift: int) -> float:
    """sum_{i<D} C(D-1,i) i x1^{i-1} c_{i+shift}."""
    c = _check_direction(delta, c)
    x1 = 1 / (delta - 2)
    return float(sum(binom(delta - 1, i) * i * x1 ** (i - 1) * c[i + shift] for i in range(1, delta)))


def x_c_formula(delta: int, c: Sequence) -> float:
    D = delta
    pref = 0.5 * (D - 2) ** (D - 2) / (D - 1) ** (D - 1)
    return pref * ((D - 1) * z_coefficient(D, c, 1) - D * z_coefficient(D, c, 0))


def gap_slope_formula(delta: int, c: Sequence) -> float:
    D = delta
    return -0.5 * ((D - 2) / (D - 1)) ** D * float(pi_vector(D) @ _check_direction(D, c))


def _perturbed(delta: int, c: np.ndarray, h: float) -> ModelSpec:
    return ModelSpec(ThetaVector(delta, tuple(1.0 + c * h)), hardcore_critical_activity(delta))


def _richardson(fn, steps=RICHARDSON_STEPS) -> float:
    """Two-level Richardson extrapolation of the one-sided difference quotient (fn(h) - fn(0))/h."""
    base = fn(0.0)
    d = [(fn(h) - base) / h for h in steps]
    r1 = [2 * d[1] - d[0], 2 * d[2] - d[1]]
    return (4 * r1[1] - r1[0]) / 3


def _criterion_gap(delta: int, c: np.ndarray, h: float) -> float:
    model = _perturbed(delta, c, h)
    x = solve_diagonal(model)
    th = model.theta
    return float(p_prime(th, x) + model.lam * g_prime(th, x))


def x_c_slope(delta: int, c: Sequence) -> SlopeReport:
    c = _check_direction(delta, c)
    numeric = _richardson(lambda h: solve_diagonal(_perturbed(delta, c, h)))
    return SlopeReport(x_c_formula=x_c_formula(delta, c), x_c_numeric=numeric)


def criterion_gap_slope(delta: int, c: Sequence) -> SlopeReport:
    c = _check_direction(delta, c)
    numeric = _richardson(lambda h: _criterion_gap(delta, c, h))
    return SlopeReport(gap_slope_formula=gap_slope_formula(delta, c), gap_slope_numeric=numeric)


def slope_report(delta: int, c: Sequence) -> SlopeReport:
    a, b = x_c_slope(delta, c), criterion_gap_slope(delta, c)
    return SlopeReport(a.x_c_formula, a.x_c_numeric, b.gap_slope_formula, b.gap_slope_numeric)


def e0_direction(delta: int) -> np.ndarray:
    e = np.zeros(delta + 1)
    e[0] = 1.0
    return e


def nonmonotonicity_scan(delta: int, h_grid: Sequence[float]) -> list:
    """Verdicts at (lam_D, 1 + e0 h) for each h."""
    e0 = e0_direction(delta)
    out = []
    for h in h_grid:
        if h < 0:
            raise ValueError("h values must be nonnegative")
        out.append((float(h), classify_uniqueness(_perturbed(delta, e0, float(h))).verdict))
    return out


def doubling_search(delta: int, start: float, limit: float, want: str = UNIQUE) -> list:
    """Double h from ``start`` until the e0 verdict equals ``want`` or h exceeds ``limit``."""
    out = []
    h = start
    while h <= limit:
        row = nonmonotonicity_scan(delta, [h])[0]
        out.append(row)
        if row[1] == want:
            break
        h *= 2
    return out


def random_convex_direction(delta: int, rng: np.random.Generator, min_curvature: float = 0.0) -> np.ndarray:
    """Convex c with sup norm 1: random start, slope and nonnegative second differences."""
    c = np.empty(delta + 1)
    c[0] = rng.uniform(-1, 1)
    slope = rng.uniform(-1, 1)
    for i in range(1, delta + 1):
        c[i] = c[i - 1] + slope
        slope += min_curvature + rng.uniform(0, 1)
    c -= rng.uniform(c.min(), c.max())
    return c / np.max(np.abs(c))
