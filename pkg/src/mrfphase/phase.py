"""Explicit activity bounds around the uniqueness transition and numerical bracketing."""

from __future__ import annotations

import math
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fixedpoint import NONUNIQUE, UNDETERMINED, UNIQUE, classify_uniqueness, solve_diagonal
from .model import ModelSpec, ThetaVector, is_log_convex

GRID_POINTS = 64


def psi(theta: ThetaVector):
    """max over k <= D-2 of (D-k-1) theta_{k+1}/theta_k."""
    D = theta.delta
    return max((D - k - 1) * theta[k + 1] / theta[k] for k in range(D - 1))


def lambda_lower(theta: ThetaVector) -> float:
    """Activity below which the bounding sequences contract."""
    D = theta.delta
    top = theta.top_ratio
    bottom = theta.bottom_ratio
    inner = top + (D - 1) * (top - bottom)
    return 1 / (2 * psi(theta) / theta[0] * top ** (D - 2) * inner)


def lambda_upper(theta: ThetaVector) -> float:
    """Activity above which non-uniqueness is guaranteed."""
    D = theta.delta
    inv_bottom = float(theta[0] / theta[1])
    return float(3 * theta[0] / D) * inv_bottom**D * math.exp(3 * float(theta.top_ratio) * inv_bottom)


def hardcore_critical_activity(delta: int) -> float:
    """(D-1)^{D-1} (D-2)^{-D}, computed in log space."""
    return math.exp((delta - 1) * math.log(delta - 1) - delta * math.log(delta - 2))


@dataclass
class PhaseBracket:
    lambda_lower_bound: float
    lambda_upper_bound: float
    last_unique: Optional[float]
    first_nonunique: Optional[float]
    sign_changes: list = field(default_factory=list)
    partial: bool = False
    grid: list = field(default_factory=list)

    @property
    def width(self) -> float:
        if self.last_unique is None or self.first_nonunique is None:
            return math.inf
        return self.first_nonunique - self.last_unique

    def to_dict(self) -> dict:
        return {
            "lambda_lower_bound": self.lambda_lower_bound,
            "lambda_upper_bound": self.lambda_upper_bound,
            "last_unique": self.last_unique,
            "first_nonunique": self.first_nonunique,
            "sign_changes": [dict(c) for c in self.sign_changes],
            "partial": self.partial,
        }


def _verdict(theta: ThetaVector, lam: float) -> str:
    return classify_uniqueness(ModelSpec(theta, lam)).verdict


def critical_bracket(
    theta: ThetaVector,
    tol: float = 1e-6,
    grid_points: int = GRID_POINTS,
    executor: Optional[Executor] = None,
) -> PhaseBracket:
    """Scan a geometric grid on [lam_lower, lam_upper] and bisect each verdict change."""
    if not is_log_convex(theta):
        raise ValueError("critical_bracket needs a log-convex theta")
    th = theta.as_float() if theta.is_exact else theta
    lo, hi = float(lambda_lower(th)), float(lambda_upper(th))
    grid = np.geomspace(lo, hi, grid_points)
    if executor is not None:
        verdicts = list(executor.map(_verdict, [th] * len(grid), grid))
    else:
        verdicts = [_verdict(th, lam) for lam in grid]
    partial = UNDETERMINED in verdicts

    changes = []
    for i in range(len(grid) - 1):
        a, b = verdicts[i], verdicts[i + 1]
        if a == b or UNDETERMINED in (a, b):
            continue
        left, right = float(grid[i]), float(grid[i + 1])
        while right - left > tol:
            mid = 0.5 * (left + right)
            v = _verdict(th, mid)
            if v == UNDETERMINED:
                partial = True
                break
            if v == a:
                left = mid
            else:
                right = mid
        changes.append({"from": a, "to": b, "left": left, "right": right})

    up = [c for c in changes if c["from"] == UNIQUE and c["to"] == NONUNIQUE]
    if up:
        last_unique, first_nonunique = up[-1]["left"], up[-1]["right"]
    else:
        uniq = [float(l) for l, v in zip(grid, verdicts) if v == UNIQUE]
        non = [float(l) for l, v in zip(grid, verdicts) if v == NONUNIQUE]
        last_unique = max(uniq) if uniq else None
        first_nonunique = min(non) if non else None
    return PhaseBracket(
        lo, hi, last_unique, first_nonunique, changes, partial,
        grid=[(float(l), v) for l, v in zip(grid, verdicts)],
    )


def robustness_check(theta: ThetaVector, c_param: float) -> bool:
    """Constant-factor bounds for theta close to flat."""
    D = theta.delta
    if not 0 <= c_param <= D:
        raise ValueError("c_param must lie in [0, delta]")
    spread = max(float(theta.top_ratio), float(theta[0] / theta[1]))
    if spread > 1 + c_param / D + 1e-12:
        raise ValueError(f"premise fails: ratio spread {spread!r} exceeds 1 + c/delta")
    t0 = float(theta[0])
    low_ok = lambda_lower(theta) >= t0 / (D * 2 * math.exp(c_param) * (1 + 5 * c_param))
    high_ok = lambda_upper(theta) <= 3 * math.exp(12 + c_param) * t0 / D
    return bool(low_ok and high_ok)


def verify1_check(theta: ThetaVector) -> bool:
    """At lam = lam_upper the diagonal root satisfies x* >= (3/D) theta_0/theta_1."""
    if not is_log_convex(theta):
        raise ValueError("verify1_check needs a log-convex theta")
    x = solve_diagonal(ModelSpec(theta, lambda_upper(theta)))
    return x >= 3 / theta.delta * float(theta[0] / theta[1]) - 1e-9
