"""Solving the two-equation fixed-point system and classifying uniqueness.

The system is x = lam g(y) f^{D-1}(x), y = lam g(x) f^{D-1}(y).  With
p(x) = x f(x)^{-(D-1)} it reads p(x) = lam g(y), p(y) = lam g(x).  When p is
increasing the system is the two-cycle problem of q = p^{-1}(lam g(.)).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .model import (
    ModelSpec,
    NeighborDistribution,
    ThetaVector,
    big_L,
    binom,
    f_scalar,
    g_prime,
    g_scalar,
    is_log_convex,
    p_prime,
    p_scalar,
)

log = logging.getLogger(__name__)

UNIQUE = "Unique"
NONUNIQUE = "NonUnique"
UNDETERMINED = "Undetermined"

MAX_Q_ITERATIONS = 10**6
MAX_BISECTION = 200
CAUCHY_TOL = 1e-12
CYCLE_SEPARATION = 1e-9
MONOTONE_GRID = 2048
SCAN_GRID = 4096
# relative size below which a residual is treated as rounding noise
NOISE = 1e-12
# relative tolerance on |q'(x*)| = 1 when deciding local stability
SLOPE_TOL = 1e-12


class IterationBudgetExceeded(RuntimeError):
    """Raised when an iteration does not settle within its budget."""


class ContractViolation(ValueError):
    """Raised when an operation is called outside its regime of validity."""


@dataclass
class FixedPointReport:
    verdict: str
    diagonal_x: float
    two_cycle: Optional[tuple]
    iterations: int
    residuals: tuple
    search_interval: tuple
    method: str = ""
    local_slope: float = float("nan")
    p_increasing: Optional[bool] = None
    diagonal_roots: list = field(default_factory=list)
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "diagonal_x": self.diagonal_x,
            "two_cycle": list(self.two_cycle) if self.two_cycle else None,
            "iterations": self.iterations,
            "residuals": list(self.residuals),
            "search_interval": list(self.search_interval),
            "method": self.method,
            "local_slope": self.local_slope,
            "p_increasing": self.p_increasing,
            "diagonal_roots": list(self.diagonal_roots),
            "reason": self.reason,
        }


@dataclass
class LimitProbabilities:
    """Root probabilities p_k (excluded, k included neighbours) and p_plus."""

    delta: int
    p: tuple
    p_plus: float
    zeta: float

    def conditional(self) -> NeighborDistribution:
        return NeighborDistribution.normalized(self.delta, self.p)

    def to_dict(self) -> dict:
        return {"p": list(self.p), "p_plus": self.p_plus, "zeta": self.zeta}


@dataclass
class CycleSearch:
    pair: Optional[tuple]
    iterations: int
    converged: bool


# ---------------------------------------------------------------------------
# p, its inverse and q


def p_func(theta: ThetaVector, x):
    return p_scalar(theta, x)


def _max_ratio(theta: ThetaVector) -> float:
    return float(max(theta.ratios()))


def p_is_increasing(theta: ThetaVector, lam: float) -> bool:
    """Central-difference slope test of p on a 2048 point grid."""
    upper = ModelSpec(theta, lam).search_upper()
    xs = np.linspace(0.0, upper, MONOTONE_GRID)
    ps = p_scalar(theta, xs)
    slopes = np.gradient(ps, xs)
    return bool(np.min(slopes) > 1e-10)


def _bisect(fn: Callable[[float], float], a: float, b: float, fa: Optional[float] = None) -> float:
    """Bisection for a sign change of fn on [a, b]."""
    if fa is None:
        fa = fn(a)
    neg_left = fa < 0
    for _ in range(MAX_BISECTION):
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        fm = fn(m)
        if fm == 0:
            return m
        if (fm < 0) == neg_left:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def p_inverse(theta: ThetaVector, y: float) -> float:
    """Preimage of y under p, assuming p increasing."""
    y = float(y)
    if not math.isfinite(y) or y < 0:
        raise ValueError(f"y={y!r} is outside the range of p")
    if y == 0:
        return 0.0
    th = theta.as_float() if theta.is_exact else theta
    hi = y * _max_ratio(th) ** (th.delta - 1)
    fn = lambda x: p_scalar(th, x) - y
    if fn(hi) < 0:
        raise ValueError(f"y={y!r} is outside the range of p on [0, {hi!r}]")
    return brentq(fn, 0.0, hi, xtol=1e-300, rtol=8.9e-16, maxiter=MAX_BISECTION)


def p_inverse_array(theta: ThetaVector, ys: np.ndarray) -> np.ndarray:
    """Vectorised bisection version of :func:`p_inverse`."""
    th = theta.as_float() if theta.is_exact else theta
    ys = np.asarray(ys, dtype=float)
    lo = np.zeros_like(ys)
    hi = ys * _max_ratio(th) ** (th.delta - 1)
    for _ in range(MAX_BISECTION):
        mid = 0.5 * (lo + hi)
        below = p_scalar(th, mid) < ys
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 4e-16 * hi):
            break
    return 0.5 * (lo + hi)


def g_inverse_array(theta: ThetaVector, ts: np.ndarray) -> np.ndarray:
    """Solve g(y) = t for y >= 0; NaN where t > 1/theta_0 or t <= 0."""
    th = theta.as_float() if theta.is_exact else theta
    ts = np.asarray(ts, dtype=float)
    ok = (ts > 0) & (ts <= 1.0 / th[0])
    target = np.where(ok, 1.0 / np.where(ok, ts, 1.0), 1.0)
    lo = np.zeros_like(ts)
    hi = np.maximum((target / th[th.delta - 1]) ** (1.0 / (th.delta - 1)), 1e-300)
    for _ in range(MAX_BISECTION):
        mid = 0.5 * (lo + hi)
        below = 1.0 / g_scalar(th, mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 4e-16 * hi):
            break
    return np.where(ok, 0.5 * (lo + hi), np.nan)


def q_func(model: ModelSpec, x: float) -> float:
    """q(x) = p^{-1}(lam g(x))."""
    th = model.theta.as_float() if model.theta.is_exact else model.theta
    return p_inverse(th, float(model.lam) * g_scalar(th, float(x)))


def q_array(model: ModelSpec, xs: np.ndarray) -> np.ndarray:
    th = model.theta.as_float() if model.theta.is_exact else model.theta
    return p_inverse_array(th, float(model.lam) * g_scalar(th, np.asarray(xs, dtype=float)))


# ---------------------------------------------------------------------------
# diagonal solution


def _float_model(model: ModelSpec) -> tuple[ThetaVector, float]:
    th = model.theta.as_float() if model.theta.is_exact else model.theta
    return th, float(model.lam)


def eta(model: ModelSpec, x):
    """eta(x) = x - lam g(x) f^{D-1}(x); its roots are the diagonal solutions."""
    th, lam = _float_model(model)
    return x - lam * g_scalar(th, x) * f_scalar(th, x) ** (th.delta - 1)


def _signs(values: np.ndarray, scale: np.ndarray) -> np.ndarray:
    s = np.sign(values)
    s[np.abs(values) <= NOISE * scale] = 0
    s[~np.isfinite(values)] = 0
    return s


def _brackets(xs: np.ndarray, signs: np.ndarray, valid: Optional[np.ndarray] = None) -> list:
    """Index pairs (i, j) of consecutive nonzero signs that differ.

    Invalid points split the grid so no bracket spans them.
    """
    out = []
    last = None
    for i, s in enumerate(signs):
        if valid is not None and not valid[i]:
            last = None
            continue
        if s == 0:
            continue
        if last is not None and signs[last] != s:
            out.append((last, i))
        last = i
    return out


def diagonal_roots(model: ModelSpec) -> list:
    """All roots of eta found by a 2048 point sign scan plus bisection."""
    th, lam = _float_model(model)
    upper = model.search_upper()
    xs = np.linspace(0.0, upper, MONOTONE_GRID)
    rhs = lam * g_scalar(th, xs) * f_scalar(th, xs) ** (th.delta - 1)
    vals = xs - rhs
    signs = _signs(vals, xs + rhs)
    fn = lambda x: eta(model, x)
    roots = []
    for i, j in _brackets(xs, signs):
        r = _bisect(fn, float(xs[i]), float(xs[j]))
        if not roots or abs(r - roots[-1]) > CYCLE_SEPARATION * max(1.0, r):
            roots.append(r)
    if not roots:
        # everything within noise of zero: the scan could not separate signs
        roots.append(_bisect(fn, 0.0, upper))
    return roots


def solve_diagonal(model: ModelSpec) -> float:
    """Smallest nonnegative root of eta."""
    roots = diagonal_roots(model)
    if len(roots) > 1:
        log.warning("multiple diagonal roots for %s: %s", model, roots)
    return roots[0]


def local_slope(model: ModelSpec, x: float) -> float:
    """q'(x) = lam g'(x) / p'(x), from exact polynomial derivatives."""
    th, lam = _float_model(model)
    return lam * g_prime(th, x) / p_prime(th, x)


def _locally_unstable(model: ModelSpec, x: float) -> bool:
    """True when (lam g')^2 > (p')^2 at x, i.e. |q'(x)| > 1."""
    th, lam = _float_model(model)
    a = (lam * g_prime(th, x)) ** 2
    b = p_prime(th, x) ** 2
    return a > b * (1 + SLOPE_TOL) + 1e-300


# ---------------------------------------------------------------------------
# two-cycles


def _scan_grid(lo: float, hi: float, anchor: float, n: int = SCAN_GRID) -> np.ndarray:
    """Linear grid on [lo, hi] refined geometrically towards 0 and towards anchor."""
    span = hi - lo
    pts = [np.linspace(lo, hi, n)]
    if hi > 0:
        pts.append(np.geomspace(max(hi * 1e-15, 1e-300), hi, 512))
    k = np.arange(1, 60)
    near = anchor * 2.0 ** (-k.astype(float))
    pts.append(anchor - near)
    pts.append(anchor + near)
    pts.append(np.array([anchor]))
    xs = np.unique(np.concatenate(pts))
    return xs[(xs >= lo) & (xs <= hi) & (span >= 0)]


def _cycle_residual_q(model: ModelSpec):
    """e(x) = p(x) - lam g(q(x)); zero exactly at solutions of the system (p increasing)."""
    th, lam = _float_model(model)

    def scalar(x: float) -> float:
        return p_scalar(th, x) - lam * g_scalar(th, q_func(model, x))

    def vector(xs: np.ndarray):
        a = p_scalar(th, xs)
        b = lam * g_scalar(th, q_array(model, xs))
        return a - b, np.abs(a) + np.abs(b)

    return scalar, vector


def find_two_cycle(
    model: ModelSpec,
    max_iter: int = MAX_Q_ITERATIONS,
    accelerate: bool = True,
    prefix: int = 64,
) -> CycleSearch:
    """Outermost two-cycle of q, starting the iteration from 0.

    The even iterates q^{2n}(0) increase to the smallest fixed point of q o q.
    With ``accelerate`` the iteration runs for ``prefix`` steps and that limit
    is then located directly as the first sign change of p(x) - lam g(q(x))
    to the right of the last even iterate.  Without it the raw iteration runs
    up to ``max_iter`` steps and :class:`IterationBudgetExceeded` is raised if
    the Cauchy test never passes.
    """
    th, lam = _float_model(model)
    if not p_is_increasing(th, lam):
        raise ContractViolation("find_two_cycle needs p increasing on the search interval")
    x_star = solve_diagonal(model)
    scale = max(1.0, x_star)
    tol = CAUCHY_TOL * scale
    even, odd = 0.0, q_func(model, 0.0)
    budget = min(prefix, max_iter) if accelerate else max_iter
    converged = False
    it = 0
    for it in range(1, budget + 1):
        new_even = q_func(model, odd)
        new_odd = q_func(model, new_even)
        done = abs(new_even - even) <= tol and abs(new_odd - odd) <= tol
        even, odd = new_even, new_odd
        if done:
            converged = True
            break

    if not accelerate:
        if not converged:
            raise IterationBudgetExceeded(f"q iteration did not settle in {max_iter} steps")
        pair = (even, odd) if abs(odd - even) > CYCLE_SEPARATION else None
        return CycleSearch(tuple(sorted(pair)) if pair else None, it, True)

    # e < 0 on [0, Z_even); the last even iterate only densifies the grid
    scalar, vector = _cycle_residual_q(model)
    xs = np.union1d(_scan_grid(0.0, x_star, x_star), np.linspace(min(even, x_star), x_star, 512))
    vals, mag = vector(xs)
    signs = _signs(vals, mag)
    pair = None
    for i, j in _brackets(xs, signs):
        if xs[j] >= x_star:
            break
        r = _bisect(scalar, float(xs[i]), float(xs[j]))
        partner = q_func(model, r)
        if abs(partner - r) > CYCLE_SEPARATION * scale:
            pair = (min(r, partner), max(r, partner))
        break
    return CycleSearch(pair, it, True)


def _fallback_scan(model: ModelSpec, x_star: float) -> Optional[tuple]:
    """Off-diagonal solutions without assuming p monotone.

    For each x the first equation fixes y = G(x) = g^{-1}(p(x)/lam); solutions
    are the roots of e(x) = p(G(x)) - lam g(x).  Roots other than x* give
    off-diagonal solutions; the widest pair is returned.
    """
    th, lam = _float_model(model)
    upper = model.search_upper()

    def partner(xs):
        return g_inverse_array(th, p_scalar(th, xs) / lam)

    def vector(xs):
        ys = partner(xs)
        a = p_scalar(th, np.where(np.isnan(ys), 0.0, ys))
        b = lam * g_scalar(th, xs)
        vals = np.where(np.isnan(ys), np.nan, a - b)
        return vals, np.abs(a) + np.abs(b)

    def scalar(x):
        return float(vector(np.array([x]))[0][0])

    xs = _scan_grid(0.0, upper, x_star)
    xs = xs[xs > 0]
    vals, mag = vector(xs)
    valid = np.isfinite(vals)
    signs = _signs(vals, mag)
    best = None
    for i, j in _brackets(xs, signs, valid):
        if xs[i] <= x_star <= xs[j]:
            continue
        r = _bisect(scalar, float(xs[i]), float(xs[j]))
        if abs(r - x_star) <= CYCLE_SEPARATION * max(1.0, x_star):
            continue
        y = float(partner(np.array([r]))[0])
        if not math.isfinite(y) or abs(y - r) <= CYCLE_SEPARATION * max(1.0, x_star):
            continue
        cand = (min(r, y), max(r, y))
        if best is None or cand[1] - cand[0] > best[1] - best[0]:
            best = cand
    return best


def system_residuals(model: ModelSpec, x: float, y: float) -> tuple:
    th, lam = _float_model(model)
    m = th.delta - 1
    r1 = x - lam * g_scalar(th, y) * f_scalar(th, x) ** m
    r2 = y - lam * g_scalar(th, x) * f_scalar(th, y) ** m
    return float(r1), float(r2)


def classify_uniqueness(model: ModelSpec) -> FixedPointReport:
    """Unique iff the fixed-point system has a single nonnegative solution."""
    th, lam = _float_model(model)
    interval = (0.0, model.search_upper())
    roots = diagonal_roots(model)
    x_star = roots[0]
    base = dict(
        diagonal_x=x_star,
        search_interval=interval,
        diagonal_roots=roots,
        local_slope=float(local_slope(model, x_star)),
    )
    diag_res = float(eta(model, x_star))
    if not is_log_convex(model.theta):
        return FixedPointReport(
            UNDETERMINED, two_cycle=None, iterations=0, residuals=(diag_res, diag_res),
            method="none", reason="theta is not log-convex", **base,
        )
    if len(roots) > 1:
        return FixedPointReport(
            NONUNIQUE, two_cycle=None, iterations=0, residuals=(diag_res, diag_res),
            method="diagonal-scan", reason="several diagonal solutions", **base,
        )

    unstable = _locally_unstable(model, x_star)
    increasing = p_is_increasing(th, lam)
    if increasing:
        search = find_two_cycle(model)
        pair, iters, method = search.pair, search.iterations, "q-map"
    else:
        pair, iters, method = _fallback_scan(model, x_star), 0, "fallback-scan"

    if pair is not None:
        verdict, reason = NONUNIQUE, "off-diagonal solution found"
        res = system_residuals(model, *pair)
    elif unstable:
        verdict, reason = NONUNIQUE, "diagonal solution repelling (|q'(x*)| > 1); cycle below resolution"
        res = (diag_res, diag_res)
    elif increasing:
        verdict, reason = UNIQUE, "q o q has no fixed point besides x*"
        res = (diag_res, diag_res)
    else:
        pp = p_prime(th, x_star)
        if abs(pp) > 1e-12:
            verdict, reason = UNIQUE, "no off-diagonal root on the scan grid; x* attracting"
        else:
            verdict, reason = UNDETERMINED, "degenerate slope of p at x*"
        res = (diag_res, diag_res)
    return FixedPointReport(
        verdict, two_cycle=pair, iterations=iters, residuals=res, method=method,
        p_increasing=increasing, reason=reason, **base,
    )


# ---------------------------------------------------------------------------
# consequences of uniqueness


def limit_probabilities(model: ModelSpec, check: bool = True) -> LimitProbabilities:
    """p_k = theta_k C(D,k) z^k / (lam f^D(z) + L(z)) at the diagonal solution z."""
    if check:
        verdict = classify_uniqueness(model).verdict
        if verdict != UNIQUE:
            raise ContractViolation(f"limit probabilities need the Unique regime, got {verdict}")
    th, lam = _float_model(model)
    z = solve_diagonal(model)
    d = th.delta
    included = lam * f_scalar(th, z) ** d
    den = included + big_L(th, z)
    p = tuple(float(th[k] * binom(d, k) * z**k / den) for k in range(d + 1))
    return LimitProbabilities(d, p, float(included / den), float(z))


def r_criterion(model: ModelSpec) -> tuple:
    """(r(x*), 1/lam) with r = |g'/p'| by central differences."""
    th, lam = _float_model(model)
    x = solve_diagonal(model)
    h = 1e-6 * max(1.0, x)
    dp = (p_scalar(th, x + h) - p_scalar(th, x - h)) / (2 * h)
    if abs(dp) < 1e-12:
        raise ContractViolation(f"p'(x*) = {dp!r} is degenerate")
    dg = (g_scalar(th, x + h) - g_scalar(th, x - h)) / (2 * h)
    return abs(dg / dp), 1.0 / lam


def r_criterion_holds(model: ModelSpec) -> bool:
    r, inv = r_criterion(model)
    return r <= inv + 1e-9


def schwarzian_of(fn: Callable[[float], float], x: float, h: float) -> float:
    """S[F] = F'''/F' - 1.5 (F''/F')^2 from five point stencils."""
    f2p, f1p, f0, f1m, f2m = fn(x + 2 * h), fn(x + h), fn(x), fn(x - h), fn(x - 2 * h)
    d1 = (-f2p + 8 * f1p - 8 * f1m + f2m) / (12 * h)
    d2 = (-f2p + 16 * f1p - 30 * f0 + 16 * f1m - f2m) / (12 * h * h)
    d3 = (f2p - 2 * f1p + 2 * f1m - f2m) / (2 * h**3)
    if abs(d1) <= 1e-10:
        raise ContractViolation("first derivative too small for the Schwarzian")
    return d3 / d1 - 1.5 * (d2 / d1) ** 2


def schwarzian(model: ModelSpec, x: float) -> float:
    """Schwarzian derivative of q at x; step is 1e-4 of the search interval."""
    th, lam = _float_model(model)
    if not p_is_increasing(th, lam):
        raise ContractViolation("Schwarzian of q needs p increasing")
    h = 1e-4 * model.search_upper()
    return schwarzian_of(lambda t: q_func(model, t), float(x), h)
