"""Potential vectors, the polynomial maps f, g, L and structural predicates.

All scalar functions accept floats, ``fractions.Fraction`` values or numpy
arrays.  Rational inputs with a rational theta stay exact, which the oracle
module relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

FAMILIES = ("binomial", "truncated_poisson", "truncated_geometric")

# relative slack for the convexity style predicates
PREDICATE_SLACK = 1e-12


@dataclass(frozen=True)
class ThetaVector:
    """Clique potentials theta_0..theta_delta for a degree-delta node."""

    delta: int
    values: tuple

    def __post_init__(self):
        if not isinstance(self.delta, (int, np.integer)) or self.delta < 3:
            raise ValueError(f"delta must be an integer >= 3, got {self.delta!r}")
        vals = tuple(self.values)
        if len(vals) != self.delta + 1:
            raise ValueError(
                f"theta needs {self.delta + 1} entries for delta={self.delta}, got {len(vals)}"
            )
        for v in vals:
            if not (v > 0) or (isinstance(v, float) and not math.isfinite(v)):
                raise ValueError(f"theta entries must be finite and strictly positive, got {v!r}")
        # integers are promoted so that rational theta stays exact under division
        vals = tuple(Fraction(v) if isinstance(v, (int, np.integer)) else v for v in vals)
        object.__setattr__(self, "delta", int(self.delta))
        object.__setattr__(self, "values", vals)

    @classmethod
    def of(cls, values: Iterable) -> "ThetaVector":
        vals = tuple(values)
        return cls(len(vals) - 1, vals)

    @classmethod
    def ones(cls, delta: int) -> "ThetaVector":
        return cls(delta, (1.0,) * (delta + 1))

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]

    def __iter__(self):
        return iter(self.values)

    @property
    def is_exact(self) -> bool:
        return all(isinstance(v, (int, Fraction)) for v in self.values)

    @property
    def top_ratio(self):
        """theta_delta / theta_{delta-1}."""
        return self.values[-1] / self.values[-2]

    @property
    def bottom_ratio(self):
        """theta_1 / theta_0."""
        return self.values[1] / self.values[0]

    def ratios(self) -> list:
        return [self.values[k + 1] / self.values[k] for k in range(self.delta)]

    def as_array(self) -> np.ndarray:
        return np.array([float(v) for v in self.values])

    def as_float(self) -> "ThetaVector":
        return ThetaVector(self.delta, tuple(float(v) for v in self.values))

    def scaled(self, c) -> "ThetaVector":
        return ThetaVector(self.delta, tuple(c * v for v in self.values))


@dataclass(frozen=True)
class ModelSpec:
    """One point (delta, lambda, theta) of parameter space."""

    theta: ThetaVector
    lam: float

    def __post_init__(self):
        if not (self.lam > 0) or (isinstance(self.lam, float) and not math.isfinite(self.lam)):
            raise ValueError(f"activity must be finite and > 0, got {self.lam!r}")

    @property
    def delta(self) -> int:
        return self.theta.delta

    def search_upper(self) -> float:
        """Right end of the interval holding every solution of the fixed-point system."""
        th = self.theta
        return float(self.lam * th.top_ratio ** (th.delta - 1) / th[0])

    def with_lambda(self, lam) -> "ModelSpec":
        return ModelSpec(self.theta, lam)


@dataclass(frozen=True)
class NeighborDistribution:
    """Law of the number of included neighbours of an excluded node."""

    delta: int
    probs: tuple

    def __post_init__(self):
        p = tuple(self.probs)
        if len(p) != self.delta + 1:
            raise ValueError("probs must have delta+1 entries")
        if any(v < 0 for v in p):
            raise ValueError("probabilities must be nonnegative")
        total = sum(p)
        if abs(total - 1) > 1e-12:
            raise ValueError(f"probabilities sum to {float(total)!r}, not 1")
        object.__setattr__(self, "probs", p)

    @classmethod
    def normalized(cls, delta: int, weights: Sequence) -> "NeighborDistribution":
        w = list(weights)
        total = sum(w)
        return cls(delta, tuple(v / total for v in w))

    def as_array(self) -> np.ndarray:
        return np.array([float(v) for v in self.probs])

    def tv_distance(self, other: "NeighborDistribution") -> float:
        return 0.5 * float(np.abs(self.as_array() - other.as_array()).sum())


# ---------------------------------------------------------------------------
# binomials and polynomial helpers


def binom(n: int, k: int) -> int:
    return math.comb(n, k)


def _horner(coefs: Sequence, x):
    """Evaluate sum_k coefs[k] x^k."""
    if isinstance(x, np.ndarray):
        coefs = [float(c) for c in coefs]
        acc = np.full(x.shape, coefs[-1])
    else:
        acc = coefs[-1]
    for c in reversed(coefs[:-1]):
        acc = acc * x + c
    return acc


def _horner_d1(coefs: Sequence, x):
    return _horner([k * coefs[k] for k in range(1, len(coefs))], x) if len(coefs) > 1 else 0 * x


def _den_coefs(theta: ThetaVector) -> list:
    m = theta.delta - 1
    return [theta[k] * binom(m, k) for k in range(m + 1)]


def _num_coefs(theta: ThetaVector) -> list:
    m = theta.delta - 1
    return [theta[k + 1] * binom(m, k) for k in range(m + 1)]


def _ratio(num: list, den: list, x):
    """num(x)/den(x), with the reversed polynomials in 1/x used for x > 1 (floats only)."""
    if isinstance(x, np.ndarray):
        x = x.astype(float)
        small = x <= 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(small, 1.0, 1.0 / np.where(small, 1.0, x))
            out = np.where(
                small,
                _horner(num, np.where(small, x, 0.0)) / _horner(den, np.where(small, x, 0.0)),
                _horner(num[::-1], t) / _horner(den[::-1], t),
            )
        return out
    if isinstance(x, float) and x > 1.0:
        t = 1.0 / x
        return _horner(num[::-1], t) / _horner(den[::-1], t)
    return _horner(num, x) / _horner(den, x)


# ---------------------------------------------------------------------------
# scalar maps


def f_scalar(theta: ThetaVector, x):
    """f(x) = sum theta_{k+1} C(D-1,k) x^k / sum theta_k C(D-1,k) x^k."""
    return _ratio(_num_coefs(theta), _den_coefs(theta), x)


def g_scalar(theta: ThetaVector, x):
    """g(x) = 1 / sum_{k<D} theta_k C(D-1,k) x^k."""
    return 1 / _horner(_den_coefs(theta), x)


def big_L(theta: ThetaVector, z):
    """L(z) = sum_{i<=D} theta_i C(D,i) z^i."""
    d = theta.delta
    return _horner([theta[i] * binom(d, i) for i in range(d + 1)], z)


def f_prime(theta: ThetaVector, x):
    num, den = _num_coefs(theta), _den_coefs(theta)
    n, dn = _horner(num, x), _horner(den, x)
    return (_horner_d1(num, x) * dn - n * _horner_d1(den, x)) / (dn * dn)


def g_prime(theta: ThetaVector, x):
    den = _den_coefs(theta)
    dn = _horner(den, x)
    return -_horner_d1(den, x) / (dn * dn)


def p_scalar(theta: ThetaVector, x):
    """p(x) = x f(x)^{-(D-1)}."""
    return x * f_scalar(theta, x) ** (-(theta.delta - 1))


def p_prime(theta: ThetaVector, x):
    m = theta.delta - 1
    fx = f_scalar(theta, x)
    return fx ** (-m) - m * x * fx ** (-m - 1) * f_prime(theta, x)


def _log_poly(log_coefs: np.ndarray, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    k = np.arange(len(log_coefs))
    with np.errstate(divide="ignore", invalid="ignore"):
        lx = np.log(x)[..., None]
        terms = log_coefs + np.where(k == 0, 0.0, k * lx)
    return logsumexp(terms, axis=-1)


def _log_binoms(n: int) -> np.ndarray:
    k = np.arange(n + 1)
    from scipy.special import gammaln

    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def log_f(theta: ThetaVector, x):
    """log f(x) through log-sum-exp; safe for large delta or extreme ratios."""
    m = theta.delta - 1
    lt = np.log(theta.as_array())
    lb = _log_binoms(m)
    return _log_poly(lt[1:] + lb, x) - _log_poly(lt[:-1] + lb, x)


def log_g(theta: ThetaVector, x):
    m = theta.delta - 1
    lt = np.log(theta.as_array())
    return -_log_poly(lt[:-1] + _log_binoms(m), x)


def log_L(theta: ThetaVector, z):
    lt = np.log(theta.as_array())
    return _log_poly(lt + _log_binoms(theta.delta), z)


# ---------------------------------------------------------------------------
# multi-argument versions


def sym_polys(x: Sequence) -> list:
    """Elementary symmetric polynomials sigma_0..sigma_n of x."""
    sig = [1] + [0] * len(x)
    for j, xj in enumerate(x, start=1):
        for k in range(j, 0, -1):
            sig[k] = sig[k] + xj * sig[k - 1]
    return sig


def _check_multi_arg(theta: ThetaVector, x: Sequence):
    if len(x) != theta.delta - 1:
        raise ValueError(f"expected {theta.delta - 1} arguments, got {len(x)}")


def f_multi(theta: ThetaVector, x: Sequence):
    _check_multi_arg(theta, x)
    s = sym_polys(list(x))
    num = sum(theta[k + 1] * s[k] for k in range(theta.delta))
    den = sum(theta[k] * s[k] for k in range(theta.delta))
    return num / den


def g_multi(theta: ThetaVector, x: Sequence):
    _check_multi_arg(theta, x)
    s = sym_polys(list(x))
    return 1 / sum(theta[k] * s[k] for k in range(theta.delta))


# ---------------------------------------------------------------------------
# predicates


def _slack(*vals) -> float:
    if any(isinstance(v, Fraction) for v in vals) and all(isinstance(v, (int, Fraction)) for v in vals):
        return 0
    return PREDICATE_SLACK * max(abs(float(v)) for v in vals)


def is_log_convex_seq(values: Sequence) -> bool:
    """True when v_{i+1} v_{i-1} >= v_i^2 for every interior i (all entries positive)."""
    v = list(values)
    for i in range(1, len(v) - 1):
        lhs, rhs = v[i + 1] * v[i - 1], v[i] * v[i]
        if lhs < rhs - _slack(lhs, rhs):
            return False
    return True


def is_log_convex(theta: ThetaVector) -> bool:
    return is_log_convex_seq(theta.values)


def is_convex(c: Sequence) -> bool:
    """Second differences nonnegative (up to relative slack)."""
    v = list(c)
    for i in range(1, len(v) - 1):
        second = v[i + 1] - 2 * v[i] + v[i - 1]
        if second < -_slack(v[i + 1], v[i], v[i - 1]):
            return False
    return True


def theta_for_family(family: str, delta: int) -> ThetaVector:
    """Exact rational theta for the named family."""
    if family == "binomial":
        vals = [Fraction(1)] * (delta + 1)
    elif family == "truncated_poisson":
        vals = [Fraction(1, math.factorial(k) * binom(delta, k)) for k in range(delta + 1)]
    elif family == "truncated_geometric":
        vals = [Fraction(1, binom(delta, k)) for k in range(delta + 1)]
    else:
        raise ValueError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")
    return ThetaVector(delta, tuple(vals))


def induced_mu(theta: ThetaVector, c, x) -> NeighborDistribution:
    """Normalised law mu(k) proportional to theta_k C(D,k) x^k.

    ``c`` is the free prefactor of the unnormalised form; it is validated but
    cancels on normalisation.
    """
    if not (c > 0) or not (x > 0):
        raise ValueError("c and x must be strictly positive")
    d = theta.delta
    w = [theta[k] * binom(d, k) * x**k for k in range(d + 1)]
    return NeighborDistribution.normalized(d, w)


def is_reverse_ultra_log_concave(mu: NeighborDistribution) -> bool:
    """True when mu(k)/C(D,k) is log-convex."""
    if any(p == 0 for p in mu.probs):
        raise ValueError("reverse ultra log-concavity needs strictly positive entries")
    return is_log_convex_seq([p / binom(mu.delta, k) for k, p in enumerate(mu.probs)])
