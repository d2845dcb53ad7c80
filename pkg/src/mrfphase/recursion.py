"""Depth recursions for the ratio zeta_d = Z_d(0,1)/Z_d(0,0) on the regular tree.

With identical child boundaries the ratio obeys
zeta_d = lam g(zeta_{d-1}) f^{D-1}(zeta_{d-2}).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelSpec, ThetaVector, big_L, binom, f_scalar, g_scalar
from .fixedpoint import IterationBudgetExceeded, ContractViolation

BOUNDARIES = ("all_included", "free")
CONVERGENCE_RUN = 20
CONVERGENCE_TOL = 1e-12
DEFAULT_DMAX = 2000


@dataclass
class DepthSequences:
    """Bounding sequences from depth 5 and the extremal sequence from depth 3.

    ``lower[i]`` and ``upper[i]`` belong to depth ``start_depth + i``;
    ``extremal[i]`` belongs to depth ``3 + i``.
    """

    lower: np.ndarray
    upper: np.ndarray
    extremal: np.ndarray
    start_depth: int = 5

    def depths(self) -> np.ndarray:
        return np.arange(self.start_depth, self.start_depth + len(self.lower))

    def gap(self) -> np.ndarray:
        return self.upper - self.lower

    def extremal_at(self, d: int) -> float:
        return float(self.extremal[d - 3])


def _step(theta: ThetaVector, lam: float, prev1: float, prev2: float) -> float:
    return lam * g_scalar(theta, prev1) * f_scalar(theta, prev2) ** (theta.delta - 1)


def _float(model: ModelSpec) -> tuple[ThetaVector, float]:
    th = model.theta.as_float() if model.theta.is_exact else model.theta
    return th, float(model.lam)


def top_value(model: ModelSpec) -> float:
    """lam theta_0^{-1} (theta_D/theta_{D-1})^{D-1}."""
    return model.search_upper()


def bounding_sequences(model: ModelSpec, d_max: int = 200) -> DepthSequences:
    """Lower and upper bounding sequences for depths 5..d_max."""
    if d_max < 7:
        raise ValueError("d_max must be at least 7")
    th, lam = _float(model)
    n = d_max - 4
    lower = np.empty(n)
    upper = np.empty(n)
    lower[0] = lower[1] = 0.0
    upper[0] = upper[1] = top_value(model)
    for i in range(2, n):
        lower[i] = _step(th, lam, upper[i - 1], lower[i - 2])
        upper[i] = _step(th, lam, lower[i - 1], upper[i - 2])
    return DepthSequences(lower, upper, extremal_boundary_seq(model, d_max))


def extremal_boundary_seq(model: ModelSpec, d_max: int = 200) -> np.ndarray:
    """zeta_d under the boundary with depth d included and depth d-1 excluded, d = 3..d_max."""
    if d_max < 5:
        raise ValueError("d_max must be at least 5")
    th, lam = _float(model)
    out = np.empty(d_max - 2)
    out[0] = top_value(model)
    out[1] = lam * th.bottom_ratio ** (th.delta - 1) * g_scalar(th, out[0])
    for i in range(2, len(out)):
        out[i] = _step(th, lam, out[i - 1], out[i - 2])
    return out


def free_boundary_seq(model: ModelSpec, d_max: int = 200) -> np.ndarray:
    """zeta_d with no boundary constraint, d = 1..d_max.

    Depths 1 and 2 come from the exact subtree partition functions; the
    two-step recursion takes over from depth 3.
    """
    from .oracle import dp_partition

    th, lam = _float(model)
    out = np.empty(d_max)
    for d in (1, 2):
        z00, z01, _ = dp_partition(model, d, "free", allow_shallow=True)
        out[d - 1] = np.exp(z01 - z00)
    for i in range(2, d_max):
        out[i] = _step(th, lam, out[i - 1], out[i - 2])
    return out


def _tail_limit(seq: np.ndarray) -> tuple[float, bool]:
    """Last term and whether the final CONVERGENCE_RUN terms agree to the tolerance."""
    if len(seq) < CONVERGENCE_RUN + 1:
        return float(seq[-1]), False
    tail = seq[-(CONVERGENCE_RUN + 1):]
    scale = max(1.0, float(np.max(np.abs(tail))))
    ok = bool(np.all(np.abs(np.diff(tail)) < CONVERGENCE_TOL * scale))
    return float(seq[-1]), ok


def parity_limits(seq: np.ndarray, first_depth: int) -> tuple[float, float, bool]:
    """Tail-read limits of even- and odd-depth subsequences."""
    start_even = 0 if first_depth % 2 == 0 else 1
    even = seq[start_even::2]
    odd = seq[1 - start_even::2]
    even_lim, ok_e = _tail_limit(even)
    odd_lim, ok_o = _tail_limit(odd)
    return even_lim, odd_lim, ok_e and ok_o


def parity_gap(model: ModelSpec, d_max: int = DEFAULT_DMAX, strict: bool = True) -> tuple:
    """(even_limit, odd_limit, gap) of the extremal sequence.

    The sequence is generated in chunks and stops early once both parity
    subsequences settle.  With ``strict`` a budget overrun raises
    :class:`IterationBudgetExceeded`.
    """
    if d_max < 100:
        raise ValueError("d_max must be at least 100")
    th, lam = _float(model)
    seq = list(extremal_boundary_seq(model, 5))
    while len(seq) + 2 < d_max:
        seq.append(_step(th, lam, seq[-1], seq[-2]))
        if len(seq) % 50 == 0:
            e, o, ok = parity_limits(np.asarray(seq), 3)
            if ok:
                return e, o, abs(o - e)
    e, o, ok = parity_limits(np.asarray(seq), 3)
    if not ok and strict:
        raise IterationBudgetExceeded(f"parity subsequences not settled by depth {d_max}")
    return e, o, abs(o - e)


def contraction_check(model: ModelSpec, d_last: int = 200) -> tuple[bool, float]:
    """Check gap_d <= (lam/lam_lower) max(gap_{d-1}, gap_{d-2}) + 1e-12 for 7 <= d <= d_last."""
    from .phase import lambda_lower

    lam_lo = float(lambda_lower(model.theta))
    lam = float(model.lam)
    if not lam < lam_lo:
        raise ContractViolation(f"contraction needs lam < {lam_lo!r}, got {lam!r}")
    rate = lam / lam_lo
    gaps = bounding_sequences(model, d_last).gap()
    holds = True
    worst = 0.0
    for i in range(2, len(gaps)):
        prev = max(gaps[i - 1], gaps[i - 2])
        if gaps[i] > rate * prev + 1e-12:
            holds = False
        if prev > 1e-12:
            worst = max(worst, gaps[i] / prev)
    return holds, worst


def finite_depth_conditional(model: ModelSpec, d: int, boundary: str = "all_included") -> np.ndarray:
    """(p_0..p_D, p_plus) at the root of the depth-d tree under identical subtrees."""
    if boundary not in BOUNDARIES:
        raise ValueError(f"unsupported boundary {boundary!r}; expected one of {BOUNDARIES}")
    if d < 5:
        raise ValueError("depth must be at least 5")
    th, lam = _float(model)
    if boundary == "all_included":
        seq = extremal_boundary_seq(model, d)
        z_d, z_prev = seq[d - 3], seq[d - 4]
    else:
        seq = free_boundary_seq(model, d)
        z_d, z_prev = seq[d - 1], seq[d - 2]
    return root_probabilities(th, lam, z_d, z_prev)


def root_probabilities(theta: ThetaVector, lam: float, z_d: float, z_prev: float) -> np.ndarray:
    D = theta.delta
    included = lam * f_scalar(theta, z_prev) ** D
    den = included + big_L(theta, z_d)
    p = [theta[k] * binom(D, k) * z_d**k / den for k in range(D + 1)]
    return np.array(p + [included / den], dtype=float)


def depth_table(model: ModelSpec, d_max: int) -> list[dict]:
    """Rows (depth, zeta_lower, zeta_upper, zeta_extremal, gap) from depth 5."""
    seqs = bounding_sequences(model, d_max)
    rows = []
    for i, d in enumerate(seqs.depths()):
        rows.append(
            {
                "depth": int(d),
                "zeta_lower": float(seqs.lower[i]),
                "zeta_upper": float(seqs.upper[i]),
                "zeta_extremal": seqs.extremal_at(int(d)),
                "gap": float(seqs.upper[i] - seqs.lower[i]),
            }
        )
    return rows
