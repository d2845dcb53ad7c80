import numpy as np
import pytest

from mrfphase.fixedpoint import NONUNIQUE, ContractViolation, classify_uniqueness, find_two_cycle, limit_probabilities, solve_diagonal
from mrfphase.model import ModelSpec, ThetaVector, theta_for_family
from mrfphase.oracle import conditional_pk_exact
from mrfphase.phase import lambda_lower, lambda_upper
from mrfphase.recursion import (
    bounding_sequences,
    contraction_check,
    depth_table,
    extremal_boundary_seq,
    finite_depth_conditional,
    parity_gap,
    parity_limits,
    top_value,
)


def hc(lam, delta=3):
    return ModelSpec(ThetaVector.ones(delta), lam)


def test_bounding_initial_values():
    m = ModelSpec(ThetaVector(4, (2.0, 1.0, 0.8, 1.0, 3.0)), 0.6)
    seqs = bounding_sequences(m, 20)
    assert seqs.lower[0] == seqs.lower[1] == 0.0
    expected = 0.6 / 2.0 * 3.0 ** 3
    assert seqs.upper[0] == pytest.approx(expected) and seqs.upper[1] == pytest.approx(expected)
    assert top_value(m) == pytest.approx(expected)


def test_bounding_sandwich_extremal():
    seqs = bounding_sequences(hc(2.5), 100)
    ext = seqs.extremal[2:]
    assert np.all(seqs.lower <= ext + 1e-12)
    assert np.all(ext <= seqs.upper + 1e-12)


def test_bounding_converge_in_uniqueness():
    seqs = bounding_sequences(hc(3.0), 500)
    x = solve_diagonal(hc(3.0))
    assert seqs.lower[-1] == pytest.approx(x, abs=1e-10)
    assert seqs.upper[-1] == pytest.approx(x, abs=1e-10)


def test_bounding_split_in_nonuniqueness():
    seqs = bounding_sequences(hc(5.0), 500)
    lo, hi = find_two_cycle(hc(5.0)).pair
    assert seqs.lower[-1] == pytest.approx(lo, abs=1e-9)
    assert seqs.upper[-1] == pytest.approx(hi, abs=1e-9)


def test_extremal_start():
    seq = extremal_boundary_seq(hc(1.0), 10)
    assert seq[0] == pytest.approx(1.0)
    assert seq[1] == pytest.approx(0.25)


def test_extremal_parity_split():
    seq = extremal_boundary_seq(hc(5.0), 400)
    even, odd, ok = parity_limits(seq, 3)
    assert ok
    assert odd > even + 0.1


@pytest.mark.parametrize("delta,lam", [(3, 2.0), (5, 0.5)])
def test_extremal_converges_below_threshold(delta, lam):
    seq = extremal_boundary_seq(hc(lam, delta), 500)
    assert seq[-1] == pytest.approx(solve_diagonal(hc(lam, delta)), abs=1e-10)


@pytest.mark.parametrize("delta", [3, 4])
def test_extremal_converges_at_threshold(delta):
    # only algebraically fast at the critical activity
    lam = (delta - 1) ** (delta - 1) / (delta - 2) ** delta
    x = solve_diagonal(hc(lam, delta))
    seq = extremal_boundary_seq(hc(lam, delta), 20000)
    err = np.abs(seq - x)
    checkpoints = [err[i - 1 : i + 1].max() for i in (100, 1000, 10000, 19990)]
    assert all(a > b for a, b in zip(checkpoints, checkpoints[1:]))
    assert checkpoints[-1] < 0.05


def test_parity_gap_examples():
    assert parity_gap(hc(3.0))[2] < 1e-9
    assert parity_gap(hc(5.0))[2] > 0.1


def test_parity_gap_consistent_with_classifier():
    rng = np.random.default_rng(3)
    for _ in range(10):
        delta = int(rng.integers(3, 6))
        ratios = np.sort(np.exp(rng.uniform(-1, 1, delta)))
        theta = ThetaVector(delta, tuple(np.concatenate([[1.0], np.cumprod(ratios)]).tolist()))
        lam = float(np.exp(rng.uniform(np.log(lambda_lower(theta)), np.log(lambda_upper(theta)))))
        m = ModelSpec(theta, lam)
        _, _, gap = parity_gap(m, strict=False)
        if gap > 1e-6:
            assert classify_uniqueness(m).verdict == NONUNIQUE


def test_contraction_examples():
    holds, worst = contraction_check(hc(0.1), 200)
    assert lambda_lower(ThetaVector.ones(3)) == pytest.approx(0.25)
    assert holds and worst <= 0.4 + 1e-9
    holds, worst = contraction_check(hc(0.9 * 0.25), 200)
    assert holds and worst <= 0.9 + 1e-9
    gaps = bounding_sequences(hc(0.1), 200).gap()
    assert gaps[-1] < 1e-30
    with pytest.raises(ContractViolation):
        contraction_check(hc(1.0))


def test_contraction_truncated_poisson():
    theta = theta_for_family("truncated_poisson", 4).as_float()
    lo = lambda_lower(theta)
    holds, worst = contraction_check(ModelSpec(theta, 0.8 * lo))
    assert holds and worst <= 0.8 + 1e-9


def test_finite_depth_matches_limit():
    m = hc(2.0)
    deep = finite_depth_conditional(m, 300)
    lp = limit_probabilities(m)
    assert deep[:-1] == pytest.approx(lp.p, abs=1e-10)
    assert deep[-1] == pytest.approx(lp.p_plus, abs=1e-10)


@pytest.mark.parametrize("d", [5, 6, 7])
def test_finite_depth_matches_dp(d):
    m = ModelSpec(ThetaVector(3, (1.0, 0.5, 0.4, 0.6)), 1.0)
    for b in ("all_included", "free"):
        assert finite_depth_conditional(m, d, b) == pytest.approx(conditional_pk_exact(m, d, b), abs=1e-10)


def test_p_plus_parity_above_upper_bound():
    theta = ThetaVector.ones(3)
    m = ModelSpec(theta, 1.01 * lambda_upper(theta))
    odd = [finite_depth_conditional(m, d)[-1] for d in (101, 103, 105)]
    even = [finite_depth_conditional(m, d)[-1] for d in (100, 102, 104)]
    assert max(odd) < min(even)


def test_depth_table_rows():
    rows = depth_table(hc(1.0), 12)
    assert [r["depth"] for r in rows] == list(range(5, 13))
    for r in rows:
        assert r["gap"] == pytest.approx(r["zeta_upper"] - r["zeta_lower"])
