import numpy as np
import pytest

from mrfphase.fixedpoint import NONUNIQUE, UNIQUE
from mrfphase.model import is_convex
from mrfphase.perturbation import (
    BOUNDARY,
    NONUNIQUENESS,
    classify_direction,
    criterion_gap_slope,
    doubling_search,
    e0_direction,
    gap_slope_formula,
    goodxis_check,
    goodxis_identities,
    lambda_capital,
    nonmonotonicity_scan,
    pi_vector,
    random_convex_direction,
    sign_pattern_holds,
    x_c_formula,
    x_c_slope,
)


def test_lambda_capital():
    assert lambda_capital(7, 0) == 1
    assert lambda_capital(3, 2) == 3
    for d in (3, 6, 11):
        assert sum(lambda_capital(d, j) for j in range(d + 1)) == pytest.approx(((d - 1) / (d - 2)) ** d)
    with pytest.raises(ValueError):
        lambda_capital(3, 4)


def test_pi_three():
    pi = pi_vector(3)
    assert pi.tolist() == [1, -12, -3, 10]
    assert pi.sum() == -4
    assert (np.arange(4) * pi).sum() == 12


@pytest.mark.parametrize("delta", range(3, 21))
def test_sign_pattern(delta):
    assert sign_pattern_holds(delta)


def test_goodxis_examples():
    ids = goodxis_identities(3)
    assert ids["sum_i2_lambda"][0] == pytest.approx(24)
    assert ids["x_star"][0] == pytest.approx(1.0, abs=1e-12)
    assert goodxis_check(10)


def test_classify_direction_examples():
    r = classify_direction(3, e0_direction(3))
    assert r.dot == 1 and r.classification == NONUNIQUENESS
    assert r.convex  # e0 has nondecreasing differences
    r = classify_direction(3, [0, 0, 0, 1])
    assert r.dot == 10 and r.classification == NONUNIQUENESS and r.convex
    assert classify_direction(4, np.zeros(5)).classification == BOUNDARY
    with pytest.raises(ValueError):
        classify_direction(3, [1, 2])


def test_x_c_examples():
    assert x_c_formula(3, e0_direction(3)) == pytest.approx(-3 / 8)
    assert x_c_slope(3, e0_direction(3)).x_c_numeric == pytest.approx(-3 / 8, abs=1e-4)
    assert x_c_formula(4, np.zeros(5)) == 0
    for d in (3, 4, 5):
        ones = np.ones(d + 1)
        rep = x_c_slope(d, ones)
        assert rep.x_c_formula == pytest.approx(-1 / (2 * (d - 2)))
        assert rep.x_c_numeric == pytest.approx(rep.x_c_formula, rel=1e-6)


def test_gap_slope_examples():
    assert gap_slope_formula(3, np.zeros(4)) == 0
    assert criterion_gap_slope(3, np.zeros(4)).gap_slope_numeric == pytest.approx(0, abs=1e-9)
    c = [0, 0, 0, 1]
    assert gap_slope_formula(3, c) == pytest.approx(-5 / 8)
    assert criterion_gap_slope(3, c).gap_slope_numeric == pytest.approx(-5 / 8, rel=1e-3)


def test_gap_slope_sign_matches_classification():
    rng = np.random.default_rng(21)
    for delta in (3, 4, 5):
        for _ in range(7):
            c = random_convex_direction(delta, rng)
            rep = criterion_gap_slope(delta, c)
            dot = float(pi_vector(delta) @ c)
            assert np.sign(rep.gap_slope_numeric) == -np.sign(dot)


def test_random_convex_direction():
    rng = np.random.default_rng(0)
    for _ in range(50):
        c = random_convex_direction(4, rng)
        assert is_convex(c) and np.max(np.abs(c)) == pytest.approx(1.0)


def test_e0_scan_pattern():
    rows = nonmonotonicity_scan(3, [0.0, 0.01, 0.1, 0.5, 1.0])
    verdicts = [v for _, v in rows]
    assert verdicts[0] == UNIQUE
    assert verdicts[1] == NONUNIQUE
    assert UNIQUE in verdicts[2:]
    found = doubling_search(3, 0.5, 1e3)
    assert found[-1][1] == UNIQUE
    with pytest.raises(ValueError):
        nonmonotonicity_scan(3, [-1.0])
