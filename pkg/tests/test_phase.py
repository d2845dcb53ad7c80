import math
from fractions import Fraction as F

import numpy as np
import pytest

from mrfphase.checks import random_log_convex_theta
from mrfphase.model import ThetaVector, theta_for_family
from mrfphase.phase import (
    critical_bracket,
    hardcore_critical_activity,
    lambda_lower,
    lambda_upper,
    psi,
    robustness_check,
    verify1_check,
)


def test_psi_examples():
    for d in (3, 5, 8):
        assert psi(ThetaVector.ones(d)) == d - 1
    assert psi(ThetaVector(3, (1, 1, 1, 2))) == 2
    th = ThetaVector(4, (1.0, 0.5, 0.4, 0.6, 1.5))
    assert psi(th.scaled(7.0)) == pytest.approx(psi(th))


def test_hardcore_bounds():
    th = ThetaVector.ones(3)
    assert lambda_lower(th) == pytest.approx(0.25)
    assert lambda_upper(th) == pytest.approx(math.e**3)
    assert lambda_lower(th) <= 4 <= lambda_upper(th)


@pytest.mark.parametrize("delta", range(3, 13))
def test_truncated_poisson_lower_bound(delta):
    assert lambda_lower(theta_for_family("truncated_poisson", delta)) >= F(1, 2 * delta)


def test_critical_activity_values():
    assert hardcore_critical_activity(3) == pytest.approx(4)
    assert hardcore_critical_activity(4) == pytest.approx(27 / 16)
    assert hardcore_critical_activity(5) == pytest.approx(256 / 243)
    assert hardcore_critical_activity(6) == pytest.approx(3125 / 4096)


def test_bracket_hardcore_three():
    br = critical_bracket(ThetaVector.ones(3), tol=1e-6)
    assert abs(br.last_unique - 4) <= 1e-6 and abs(br.first_nonunique - 4) <= 1e-6
    assert br.last_unique <= 4 <= br.first_nonunique


def test_bracket_hardcore_four():
    br = critical_bracket(ThetaVector.ones(4), tol=1e-6)
    assert br.last_unique == pytest.approx(27 / 16, abs=1e-6)
    assert br.first_nonunique == pytest.approx(27 / 16, abs=1e-6)


def test_bracket_truncated_geometric():
    th = theta_for_family("truncated_geometric", 3)
    br = critical_bracket(th, tol=1e-6)
    lo, hi = float(lambda_lower(th)), float(lambda_upper(th))
    assert br.last_unique is not None and br.first_nonunique is not None
    assert lo <= br.last_unique < br.first_nonunique <= hi
    assert br.width <= 1e-6
    assert not br.partial


def test_bracket_rejects_non_log_convex():
    with pytest.raises(ValueError):
        critical_bracket(ThetaVector(3, (1.0, 2.0, 1.0, 2.0)))


def test_robustness_flat():
    for d in (3, 5, 10):
        assert robustness_check(ThetaVector.ones(d), 0.0)
        assert lambda_lower(ThetaVector.ones(d)) >= 1 / (2 * d)
    assert robustness_check(ThetaVector(3, (1.0, 1.0, 1.1, 1.25)), 1.0)
    with pytest.raises(ValueError):
        robustness_check(ThetaVector(3, (1.0, 1.0, 1.0, 3.0)), 0.5)


def test_asymptotic_constant():
    assert 100 * hardcore_critical_activity(100) == pytest.approx(math.e, rel=0.05)


def test_verify1_examples():
    assert verify1_check(ThetaVector.ones(3))
    assert verify1_check(ThetaVector.ones(4))
    rng = np.random.default_rng(17)
    for i in range(50):
        assert verify1_check(random_log_convex_theta(3 + i % 4, rng))
