import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrfphase.model import (
    ModelSpec,
    NeighborDistribution,
    ThetaVector,
    big_L,
    binom,
    f_multi,
    f_scalar,
    g_multi,
    g_scalar,
    induced_mu,
    is_convex,
    is_log_convex,
    is_reverse_ultra_log_concave,
    log_f,
    log_g,
    log_L,
    p_scalar,
    sym_polys,
    theta_for_family,
)

T1112 = ThetaVector(3, (1, 1, 1, 2))
log_convex_thetas = st.builds(
    lambda d, start, incs: ThetaVector(d, tuple(np.exp(np.concatenate([[0], np.cumsum(start + np.cumsum(incs[:d]))])).tolist())),
    st.integers(3, 8),
    st.floats(-2, 2),
    st.lists(st.floats(0, 0.5), min_size=8, max_size=8).map(np.array),
)


def test_theta_validation():
    with pytest.raises(ValueError):
        ThetaVector(3, (1, 1, 1))
    with pytest.raises(ValueError):
        ThetaVector(3, (1, 0, 1, 1))
    with pytest.raises(ValueError):
        ThetaVector(2, (1, 1, 1))
    with pytest.raises(ValueError):
        ModelSpec(ThetaVector.ones(3), 0)
    assert ThetaVector(3, (1, 2, 3, 4)).is_exact


def test_f_examples():
    assert f_scalar(ThetaVector.ones(5), 7.3) == pytest.approx(1.0)
    assert f_scalar(T1112, F(1)) == F(5, 4)


@settings(max_examples=60, deadline=None)
@given(log_convex_thetas, st.floats(0, 50))
def test_f_between_extreme_ratios(theta, x):
    v = f_scalar(theta, x)
    lo, hi = theta.bottom_ratio, theta.top_ratio
    assert lo * (1 - 1e-12) <= v <= hi * (1 + 1e-12)


def test_g_examples():
    assert g_scalar(ThetaVector.ones(3), 1.0) == pytest.approx(0.25)
    th = ThetaVector(4, (F(3), 1, 2, 5, 7))
    assert g_scalar(th, 0) == F(1, 3)
    assert g_scalar(T1112, F(1)) == F(1, 4)


def test_L_examples():
    assert big_L(ThetaVector.ones(3), 1) == 8
    assert big_L(T1112, 0) == 1
    assert big_L(theta_for_family("truncated_poisson", 3), F(1)) == F(8, 3)


def test_log_forms_match_direct():
    th = ThetaVector(4, (1.0, 0.4, 0.3, 0.5, 2.0))
    for x in (0.0, 0.3, 2.0, 40.0):
        assert np.exp(log_f(th, x)) == pytest.approx(f_scalar(th, x), rel=1e-12)
        assert np.exp(log_g(th, x)) == pytest.approx(g_scalar(th, x), rel=1e-12)
        assert np.exp(log_L(th, x)) == pytest.approx(big_L(th, x), rel=1e-12)


def test_sym_polys():
    x, y, z = 2, 3, 5
    assert sym_polys([x, y, z])[2] == x * y + x * z + y * z
    assert sym_polys([1.5, 2.0])[0] == 1
    assert sym_polys([F(3)] * 4) == [binom(4, k) * 3**k for k in range(5)]


def test_multi_versions():
    th = ThetaVector(4, (F(1), F(1, 2), F(1, 3), F(1), F(4)))
    assert f_multi(th, [F(2)] * 3) == f_scalar(th, F(2))
    assert g_multi(th, [F(2)] * 3) == g_scalar(th, F(2))
    assert f_multi(ThetaVector.ones(4), [0.1, 2.0, 5.0]) == pytest.approx(1.0)
    assert f_multi(T1112, [F(1), F(1)]) == F(5, 4)
    with pytest.raises(ValueError):
        f_multi(T1112, [1.0])


def test_convexity_predicates():
    assert is_log_convex(ThetaVector.ones(5))
    assert is_convex([1, 1, 1, 1])
    assert is_log_convex(theta_for_family("truncated_poisson", 3))
    assert not is_log_convex(ThetaVector(3, (1, 2, 1, 2)))
    # first differences -1, 0, 0 never decrease, so e0 is convex
    assert is_convex([1, 0, 0, 0])
    assert not is_convex([0, 1, 0, 0])


def test_families():
    assert theta_for_family("binomial", 4).values == (1,) * 5
    assert theta_for_family("truncated_poisson", 3).values == (1, F(1, 3), F(1, 6), F(1, 6))
    assert theta_for_family("truncated_geometric", 3).values == (1, F(1, 3), F(1, 3), 1)
    with pytest.raises(ValueError):
        theta_for_family("gaussian", 3)


def test_induced_mu_examples():
    p = 0.3
    mu = induced_mu(ThetaVector.ones(4), 1, p / (1 - p))
    assert mu.as_array() == pytest.approx([binom(4, k) * p**k * (1 - p) ** (4 - k) for k in range(5)])
    assert induced_mu(ThetaVector.ones(3), 1, F(1)).probs == (F(1, 8), F(3, 8), F(3, 8), F(1, 8))
    x = 0.7
    mu = induced_mu(theta_for_family("truncated_poisson", 5).as_float(), 2.0, x)
    w = np.array([x**k / math.factorial(k) for k in range(6)])
    assert mu.as_array() == pytest.approx(w / w.sum())


@pytest.mark.parametrize("k", [1, 2, 3])
def test_induced_mu_ratio_identity(k):
    th = ThetaVector(4, (1.0, 0.5, 0.4, 0.6, 1.5))
    mu = induced_mu(th, 1, 0.8).as_array()
    lhs = mu[k] ** 2 / (mu[k - 1] * mu[k + 1])
    rhs = th[k] ** 2 / (th[k - 1] * th[k + 1]) * ((k + 1) * (4 + 1 - k)) / (k * (4 - k))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_reverse_ultra_log_concave():
    assert is_reverse_ultra_log_concave(induced_mu(ThetaVector.ones(3), 1, 0.4))
    assert is_reverse_ultra_log_concave(induced_mu(theta_for_family("truncated_poisson", 3), 1, F(2)))
    # (0.7, 0.2, 0.05, 0.05)/C(3,k) = (0.7, 0.0667, 0.0167, 0.05): ratios 0.095, 0.25, 3 rise
    assert is_reverse_ultra_log_concave(NeighborDistribution(3, (0.7, 0.2, 0.05, 0.05)))
    assert not is_reverse_ultra_log_concave(NeighborDistribution(3, (0.1, 0.6, 0.2, 0.1)))
    with pytest.raises(ValueError):
        is_reverse_ultra_log_concave(NeighborDistribution(3, (0.5, 0.5, 0.0, 0.0)))


@settings(max_examples=50, deadline=None)
@given(log_convex_thetas, st.floats(0.01, 20))
def test_induced_mu_of_log_convex_is_reverse_ulc(theta, x):
    assert is_reverse_ultra_log_concave(induced_mu(theta, 1, x))


def test_p_scalar_examples():
    assert p_scalar(ThetaVector.ones(3), 2.5) == pytest.approx(2.5)
    assert p_scalar(T1112, 0) == 0
    assert p_scalar(T1112, F(1)) == F(16, 25)


def test_neighbor_distribution_checks():
    with pytest.raises(ValueError):
        NeighborDistribution(3, (0.5, 0.5, 0.5, 0.0))
    a = NeighborDistribution(3, (0.25, 0.25, 0.25, 0.25))
    b = NeighborDistribution(3, (0.5, 0.5, 0.0, 0.0))
    assert a.tv_distance(b) == pytest.approx(0.5)
