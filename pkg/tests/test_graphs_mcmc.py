import numpy as np
import pytest

from mrfphase.fixedpoint import limit_probabilities
from mrfphase.graphs import GenerationError, RegularGraph, gen_random_regular
from mrfphase.mcmc import (
    ChainState,
    estimate_neighbor_law,
    fit_mu_shape,
    flip_ratio,
    heat_bath_sweep,
    run_chain,
    state_law,
)
from mrfphase.model import ModelSpec, NeighborDistribution, ThetaVector
from mrfphase.oracle import FiniteGraph, configuration_law, small_graph_neighbor_law

HC1 = ModelSpec(ThetaVector.ones(3), 1.0)


def _tv(emp: dict, exact: dict) -> float:
    return 0.5 * sum(abs(emp.get(k, 0.0) - exact.get(k, 0.0)) for k in set(emp) | set(exact))


def test_generator_small_cases():
    g = gen_random_regular(4, 3, seed=1)
    assert sorted(map(sorted, g.neighbors.tolist())) == sorted(sorted(set(range(4)) - {v}) for v in range(4))
    g = gen_random_regular(10, 3, seed=2, min_girth=5)
    assert g.girth() >= 5
    with pytest.raises(ValueError):
        gen_random_regular(7, 3)
    with pytest.raises(ValueError):
        gen_random_regular(3, 3)


def test_generator_simple_and_deterministic():
    a = gen_random_regular(200, 4, seed=9)
    b = gen_random_regular(200, 4, seed=9)
    assert np.array_equal(a.neighbors, b.neighbors)
    for v in range(a.n):
        row = a.neighbors[v]
        assert len(set(row.tolist())) == 4 and v not in row
        for u in row:
            assert v in a.neighbors[u]


def test_generator_attempt_cap():
    with pytest.raises(GenerationError):
        gen_random_regular(10, 3, seed=0, min_girth=7, max_attempts=20)


def test_girth_known_graphs():
    assert RegularGraph.from_finite(FiniteGraph.petersen()).girth() == 5
    assert RegularGraph.from_finite(FiniteGraph.prism()).girth() == 3
    assert RegularGraph.from_finite(FiniteGraph.complete(4)).girth() == 3


def test_flip_ratio_examples():
    assert flip_ratio(ThetaVector.ones(3), 2.5, [0, 0, 0]) == 2.5
    assert flip_ratio(ThetaVector.ones(3), 2.5, [1, 2, 0]) == 2.5
    assert flip_ratio(ThetaVector(3, (1, 1, 1, 2)), 1.7, [0, 0, 1]) == pytest.approx(1.7)


def test_sweeps_keep_invariants():
    g = gen_random_regular(60, 3, seed=4)
    m = ModelSpec(ThetaVector(3, (1.0, 0.5, 0.4, 0.9)), 2.0)
    state = ChainState.empty(g.n, seed=5)
    for _ in range(50):
        heat_bath_sweep(m, g, state)
        assert state.is_independent(g)
        assert state.counts_consistent(g)
    assert state.sweeps == 50


def test_reproducible_streams():
    g = gen_random_regular(50, 3, seed=1)
    a = run_chain(HC1, g, 500, 100, seed=8)[0]
    b = run_chain(HC1, g, 500, 100, seed=8)[0]
    c = run_chain(HC1, g, 500, 100, seed=9)[0]
    assert np.array_equal(a, b) and not np.array_equal(a, c)


@pytest.mark.parametrize("graph", [FiniteGraph.complete(4), FiniteGraph.prism()], ids=["K4", "prism"])
def test_stationary_law_small_graphs(graph):
    m = ModelSpec(ThetaVector(3, (1.0, 0.7, 0.8, 1.5)), 1.3)
    _, hist, _ = run_chain(m, RegularGraph.from_finite(graph), 10**6, 0, seed=2, record_states=True)
    assert _tv(state_law(hist, graph.n), configuration_law(m, graph)) < 0.01


def test_k4_neighbor_law_by_sampling():
    k4 = RegularGraph.from_finite(FiniteGraph.complete(4))
    est = estimate_neighbor_law(HC1, k4, 50_000, 1_000, chains=2, seed=3, thin=1)
    exact = small_graph_neighbor_law(HC1, FiniteGraph.complete(4)).mu
    assert est.mu.tv_distance(exact) < 0.01
    assert est.inclusion_density == pytest.approx(0.2, abs=0.01)
    assert np.all(np.isfinite(est.std_errors))


def test_estimate_rejects_bad_budget():
    with pytest.raises(ValueError):
        estimate_neighbor_law(HC1, RegularGraph.from_finite(FiniteGraph.complete(4)), 100, 100)


def test_fit_shape_exact_law():
    m = ModelSpec(ThetaVector(4, (1.0, 0.5, 0.4, 0.6, 1.5)), 0.3)
    mu = limit_probabilities(m).conditional()
    fit = fit_mu_shape(mu, m.theta)
    assert fit.residual < 1e-10
    assert fit.x == pytest.approx(limit_probabilities(m).zeta, rel=1e-10)


def test_fit_shape_negative_control():
    m = ModelSpec(ThetaVector.ones(3), 1.0)
    p = list(limit_probabilities(m).conditional().probs)
    p[0], p[2] = p[2], p[0]
    c, x, residual = fit_mu_shape(NeighborDistribution(3, tuple(p)), m.theta)
    assert residual > 0.1


def test_fit_shape_masks_zeros():
    fit = fit_mu_shape(NeighborDistribution(3, (0.25, 0.75, 0.0, 0.0)), ThetaVector.ones(3))
    assert fit.masked == [2, 3]
    with pytest.raises(ValueError):
        fit_mu_shape(NeighborDistribution(3, (1.0, 0.0, 0.0, 0.0)), ThetaVector.ones(3))
