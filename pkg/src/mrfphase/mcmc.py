"""Single-site heat-bath dynamics for the second-order field on regular graphs."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import numpy as np
from numba import njit

from .graphs import RegularGraph
from .model import ModelSpec, NeighborDistribution, ThetaVector, binom

THIN = 10
DEFAULT_BURN_IN = 10**5
CHECK_EVERY = 10**4


@dataclass
class ChainState:
    occupancy: np.ndarray  # int8 per node
    counts: np.ndarray  # included neighbours per node
    seed: int
    sweeps: int = 0

    @classmethod
    def empty(cls, n: int, seed: int) -> "ChainState":
        return cls(np.zeros(n, dtype=np.int8), np.zeros(n, dtype=np.int64), seed)

    def is_independent(self, graph: RegularGraph) -> bool:
        occ = self.occupancy.astype(bool)
        return not np.any(occ[:, None] & occ[graph.neighbors])

    def counts_consistent(self, graph: RegularGraph) -> bool:
        return bool(np.array_equal(self.counts, self.occupancy[graph.neighbors].sum(axis=1)))


@dataclass
class NeighborEstimate:
    mu: NeighborDistribution
    inclusion_density: float
    std_errors: np.ndarray
    samples: int
    chain_laws: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "mu": list(self.mu.probs),
            "inclusion_density": self.inclusion_density,
            "std_errors": self.std_errors.tolist(),
            "samples": self.samples,
            "chain_laws": [list(map(float, c)) for c in self.chain_laws],
        }


def flip_ratio(theta: ThetaVector, lam: float, neighbor_counts) -> float:
    """w(I + v)/w(I - v) given the included-neighbour counts of v's neighbours (v not counted)."""
    r = float(lam) / float(theta[0])
    for m in neighbor_counts:
        r *= float(theta[m + 1]) / float(theta[m])
    return r


@njit(cache=True, nogil=True)
def _sweeps(nbrs, ratios, base, occ, cnt, n_sweeps, burn_in, thin, seed, record_states, check_every):
    """Run n_sweeps heat-bath sweeps.

    Returns (samples, state_hist, error) where samples[s] holds the counts of
    excluded nodes with k included neighbours followed by the number of
    included nodes, recorded every ``thin`` sweeps after ``burn_in``.
    """
    np.random.seed(seed)
    n, deg = nbrs.shape
    n_samples = 0
    if n_sweeps > burn_in:
        n_samples = (n_sweeps - burn_in) // thin
    samples = np.zeros((n_samples, deg + 2), dtype=np.int64)
    hist = np.zeros((1 << n) if record_states else 1, dtype=np.int64)
    error = 0
    s_idx = 0
    for sweep in range(1, n_sweeps + 1):
        order = np.random.permutation(n)
        for t in range(n):
            v = order[t]
            if cnt[v] > 0:
                continue
            r = base
            shift = occ[v]
            for j in range(deg):
                r *= ratios[cnt[nbrs[v, j]] - shift]
            new = 1 if np.random.random() * (1.0 + r) < r else 0
            if new != occ[v]:
                occ[v] = new
                step = 1 if new == 1 else -1
                for j in range(deg):
                    cnt[nbrs[v, j]] += step
        if record_states:
            code = 0
            for v in range(n):
                if occ[v]:
                    code |= 1 << v
            hist[code] += 1
        if check_every > 0 and sweep % check_every == 0:
            for v in range(n):
                c = 0
                for j in range(deg):
                    c += occ[nbrs[v, j]]
                if c != cnt[v] or (occ[v] == 1 and c > 0):
                    error = sweep
        if sweep > burn_in and (sweep - burn_in) % thin == 0 and s_idx < n_samples:
            for v in range(n):
                if occ[v]:
                    samples[s_idx, deg + 1] += 1
                else:
                    samples[s_idx, cnt[v]] += 1
            s_idx += 1
    return samples, hist, error


def _ratio_table(theta: ThetaVector) -> np.ndarray:
    th = theta.as_array()
    return th[1:] / th[:-1]


def heat_bath_sweep(model: ModelSpec, graph: RegularGraph, state: ChainState, sweeps: int = 1) -> ChainState:
    """Advance ``state`` in place by ``sweeps`` random-order heat-bath sweeps."""
    if graph.delta != model.delta:
        raise ValueError("graph degree and model delta differ")
    seed = (state.seed * 1_000_003 + state.sweeps) % (2**31)
    _, _, error = _sweeps(
        graph.neighbors, _ratio_table(model.theta), float(model.lam) / float(model.theta[0]),
        state.occupancy, state.counts, sweeps, sweeps, THIN, seed, False, 1,
    )
    if error:
        raise RuntimeError(f"chain state corrupted at sweep {error}")
    state.sweeps += sweeps
    return state


def run_chain(
    model: ModelSpec,
    graph: RegularGraph,
    sweeps: int,
    burn_in: int,
    seed: int,
    thin: int = THIN,
    record_states: bool = False,
    check_every: int = CHECK_EVERY,
):
    """One chain from the empty set; returns (samples, state histogram, final state)."""
    if graph.delta != model.delta:
        raise ValueError("graph degree and model delta differ")
    if record_states and graph.n > 20:
        raise ValueError("state histograms need n <= 20")
    state = ChainState.empty(graph.n, seed)
    samples, hist, error = _sweeps(
        graph.neighbors, _ratio_table(model.theta), float(model.lam) / float(model.theta[0]),
        state.occupancy, state.counts, sweeps, burn_in, thin, seed, record_states, check_every,
    )
    if error:
        raise RuntimeError(f"chain state corrupted at sweep {error}")
    state.sweeps = sweeps
    return samples, hist, state


def chain_seeds(seed: int, chains: int) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(s.generate_state(1)[0] % (2**31 - 1)) for s in ss.spawn(chains)]


def _batch_errors(chain_samples: list, delta: int, batches: int = 20) -> np.ndarray:
    """Batch-means standard errors of the pooled neighbour law."""
    means = []
    for s in chain_samples:
        nb = min(batches, len(s))
        for part in np.array_split(s, nb):
            exc = part[:, : delta + 1].sum(axis=0)
            if exc.sum() > 0:
                means.append(exc / exc.sum())
    means = np.array(means)
    if len(means) < 2:
        return np.full(delta + 1, np.nan)
    return means.std(axis=0, ddof=1) / np.sqrt(len(means))


def estimate_neighbor_law(
    model: ModelSpec,
    graph: RegularGraph,
    sweeps: int,
    burn_in: int = DEFAULT_BURN_IN,
    chains: int = 4,
    seed: int = 0,
    jobs: int = 1,
    thin: int = THIN,
) -> NeighborEstimate:
    """Pooled empirical law of included neighbours over excluded nodes."""
    if sweeps <= burn_in:
        raise ValueError("sweeps must exceed burn_in")
    seeds = chain_seeds(seed, chains)

    def one(s):
        return run_chain(model, graph, sweeps, burn_in, s, thin=thin)[0]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_chain = list(pool.map(one, seeds))
    else:
        per_chain = [one(s) for s in seeds]
    D = model.delta
    pooled = np.concatenate(per_chain)
    exc = pooled[:, : D + 1].sum(axis=0).astype(float)
    density = float(pooled[:, D + 1].sum()) / (len(pooled) * graph.n)
    chain_laws = [c[:, : D + 1].sum(axis=0) / c[:, : D + 1].sum() for c in per_chain]
    return NeighborEstimate(
        NeighborDistribution.normalized(D, exc.tolist()),
        density,
        _batch_errors(per_chain, D),
        len(pooled),
        chain_laws,
    )


@dataclass
class ShapeFit:
    c: float
    x: float
    residual: float
    masked: list

    def __iter__(self):
        return iter((self.c, self.x, self.residual))


def fit_mu_shape(empirical: NeighborDistribution, theta: ThetaVector) -> ShapeFit:
    """Weighted least squares of log mu(k) - log(theta_k C(D,k)) against a + k log x.

    Weights are the empirical masses, so rarely visited counts do not dominate;
    the residual is the weighted root mean square.  Zero entries are masked.
    """
    D = empirical.delta
    mu = empirical.as_array()
    k = np.arange(D + 1)
    mask = mu > 0
    masked = [int(i) for i in k[~mask]]
    if mask.sum() < 2:
        raise ValueError("need at least two positive entries to fit")
    base = np.array([float(theta[i]) * binom(D, i) for i in range(D + 1)])
    y = np.log(mu[mask]) - np.log(base[mask])
    w = mu[mask] / mu[mask].sum()
    A = np.stack([np.ones(mask.sum()), k[mask]], axis=1)
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(A * sw[:, None], y * sw, rcond=None)
    resid = y - A @ coef
    return ShapeFit(float(np.exp(coef[0])), float(np.exp(coef[1])), float(np.sqrt(np.sum(w * resid**2))), masked)


def state_law(hist: np.ndarray, n: int) -> dict:
    """Empirical configuration law keyed by the tuple of included nodes."""
    total = hist.sum()
    out = {}
    for code in np.nonzero(hist)[0]:
        out[tuple(v for v in range(n) if (int(code) >> v) & 1)] = hist[code] / total
    return out
