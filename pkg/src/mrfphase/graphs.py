"""Random regular graphs with an optional girth floor."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .oracle import FiniteGraph

MAX_ATTEMPTS = 10**4


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class RegularGraph:
    n: int
    delta: int
    neighbors: np.ndarray  # shape (n, delta), int64
    girth_lower_bound: Optional[int] = None

    def __post_init__(self):
        nb = np.asarray(self.neighbors, dtype=np.int64)
        if nb.shape != (self.n, self.delta):
            raise ValueError(f"neighbor array must have shape ({self.n}, {self.delta})")
        object.__setattr__(self, "neighbors", nb)

    def edges(self) -> list[tuple[int, int]]:
        return [(u, int(v)) for u in range(self.n) for v in self.neighbors[u] if u < v]

    def to_finite(self) -> FiniteGraph:
        return FiniteGraph(self.n, tuple(self.edges()))

    @classmethod
    def from_finite(cls, graph: FiniteGraph) -> "RegularGraph":
        degs = set(graph.degrees())
        if len(degs) != 1:
            raise ValueError("graph is not regular")
        delta = degs.pop()
        return cls(graph.n, delta, np.array([list(a) for a in graph.adjacency]))

    def girth(self, cap: Optional[int] = None) -> int:
        """Exact girth, or ``cap`` when no cycle shorter than cap exists."""
        return int(_girth(self.neighbors, cap if cap is not None else self.n + 1))


@njit(cache=True)
def _girth(nbrs, cap, stop_early=False):
    n, deg = nbrs.shape
    dist = -np.ones(n, dtype=np.int64)
    parent = -np.ones(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    best = cap
    max_depth = cap // 2 + 1
    for root in range(n):
        head = 0
        tail = 1
        queue[0] = root
        dist[root] = 0
        while head < tail:
            u = queue[head]
            head += 1
            if dist[u] >= max_depth:
                continue
            for t in range(deg):
                w = nbrs[u, t]
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    parent[w] = u
                    queue[tail] = w
                    tail += 1
                elif w != parent[u]:
                    length = dist[u] + dist[w] + 1
                    if length < best:
                        best = length
        for i in range(tail):
            dist[queue[i]] = -1
            parent[queue[i]] = -1
        if best <= 2 or (stop_early and best < cap):
            break
    return best


def _pairing(n: int, delta: int, rng: np.random.Generator) -> Optional[np.ndarray]:
    """Uniform stub pairing; stubs of loops and repeated edges are re-paired.

    When a round leaves clashes, two accepted edges are released into the
    pool so the leftovers have somewhere to go.  Returns None if the pool
    never empties, which triggers a fresh attempt.
    """
    stubs = np.repeat(np.arange(n), delta)
    rng.shuffle(stubs)
    u, v = stubs[0::2], stubs[1::2]
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    key = lo * n + hi
    _, first = np.unique(key, return_index=True)
    good = np.zeros(len(key), dtype=bool)
    good[first] = True
    good &= lo != hi
    edges = set(key[good].tolist())
    pool = list(lo[~good]) + list(hi[~good])
    for _ in range(100):
        if not pool:
            break
        rng.shuffle(pool)
        rest = []
        for a, b in zip(pool[0::2], pool[1::2]):
            a, b = min(a, b), max(a, b)
            k = a * n + b
            if a != b and k not in edges:
                edges.add(k)
            else:
                rest += [a, b]
        if rest and edges:
            # free up a couple of accepted edges so the leftovers can move
            for k in rng.choice(np.fromiter(edges, dtype=np.int64), size=min(2, len(edges)), replace=False):
                edges.discard(int(k))
                rest += [int(k) // n, int(k) % n]
        pool = rest
    if pool:
        return None
    keys = np.fromiter(edges, dtype=np.int64)
    return np.stack([keys // n, keys % n], axis=1)


def _neighbor_array(n: int, delta: int, edges: np.ndarray) -> np.ndarray:
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.lexsort((dst, src))
    return dst[order].reshape(n, delta).astype(np.int64)


def gen_random_regular(
    n: int,
    delta: int,
    seed: int = 0,
    min_girth: Optional[int] = None,
    max_attempts: int = MAX_ATTEMPTS,
) -> RegularGraph:
    """Simple delta-regular graph from the configuration model, deterministic in ``seed``."""
    if (n * delta) % 2:
        raise ValueError("n * delta must be even")
    if n < delta + 1:
        raise ValueError("need n >= delta + 1")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        edges = _pairing(n, delta, rng)
        if edges is None:
            continue
        nb = _neighbor_array(n, delta, edges)
        if min_girth is not None:
            g = int(_girth(nb, min_girth, True))
            if g < min_girth:
                continue
            return RegularGraph(n, delta, nb, girth_lower_bound=min_girth)
        return RegularGraph(n, delta, nb)
    raise GenerationError(f"no suitable graph after {max_attempts} attempts")


def read_edge_list(path: str) -> FiniteGraph:
    with open(path) as fh:
        return FiniteGraph.from_edge_list(fh.read())
