"""Exact ground truth: brute-force enumeration and the subtree partition-function DP.

Subtree convention: ``T'_d`` is a node v0 joined to v1, where v1 heads a
(D-1)-ary tree whose leaves sit at depth d below v0.  ``Z_d(i, j)`` sums the
weights of the nodes strictly below v0 with v0 in state i and v1 in state j;
v0's own potential is left to the caller.  Boundary conditions pin the two
deepest layers (d-1 and d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .model import ModelSpec, NeighborDistribution, binom

BOUNDARY_LABELS = ("all_included", "all_excluded", "free")
ENUMERATION_BUDGET = 26


@dataclass(frozen=True)
class FiniteGraph:
    n: int
    edges: tuple
    adjacency: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        adj = [set() for _ in range(self.n)]
        for u, v in self.edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={self.n}")
            if u == v:
                raise ValueError(f"self loop at {u}")
            if v in adj[u]:
                raise ValueError(f"duplicate edge ({u}, {v})")
            adj[u].add(v)
            adj[v].add(u)
        object.__setattr__(self, "edges", tuple((int(u), int(v)) for u, v in self.edges))
        object.__setattr__(self, "adjacency", tuple(tuple(sorted(a)) for a in adj))

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def degrees(self) -> list[int]:
        return [len(a) for a in self.adjacency]

    @classmethod
    def complete(cls, n: int) -> "FiniteGraph":
        return cls(n, tuple((u, v) for u in range(n) for v in range(u + 1, n)))

    @classmethod
    def petersen(cls) -> "FiniteGraph":
        outer = [(i, (i + 1) % 5) for i in range(5)]
        spokes = [(i, i + 5) for i in range(5)]
        inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
        return cls(10, tuple(outer + spokes + inner))

    @classmethod
    def prism(cls) -> "FiniteGraph":
        return cls(6, ((0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (0, 3), (1, 4), (2, 5)))

    def to_edge_list(self) -> str:
        lines = [f"{self.n} {len(self.edges)}"] + [f"{u} {v}" for u, v in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edge_list(cls, text: str) -> "FiniteGraph":
        rows = [ln.split() for ln in text.splitlines() if ln.strip()]
        if not rows or len(rows[0]) != 2:
            raise ValueError("edge list must start with a line 'n m'")
        n, m = int(rows[0][0]), int(rows[0][1])
        body = rows[1:]
        if len(body) != m:
            raise ValueError(f"header announces {m} edges, found {len(body)}")
        return cls(n, tuple((int(a), int(b)) for a, b in body))


@dataclass
class WeightedCount:
    """Result of enumerating all (constrained) independent sets."""

    Z: object
    log_Z: float
    n_sets: int
    included_mass: list
    excluded_mass: list  # excluded_mass[v][k]: v excluded with k included neighbours


@dataclass
class NeighborLaw:
    mu: NeighborDistribution
    p_included: float
    joint: tuple


# ---------------------------------------------------------------------------
# explicit trees


def tree_prime(delta: int, d: int) -> tuple[FiniteGraph, list[int]]:
    """T'_d as an explicit graph; node 0 is v0, node 1 is v1.  Returns (graph, depth of each node)."""
    edges = [(0, 1)]
    depth = [0, 1]
    frontier = [1]
    for layer in range(2, d + 1):
        nxt = []
        for parent in frontier:
            for _ in range(delta - 1):
                c = len(depth)
                depth.append(layer)
                edges.append((parent, c))
                nxt.append(c)
        frontier = nxt
    return FiniteGraph(len(depth), tuple(edges)), depth


def full_tree(delta: int, d: int) -> tuple[FiniteGraph, list[int]]:
    """T_d: root 0 with delta children, every other internal node with delta-1 children."""
    edges = []
    depth = [0]
    frontier = [0]
    for layer in range(1, d + 1):
        nxt = []
        for parent in frontier:
            for _ in range(delta if parent == 0 else delta - 1):
                c = len(depth)
                depth.append(layer)
                edges.append((parent, c))
                nxt.append(c)
        frontier = nxt
    return FiniteGraph(len(depth), tuple(edges)), depth


def boundary_pins(depth: Sequence[int], d: int, boundary: str) -> dict:
    if boundary not in BOUNDARY_LABELS:
        raise ValueError(f"unsupported boundary {boundary!r}; expected one of {BOUNDARY_LABELS}")
    pins = {}
    if boundary == "free":
        return pins
    for v, dv in enumerate(depth):
        if dv == d:
            pins[v] = 1 if boundary == "all_included" else 0
        elif dv == d - 1:
            pins[v] = 0
    return pins


# ---------------------------------------------------------------------------
# enumeration


def _weight_table(model: ModelSpec):
    th = model.theta
    exact = th.is_exact and isinstance(model.lam, (int, Fraction))
    if exact:
        return [Fraction(v) for v in th.values], Fraction(model.lam), True
    return [float(v) for v in th.values], float(model.lam), False


def enumerate_Z(model: ModelSpec, graph: FiniteGraph, fixed: Optional[dict] = None) -> WeightedCount:
    """Sum of w over every independent set agreeing with ``fixed``.

    Exact when theta and lambda are rational.
    """
    fixed = dict(fixed or {})
    n = graph.n
    free = n - len(fixed)
    if free > ENUMERATION_BUDGET:
        raise ValueError(f"{free} free nodes exceed the enumeration budget of {ENUMERATION_BUDGET}")
    theta, lam, exact = _weight_table(model)
    delta = model.delta
    adj = graph.adjacency
    weighted = [len(a) == delta for a in adj]
    zero = Fraction(0) if exact else 0.0
    Z = zero
    inc_mass = [zero] * n
    exc_mass = [[zero] * (delta + 1) for _ in range(n)]
    state = [0] * n
    count = 0

    def finish():
        nonlocal Z, count
        w = Fraction(1) if exact else 1.0
        ks = [0] * n
        for v in range(n):
            k = 0
            for u in adj[v]:
                k += state[u]
            ks[v] = k
            if weighted[v]:
                w = w * (lam if state[v] else theta[k])
        Z += w
        count += 1
        for v in range(n):
            if state[v]:
                inc_mass[v] += w
            elif ks[v] <= delta:
                exc_mass[v][ks[v]] += w

    def rec(i: int):
        if i == n:
            finish()
            return
        pin = fixed.get(i)
        if pin != 1:
            state[i] = 0
            rec(i + 1)
        if pin != 0 and all(state[u] == 0 for u in adj[i] if u < i):
            # later neighbours pinned to 1 would clash
            if not any(fixed.get(u) == 1 for u in adj[i] if u > i):
                state[i] = 1
                rec(i + 1)
                state[i] = 0

    rec(0)
    logz = math.log(Z) if Z > 0 else -math.inf
    return WeightedCount(Z, logz, count, inc_mass, exc_mass)


# ---------------------------------------------------------------------------
# subtree DP


def _level_one(boundary: str, one, zero):
    if boundary == "free":
        return one, one, one
    if boundary == "all_included":
        return zero, one, zero
    return one, zero, one


def dp_partition_exact(model: ModelSpec, d: int, boundary: str, allow_shallow: bool = False) -> tuple:
    """(Z_d(0,0), Z_d(0,1), Z_d(1,0)) in exact arithmetic."""
    _check_depth(d, boundary, allow_shallow)
    th = [Fraction(v) for v in model.theta.values]
    lam = Fraction(model.lam)
    m = model.delta - 1
    z00, z01, z10 = _level_one(boundary, Fraction(1), Fraction(0))
    for level in range(2, d + 1):
        n00 = sum(binom(m, k) * th[k] * z00 ** (m - k) * z01**k for k in range(m + 1))
        n10 = sum(binom(m, k) * th[k + 1] * z00 ** (m - k) * z01**k for k in range(m + 1))
        n01 = lam * z10**m
        if level == 2 and boundary != "free":
            n01 = Fraction(0)
        z00, z01, z10 = n00, n01, n10
    return z00, z01, z10


def _kmul(k: int, logv: float) -> float:
    return 0.0 if k == 0 else k * logv


def dp_partition(model: ModelSpec, d: int, boundary: str, allow_shallow: bool = False) -> tuple:
    """(log Z_d(0,0), log Z_d(0,1), log Z_d(1,0)); -inf marks a zero."""
    _check_depth(d, boundary, allow_shallow)
    lt = np.log(model.theta.as_array())
    llam = math.log(float(model.lam))
    m = model.delta - 1
    lb = [math.log(binom(m, k)) for k in range(m + 1)]
    z00, z01, z10 = _level_one(boundary, 0.0, -math.inf)
    for level in range(2, d + 1):
        base = [lb[k] + _kmul(m - k, z00) + _kmul(k, z01) for k in range(m + 1)]
        n00 = float(logsumexp([base[k] + lt[k] for k in range(m + 1)]))
        n10 = float(logsumexp([base[k] + lt[k + 1] for k in range(m + 1)]))
        n01 = llam + _kmul(m, z10)
        if level == 2 and boundary != "free":
            n01 = -math.inf
        z00, z01, z10 = n00, n01, n10
    return z00, z01, z10


def _check_depth(d: int, boundary: str, allow_shallow: bool):
    if boundary not in BOUNDARY_LABELS:
        raise ValueError(f"unsupported boundary {boundary!r}; expected one of {BOUNDARY_LABELS}")
    if d < (1 if allow_shallow else 3):
        raise ValueError("depth must be at least 3")


def zeta_from_dp(model: ModelSpec, d: int, boundary: str) -> float:
    z00, z01, _ = dp_partition(model, d, boundary)
    return math.exp(z01 - z00)


def conditional_pk_exact(model: ModelSpec, d: int, boundary: str) -> list:
    """Root law (p_0..p_D, p_plus) on T_d from the subtree DP.

    Exact fractions for rational input, floats otherwise.
    """
    D = model.delta
    if model.theta.is_exact and isinstance(model.lam, (int, Fraction)):
        z00, z01, z10 = dp_partition_exact(model, d, boundary)
        th = [Fraction(v) for v in model.theta.values]
        masses = [th[k] * binom(D, k) * z00 ** (D - k) * z01**k for k in range(D + 1)]
        masses.append(Fraction(model.lam) * z10**D)
        total = sum(masses)
        return [v / total for v in masses]
    l00, l01, l10 = dp_partition(model, d, boundary)
    lt = np.log(model.theta.as_array())
    logs = [lt[k] + math.log(binom(D, k)) + _kmul(D - k, l00) + _kmul(k, l01) for k in range(D + 1)]
    logs.append(math.log(float(model.lam)) + _kmul(D, l10))
    logs = np.array(logs)
    return list(np.exp(logs - logsumexp(logs)))


def enumerate_root_law(model: ModelSpec, d: int, boundary: str) -> list:
    """Root law on the explicit T_d by enumeration; same layout as conditional_pk_exact."""
    graph, depth = full_tree(model.delta, d)
    wc = enumerate_Z(model, graph, boundary_pins(depth, d, boundary))
    masses = list(wc.excluded_mass[0]) + [wc.included_mass[0]]
    return [v / wc.Z for v in masses]


def enumerate_subtree(model: ModelSpec, d: int, boundary: str) -> tuple:
    """(Z_d(0,0), Z_d(0,1), Z_d(1,0)) by enumeration of the explicit T'_d."""
    graph, depth = tree_prime(model.delta, d)
    pins = boundary_pins(depth, d, boundary)
    out = []
    for i, j in ((0, 0), (0, 1), (1, 0)):
        out.append(enumerate_Z(model, graph, {**pins, 0: i, 1: j}).Z)
    return tuple(out)


def small_graph_neighbor_law(model: ModelSpec, graph: FiniteGraph) -> NeighborLaw:
    """Exact neighbour law of excluded nodes averaged over degree-D nodes, plus P(included)."""
    wc = enumerate_Z(model, graph)
    D = model.delta
    nodes = [v for v in range(graph.n) if graph.degree(v) == D]
    if not nodes:
        raise ValueError(f"graph has no node of degree {D}")
    joint = [sum(wc.excluded_mass[v][k] for v in nodes) / (len(nodes) * wc.Z) for k in range(D + 1)]
    p_inc = sum(wc.included_mass[v] for v in nodes) / (len(nodes) * wc.Z)
    excluded = sum(joint)
    mu = NeighborDistribution(D, tuple(float(v / excluded) for v in joint))
    return NeighborLaw(mu, float(p_inc), tuple(joint))


def configuration_law(model: ModelSpec, graph: FiniteGraph) -> dict:
    """Exact probability of every independent set, keyed by the tuple of included nodes."""
    if graph.n > ENUMERATION_BUDGET:
        raise ValueError("graph too large for the configuration law")
    theta, lam, _ = _weight_table(model)
    D = model.delta
    adj = graph.adjacency
    out = {}
    for mask in range(1 << graph.n):
        inc = [(mask >> v) & 1 for v in range(graph.n)]
        if any(inc[u] and inc[v] for u, v in graph.edges):
            continue
        w = 1.0
        for v in range(graph.n):
            if len(adj[v]) == D:
                w *= lam if inc[v] else theta[sum(inc[u] for u in adj[v])]
        out[tuple(v for v in range(graph.n) if inc[v])] = w
    total = sum(out.values())
    return {k: v / total for k, v in out.items()}
