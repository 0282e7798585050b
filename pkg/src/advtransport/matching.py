"""Optimal 0/1 transport on empirical distributions via bipartite matching.

With cost 0 on graph edges and 1 elsewhere, a minimum-weight perfect pairing
of the two k-point samples costs exactly ``k - M`` where ``M`` is the size of a
maximum matching, so the minimum adversarial 0-1 loss is ``M / (2k)``.
"""
from __future__ import annotations

import itertools
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .cost import IndistGraph, NeighborhoodSpec, threshold
from .dataset import BinaryTask
from .numerics import ball_norms

_INF = float("inf")


@dataclass(frozen=True)
class MatchingResult:
    row_to_col: tuple[int, ...]  # -1 for unmatched rows
    size: int

    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i, j in enumerate(self.row_to_col) if j >= 0]


@dataclass(frozen=True)
class RobustnessBound:
    matching_size: int
    k: int

    def __post_init__(self):
        if not 0 <= self.matching_size <= self.k or self.k < 1:
            raise ValueError(f"need 0 <= M <= k and k >= 1, got M={self.matching_size}, k={self.k}")

    @property
    def transport_cost_exact(self) -> Fraction:
        return Fraction(self.k - self.matching_size, self.k)

    @property
    def min_loss_exact(self) -> Fraction:
        return Fraction(self.matching_size, 2 * self.k)

    @property
    def transport_cost(self) -> float:
        return float(self.transport_cost_exact)

    @property
    def min_loss(self) -> float:
        return float(self.min_loss_exact)


@dataclass(frozen=True)
class WitnessPotentials:
    """0/1 dual potentials: ``f`` on class_pos samples, ``g`` on class_neg samples.

    ``f[i] = 0`` marks a positive sample the witness classifier gets robustly right,
    ``g[j] = 1`` a negative one.
    """

    f: tuple[int, ...]
    g: tuple[int, ...]

    @property
    def dual_value_exact(self) -> Fraction:
        k = len(self.f)
        return Fraction(sum(self.g) - sum(self.f), k)

    @property
    def dual_value(self) -> float:
        return float(self.dual_value_exact)

    def is_admissible(self, graph: IndistGraph) -> bool:
        """``g[j] - f[i] <= cost(i, j)`` for every pair."""
        cost = ~graph.to_dense()
        f = np.array(self.f)[:, None]
        g = np.array(self.g)[None, :]
        return bool(np.all(g - f <= cost.astype(int)))


def max_matching(graph: IndistGraph) -> MatchingResult:
    """Maximum-cardinality matching by Hopcroft-Karp, scanning vertices in index order."""
    k = graph.k
    adj = graph.adjacency_lists()
    pair_u = [-1] * k
    pair_v = [-1] * k
    dist = [0.0] * k
    size = 0

    while True:
        # BFS layering from free rows
        queue = deque()
        for u in range(k):
            if pair_u[u] == -1:
                dist[u] = 0
                queue.append(u)
            else:
                dist[u] = _INF
        limit = _INF
        while queue:
            u = queue.popleft()
            if dist[u] >= limit:
                continue
            for v in adj[u]:
                w = pair_v[v]
                if w == -1:
                    if limit == _INF:
                        limit = dist[u] + 1
                elif dist[w] == _INF:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        if limit == _INF:
            break

        # vertex-disjoint shortest augmenting paths, iterative DFS
        ptr = [0] * k
        for root in range(k):
            if pair_u[root] != -1:
                continue
            rows = [root]
            cols = []
            while rows:
                u = rows[-1]
                nbrs = adj[u]
                advanced = False
                while ptr[u] < len(nbrs):
                    v = nbrs[ptr[u]]
                    ptr[u] += 1
                    w = pair_v[v]
                    if w == -1:
                        if dist[u] + 1 == limit:
                            cols.append(v)
                            for r, c in zip(rows, cols):
                                pair_u[r] = c
                                pair_v[c] = r
                            size += 1
                            rows = []
                            advanced = True
                            break
                    elif dist[w] == dist[u] + 1:
                        cols.append(v)
                        rows.append(w)
                        advanced = True
                        break
                if not advanced:
                    dist[u] = _INF
                    rows.pop()
                    if cols:
                        cols.pop()

    return MatchingResult(tuple(pair_u), size)


def transport_cost(matching_size: int, k: int) -> RobustnessBound:
    """Optimal coupling cost ``(k - M) / k`` and minimum loss ``M / (2k)``."""
    return RobustnessBound(int(matching_size), int(k))


@lru_cache(maxsize=None)
def _permutations(k: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(k))), dtype=np.int8).reshape(-1, k)


def brute_force_min_weight(graph: IndistGraph, max_k: int = 10) -> Fraction:
    """Minimum average 0/1 cost over all perfect pairings, by enumeration (test oracle)."""
    k = graph.k
    if k > max_k:
        raise ValueError(f"brute force limited to k <= {max_k}, got {k}")
    if k == 0:
        return Fraction(0)
    cost = (~graph.to_dense()).astype(np.int64)
    perms = _permutations(k)
    totals = cost[np.arange(k), perms].sum(axis=1)
    return Fraction(int(totals.min()), k)


def witness_potentials(graph: IndistGraph, matching: MatchingResult) -> WitnessPotentials:
    """Optimal 0/1 potentials from a maximum matching (Konig's construction).

    Alternating search from the unmatched rows reaches a row set ``R`` and a
    column set ``Z``; ``(rows - R) | Z`` is a minimum vertex cover. Setting
    ``f = 1`` off ``R`` and ``g = 1`` off ``Z`` is admissible and attains
    ``(k - M) / k``.
    """
    k = graph.k
    pair_u = list(matching.row_to_col)
    pair_v = [-1] * k
    for i, j in enumerate(pair_u):
        if j >= 0:
            if not graph.has_edge(i, j):
                raise ValueError(f"matched pair ({i}, {j}) is not an edge")
            pair_v[j] = i
    adj = graph.adjacency_lists()
    row_seen = [pair_u[i] == -1 for i in range(k)]
    col_seen = [False] * k
    queue = deque(i for i in range(k) if row_seen[i])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if col_seen[v]:
                continue
            col_seen[v] = True
            w = pair_v[v]
            if w == -1:
                raise ValueError("matching is not maximum (augmenting path found)")
            if not row_seen[w]:
                row_seen[w] = True
                queue.append(w)
    pot = WitnessPotentials(tuple(0 if r else 1 for r in row_seen), tuple(0 if c else 1 for c in col_seen))
    if pot.dual_value_exact != Fraction(k - matching.size, k):
        raise ValueError("matching is not maximum (dual value differs from primal)")
    return pot


def classify_with_witness(potentials: WitnessPotentials, x_new, task: BinaryTask, spec: NeighborhoodSpec) -> int:
    """Nearest-anchor classifier built from the witness potentials.

    Anchors are the positive samples with ``f = 0`` and the negative samples
    with ``g = 1``; every such cross pair is more than ``2 beta`` apart, so a
    point within ``beta`` of an anchor is strictly nearer to its own side.
    Ties go to +1. Demonstration only; the bound does not depend on it.
    """
    x = np.asarray(x_new, dtype=float)
    pos = task.class_pos[np.array(potentials.f) == 0]
    neg = task.class_neg[np.array(potentials.g) == 1]
    d_pos = float(np.min(ball_norms(pos - x, spec.ball))) if len(pos) else _INF
    d_neg = float(np.min(ball_norms(neg - x, spec.ball))) if len(neg) else _INF
    return 1 if d_pos <= d_neg else -1


def robustness_curve(distances, betas, workers: int = 1) -> list[RobustnessBound]:
    """Bound at each budget, thresholding one precomputed distance matrix."""
    k = np.asarray(distances).shape[0]

    def one(beta):
        return transport_cost(max_matching(threshold(distances, beta)).size, k)

    if workers <= 1:
        return [one(b) for b in betas]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, betas))
