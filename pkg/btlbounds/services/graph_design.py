"""Comparison-graph topologies and budget allocation.

Budgets are built in two steps: a topology yields an ordered edge list, and
the total number of comparisons is spread over those edges. Node loads
n_i are half row sums of the resulting matrix.
"""

import heapq
from typing import Optional, Sequence

import numpy as np

from btlbounds.core import logger
from btlbounds.core.errors import BudgetTooSmallError, InfeasibleLoadsError, ModelError
from btlbounds.models.models import ComparisonBudget, HomeBudget, Topology, TopologyKind

Edge = tuple[int, int]


def _normalize(i: int, j: int) -> Edge:
    return (i, j) if i < j else (j, i)


def prufer_tree_edges(k: int, rng: np.random.Generator) -> list[Edge]:
    """Uniform random labelled tree on k nodes, decoded from a Prufer sequence."""
    if k == 2:
        return [(0, 1)]
    sequence = rng.integers(0, k, size=k - 2).tolist()
    degree = [1] * k
    for node in sequence:
        degree[node] += 1
    leaves = [node for node in range(k) if degree[node] == 1]
    heapq.heapify(leaves)
    edges = []
    for node in sequence:
        leaf = heapq.heappop(leaves)
        edges.append(_normalize(leaf, node))
        degree[node] -= 1
        if degree[node] == 1:
            heapq.heappush(leaves, node)
    u, v = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append(_normalize(u, v))
    return edges


def depth_first_order(k: int, edges: Sequence[Edge]) -> list[Edge]:
    """Tree edges in depth-first discovery order from the lowest-labelled leaf.

    A path comes out in walking order, so a path-shaped tree receives
    leftover units exactly like the chain does.
    """
    neighbours: list[list[int]] = [[] for _ in range(k)]
    for i, j in edges:
        neighbours[i].append(j)
        neighbours[j].append(i)
    root = min(node for node in range(k) if len(neighbours[node]) == 1)
    ordered, seen, stack = [], {root}, [(root, iter(sorted(neighbours[root])))]
    while stack:
        node, children = stack[-1]
        child = next((c for c in children if c not in seen), None)
        if child is None:
            stack.pop()
            continue
        seen.add(child)
        ordered.append(_normalize(node, child))
        stack.append((child, iter(sorted(neighbours[child]))))
    return ordered


def er_edges(k: int, p: float, rng: np.random.Generator) -> list[Edge]:
    """Each unordered pair present independently with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ModelError(f"edge probability must lie in [0, 1], got {p}")
    rows, cols = np.triu_indices(k, 1)
    present = rng.random(rows.size) < p
    return list(zip(rows[present].tolist(), cols[present].tolist()))


def topology_edges(topo: Topology) -> list[Edge]:
    kind, k = topo.kind, topo.k
    if kind == TopologyKind.COMPLETE:
        return [(i, j) for i in range(k) for j in range(i + 1, k)]
    if kind == TopologyKind.CHAIN:
        return [(i, i + 1) for i in range(k - 1)]
    if kind == TopologyKind.CYCLE:
        if k < 3:
            raise ModelError(f"a cycle needs k >= 3, got k={k}")
        return [_normalize(i, (i + 1) % k) for i in range(k)]
    if kind == TopologyKind.STAR:
        return [(0, j) for j in range(1, k)]
    if kind == TopologyKind.RANDOM_TREE:
        return depth_first_order(k, prufer_tree_edges(k, np.random.default_rng(topo.seed)))
    if kind == TopologyKind.ERDOS_RENYI:
        return er_edges(k, topo.p, np.random.default_rng(topo.seed))
    raise ModelError(f"unknown topology {kind}")


def distribute_over_edges(k: int, edges: Sequence[Edge], total_n: int) -> ComparisonBudget:
    """Equal split of total_n over edges; leftover units go one each to the lowest-index edges."""
    if total_n < len(edges):
        raise BudgetTooSmallError(
            f"total_n={total_n} cannot give each of {len(edges)} edges at least one comparison"
        )
    n = np.zeros((k, k), dtype=np.int64)
    if not edges:
        return ComparisonBudget(n)
    base, remainder = divmod(int(total_n), len(edges))
    u = np.array([e[0] for e in edges])
    v = np.array([e[1] for e in edges])
    weights = np.full(len(edges), base, dtype=np.int64)
    weights[:remainder] += 1
    n[u, v] = weights
    n[v, u] = weights
    return ComparisonBudget(n)
    base, remainder = divmod(int(total_n), len(edges))
    u = np.array([e[0] for e in edges])
    v = np.array([e[1] for e in edges])
    weights = np.full(len(edges), base, dtype=np.int64)
    loads = np.zeros(k, dtype=np.int64)
    np.add.at(loads, u, weights)
    np.add.at(loads, v, weights)
    open_edges = np.ones(len(edges), dtype=bool)
    for _ in range(remainder):
        pressure = np.where(open_edges, loads[u] + loads[v], np.iinfo(np.int64).max)
        e = int(np.argmin(pressure))
        weights[e] += 1
        loads[u[e]] += 1
        loads[v[e]] += 1
        open_edges[e] = False
    n[u, v] = weights
    n[v, u] = weights
    return ComparisonBudget(n)


def build_budget(topo: Topology, total_n: int) -> ComparisonBudget:
    edges = topology_edges(topo)
    if topo.kind == TopologyKind.STAR:
        # unit spokes, all residual mass on the edge between the hub and item 1
        if total_n < len(edges):
            raise BudgetTooSmallError(
                f"star on k={topo.k} needs total_n >= {len(edges)}, got {total_n}"
            )
        weights = {edge: 1 for edge in edges}
        weights[(0, 1)] = total_n - (topo.k - 2)
        return ComparisonBudget.from_edges(topo.k, weights)
    if topo.kind == TopologyKind.ERDOS_RENYI and not edges:
        logger.debug(f"empty random graph: k={topo.k} p={topo.p} seed={topo.seed}")
        return ComparisonBudget.zeros(topo.k)
    return distribute_over_edges(topo.k, edges, total_n)


def water_fill(a: Sequence[float], total_n: int) -> np.ndarray:
    """Integer node loads maximising sum_i ln(a_i + n_i) with sum_i n_i = total_n.

    The continuous solution n_i = (mu - a_i)^+ is found by sort-and-scan,
    rounded by largest remainder (ties to the lowest index) and then
    polished by unit transfers until no transfer improves the objective.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ModelError("water_fill needs a nonempty vector of shapes")
    if total_n < 0:
        raise ModelError(f"total_n must be >= 0, got {total_n}")
    k = a.size
    if total_n == 0:
        return np.zeros(k, dtype=np.int64)

    order = np.argsort(a, kind="stable")
    sorted_a = a[order]
    prefix = np.cumsum(sorted_a)
    level = 0.0
    for m in range(k, 0, -1):
        level = (total_n + prefix[m - 1]) / m
        if level > sorted_a[m - 1]:
            break
    continuous = np.maximum(level - a, 0.0)

    loads = np.floor(continuous).astype(np.int64)
    short = int(total_n - loads.sum())
    fractions = continuous - loads
    ranked = sorted(range(k), key=lambda i: (-fractions[i], i))
    for i in ranked[:short]:
        loads[i] += 1

    with np.errstate(divide="ignore", invalid="ignore"):
        while True:
            level_now = a + loads
            gain = np.log1p(1.0 / level_now)
            loss = np.where(loads > 0, -np.log1p(-1.0 / level_now), np.inf)
            j = int(np.argmax(gain))
            i = int(np.argmin(loss))
            if i == j or not gain[j] > loss[i] + 1e-15:
                break
            loads[i] -= 1
            loads[j] += 1
    return loads


def realize_node_loads(loads: Sequence[float]) -> ComparisonBudget:
    """Budget whose half row sums equal the given node loads.

    Residual degrees 2 n_i are paired greedily: the two largest residuals
    are joined by one comparison (ties to the lowest index) until none remain.
    """
    degrees = 2.0 * np.asarray(loads, dtype=float)
    if degrees.ndim != 1 or degrees.size < 2:
        raise ModelError("node loads must be a vector over k >= 2 items")
    if np.any(degrees < 0) or np.any(degrees != np.round(degrees)):
        raise InfeasibleLoadsError("node loads must be nonnegative multiples of 1/2")
    degrees = degrees.astype(np.int64)
    total = int(degrees.sum())
    if total % 2:
        raise InfeasibleLoadsError("node loads must sum to an integer")
    if degrees.max() > total - degrees.max():
        raise InfeasibleLoadsError(
            f"load of item {int(np.argmax(degrees))} exceeds the loads of all other items combined"
        )

    k = degrees.size
    n = np.zeros((k, k), dtype=np.int64)
    heap = [(-int(d), i) for i, d in enumerate(degrees) if d > 0]
    heapq.heapify(heap)
    while heap:
        d_i, i = heapq.heappop(heap)
        d_j, j = heapq.heappop(heap)
        n[i, j] += 1
        n[j, i] += 1
        if d_i + 1 < 0:
            heapq.heappush(heap, (d_i + 1, i))
        if d_j + 1 < 0:
            heapq.heappush(heap, (d_j + 1, j))
    return ComparisonBudget(n)


def er_graph_budget(
    k: int, p: float, per_edge: int, rng: np.random.Generator
) -> ComparisonBudget:
    if per_edge < 1:
        raise ModelError(f"per_edge must be >= 1, got {per_edge}")
    return ComparisonBudget.from_edges(k, {edge: per_edge for edge in er_edges(k, p, rng)})


def split_home_budget(budget: ComparisonBudget, alpha: float) -> HomeBudget:
    """n^h_ij = round(alpha * n_ij), n^h_ji = n_ij - n^h_ij for i < j."""
    if not 0.0 <= alpha <= 1.0:
        raise ModelError(f"alpha must lie in [0, 1], got {alpha}")
    iu = np.triu_indices(budget.k, 1)
    home = np.rint(alpha * budget.n[iu]).astype(np.int64)
    nh = np.zeros_like(budget.n)
    nh[iu] = home
    nh.T[iu] = budget.n[iu] - home
    return HomeBudget(nh)


def normalized_edge_probability(p: float, k: int) -> float:
    """p divided by the connectivity threshold ln(k) / k."""
    return float(p * k / np.log(k))


def edge_probability(normalized_p: float, k: int) -> float:
    return float(min(1.0, normalized_p * np.log(k) / k))


def ordered_topologies(k: int, seed: Optional[int] = None) -> list[Topology]:
    """Complete, chain, random tree and star on k items, in bound order."""
    return [
        Topology(kind=TopologyKind.COMPLETE, k=k),
        Topology(kind=TopologyKind.CHAIN, k=k),
        Topology(kind=TopologyKind.RANDOM_TREE, k=k, seed=seed),
        Topology(kind=TopologyKind.STAR, k=k),
    ]
