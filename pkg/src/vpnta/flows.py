"""Single-commodity primitives: maximum flow and widest (max-bottleneck) paths."""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .network import CoreNetwork, NetworkError, resolve_capacities

# Residual capacities at or below this are treated as exhausted.
FLOW_TOL = 1e-12


@dataclass(frozen=True)
class MaxFlowResult:
    value: float
    edge_flows: np.ndarray

    def as_dict(self, network: CoreNetwork) -> dict[tuple[int, int], float]:
        return {(int(network.tails[e]), int(network.heads[e])): float(f)
                for e, f in enumerate(self.edge_flows) if f > 0}


@dataclass(frozen=True)
class WidestPathResult:
    path: tuple[int, ...]
    bottleneck: float

    @property
    def reachable(self) -> bool:
        return bool(self.path)


NO_PATH = WidestPathResult((), 0.0)


def _check_nodes(network: CoreNetwork, *nodes: int) -> None:
    for v in nodes:
        if not 0 <= v < network.node_count:
            raise NetworkError(f"unknown node {v}")


def max_flow(network: CoreNetwork, s: int, d: int, capacity_view="total") -> MaxFlowResult:
    """Edmonds-Karp maximum flow from ``s`` to ``d``.

    Breadth-first augmenting paths; at every node forward arcs are scanned
    before reverse arcs, each in edge-index order, so results are
    reproducible.
    """
    _check_nodes(network, s, d)
    if s == d:
        raise NetworkError("max_flow needs distinct endpoints")
    cap = resolve_capacities(network, capacity_view)
    return _edmonds_karp(network, cap, s, d)


def _edmonds_karp(network: CoreNetwork, cap: np.ndarray, s: int, d: int) -> MaxFlowResult:
    n = network.node_count
    heads, tails = network.heads, network.tails
    out = [sorted(network.out_edges(u)) for u in range(n)]
    inc = [sorted(network.in_edges(u)) for u in range(n)]
    flow = [0.0] * len(cap)
    capl = cap.tolist()
    total = 0.0
    while True:
        # parent[v] = (edge, +1 forward | -1 reverse)
        parent: list[tuple[int, int] | None] = [None] * n
        seen = [False] * n
        seen[s] = True
        queue = deque([s])
        while queue and not seen[d]:
            u = queue.popleft()
            for e in out[u]:
                v = int(heads[e])
                if not seen[v] and capl[e] - flow[e] > FLOW_TOL:
                    seen[v] = True
                    parent[v] = (e, 1)
                    queue.append(v)
            for e in inc[u]:
                v = int(tails[e])
                if not seen[v] and flow[e] > FLOW_TOL:
                    seen[v] = True
                    parent[v] = (e, -1)
                    queue.append(v)
        if not seen[d]:
            break
        push = float("inf")
        v = d
        while v != s:
            e, sign = parent[v]  # type: ignore[misc]
            push = min(push, capl[e] - flow[e] if sign > 0 else flow[e])
            v = int(tails[e]) if sign > 0 else int(heads[e])
        v = d
        while v != s:
            e, sign = parent[v]  # type: ignore[misc]
            flow[e] += sign * push
            v = int(tails[e]) if sign > 0 else int(heads[e])
        total += push
    return MaxFlowResult(total, np.asarray(flow, dtype=float))


def _bottlenecks(network: CoreNetwork, cap: list[float], root: int) -> tuple[list[float], list[int]]:
    """Best bottleneck from ``root`` to every node plus the predecessor edge."""
    n = network.node_count
    best = [0.0] * n
    pred = [-1] * n
    best[root] = float("inf")
    done = [False] * n
    heap = [(-best[root], root)]
    heads = network.heads
    while heap:
        neg, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        width = -neg
        for e in network.out_edges(u):
            c = cap[e]
            if c <= FLOW_TOL:
                continue
            v = int(heads[e])
            w = width if width < c else c
            if w > best[v] and not done[v]:
                best[v] = w
                pred[v] = e
                heapq.heappush(heap, (-w, v))
    return best, pred


def widest_path(network: CoreNetwork, s: int, d: int, capacity_view="residual") -> WidestPathResult:
    """Maximum-bottleneck path from ``s`` to ``d``.

    Among paths with the maximal bottleneck the one with fewest hops wins,
    then the lexicographically smallest node sequence.  Unreachable ``d``
    gives an empty path with bottleneck 0.
    """
    _check_nodes(network, s, d)
    if s == d:
        raise NetworkError("widest_path needs distinct endpoints")
    cap = resolve_capacities(network, capacity_view).tolist()
    best, _ = _bottlenecks(network, cap, s)
    width = best[d]
    if width <= FLOW_TOL:
        return NO_PATH
    return WidestPathResult(_fewest_hops_path(network, cap, s, d, width), width)


def _fewest_hops_path(network: CoreNetwork, cap: list[float], s: int, d: int,
                      width: float) -> tuple[int, ...]:
    # hop distance to d inside the subgraph of edges at least `width` wide
    hops = {d: 0}
    queue = deque([d])
    while queue:
        v = queue.popleft()
        for e in network.in_edges(v):
            u = int(network.tails[e])
            if u not in hops and cap[e] >= width:
                hops[u] = hops[v] + 1
                queue.append(u)
    path = [s]
    u = s
    while u != d:
        # out_edges are sorted by head, so the first match is the smallest node
        for e in network.out_edges(u):
            v = int(network.heads[e])
            if cap[e] >= width and hops.get(v, -1) == hops[u] - 1:
                path.append(v)
                u = v
                break
    return tuple(path)


def max_capacity_tree(network: CoreNetwork, root: int, targets: Iterable[int],
                      capacity_view="residual") -> dict[int, WidestPathResult]:
    """Widest paths from ``root`` to every target from one bottleneck tree.

    The root itself is never reported.  Unreachable targets map to an empty
    path with bottleneck 0.
    """
    targets = [int(t) for t in targets]
    _check_nodes(network, root, *targets)
    cap = resolve_capacities(network, capacity_view).tolist()
    best, pred = _bottlenecks(network, cap, root)
    out: dict[int, WidestPathResult] = {}
    for t in sorted(set(targets)):
        if t == root:
            continue
        if best[t] <= FLOW_TOL:
            out[t] = NO_PATH
            continue
        path = [t]
        v = t
        while v != root:
            v = int(network.tails[pred[v]])
            path.append(v)
        out[t] = WidestPathResult(tuple(reversed(path)), best[t])
    return out
