"""Length-function approximation schemes for multicommodity flow.

Both routines keep exponential edge lengths, push flow along shortest paths
under those lengths, and finally scale the raw flow by its actual maximum
congestion.  That scaling is never worse than the textbook logarithmic factor
and always restores feasibility.  Along the way they track the dual bound
``D(l) / alpha(l)``, so the returned value is certified: ``value >= (1 - eps)
* bound`` is checked, and the run is repeated with a finer step if it fails.

Commodities sharing a source are routed off one shortest-path tree (the
grouping trick for sparse graphs with many commodities).
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .network import CoreNetwork

USABLE_TOL = 1e-12
INF = float("inf")


@dataclass
class ApproxResult:
    flows: np.ndarray  # (K, m) feasible per-commodity edge flows
    value: float  # total flow (mmcf) or throughput beta (mconf)
    dual_bound: float
    certified: bool
    step: float  # length-update step actually used


class _Graph:
    """Adjacency restricted to edges with positive capacity."""

    def __init__(self, network: CoreNetwork, caps: np.ndarray):
        self.n = network.node_count
        self.m = network.edge_count
        self.caps = caps.tolist()
        self.tails = network.tails.tolist()
        self.heads = network.heads.tolist()
        self.adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for u in range(self.n):
            for e in network.out_edges(u):
                if caps[e] > USABLE_TOL:
                    self.adj[u].append((e, self.heads[e]))

    def dijkstra(self, length: list[float], src: int) -> tuple[list[float], list[int]]:
        dist = [INF] * self.n
        pred = [-1] * self.n
        dist[src] = 0.0
        heap = [(0.0, src)]
        adj = self.adj
        while heap:
            du, u = heapq.heappop(heap)
            if du > dist[u]:
                continue
            for e, v in adj[u]:
                nd = du + length[e]
                if nd < dist[v]:
                    dist[v] = nd
                    pred[v] = e
                    heapq.heappush(heap, (nd, v))
        return dist, pred

    def trace(self, pred: list[int], src: int, dst: int) -> list[int]:
        path = []
        v = dst
        while v != src:
            e = pred[v]
            path.append(e)
            v = self.tails[e]
        path.reverse()
        return path


def _group_by_source(pairs: list[tuple[int, int]], active: list[int]) -> dict[int, list[int]]:
    groups: dict[int, list[int]] = {}
    for k in active:
        groups.setdefault(pairs[k][0], []).append(k)
    return dict(sorted(groups.items()))


def max_multiflow(network: CoreNetwork, caps: np.ndarray, pairs: list[tuple[int, int]],
                  eps: float, upper: np.ndarray | None = None,
                  max_refinements: int = 6) -> ApproxResult:
    """(1 - eps)-approximate maximum multicommodity flow.

    ``upper`` optionally caps each commodity's total flow; the cap behaves as
    an extra private edge in front of the commodity's source.
    """
    if not 0 < eps < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    graph = _Graph(network, np.asarray(caps, dtype=float))
    K = len(pairs)
    upper = np.full(K, INF) if upper is None else np.asarray(upper, dtype=float)
    step = eps
    best: ApproxResult | None = None
    for _ in range(max_refinements):
        res = _gk_multiflow(graph, pairs, upper, step)
        if best is None or res.value > best.value:
            best = res
        if res.value >= (1.0 - eps) * min(res.dual_bound, best.dual_bound) - 1e-12:
            best.certified = True
            best.dual_bound = min(res.dual_bound, best.dual_bound)
            return best
        step /= 2.0
    assert best is not None
    return best


def _gk_multiflow(graph: _Graph, pairs, upper: np.ndarray, step: float) -> ApproxResult:
    K, m = len(pairs), graph.m
    caps = graph.caps
    capped = [bool(np.isfinite(u)) for u in upper]
    active = [k for k in range(K) if upper[k] > USABLE_TOL]
    hops = graph.n - 1 + (1 if any(capped) else 0)
    delta = (1 + step) / ((1 + step) * max(hops, 1)) ** (1 / step)
    length = [delta / c if c > USABLE_TOL else INF for c in caps]
    vlen = [delta / upper[k] if capped[k] and upper[k] > USABLE_TOL else 0.0 for k in range(K)]
    flows = np.zeros((K, m))
    load = [0.0] * m
    vflow = [0.0] * K
    groups = _group_by_source(pairs, active)

    def dual() -> float:
        denom = INF
        for s, ks in groups.items():
            dist, _ = graph.dijkstra(length, s)
            for k in ks:
                denom = min(denom, dist[pairs[k][1]] + vlen[k])
        if not math.isfinite(denom) or denom <= 0:
            return 0.0 if not math.isfinite(denom) else INF
        num = sum(c * l for c, l in zip(caps, length) if c > USABLE_TOL)
        num += sum(upper[k] * vlen[k] for k in range(K) if capped[k] and upper[k] > USABLE_TOL)
        return num / denom

    bound = dual()
    if bound == 0.0:
        return ApproxResult(flows, 0.0, 0.0, True, step)
    threshold = delta  # every path is at least delta long at the start
    while threshold < 1.0:
        limit = min(1.0, threshold * (1 + step))
        for s, ks in groups.items():
            while True:
                dist, pred = graph.dijkstra(length, s)
                pick = next((k for k in ks if dist[pairs[k][1]] + vlen[k] < limit), None)
                if pick is None:
                    break
                path = graph.trace(pred, s, pairs[pick][1])
                amount = min(caps[e] for e in path)
                if capped[pick]:
                    amount = min(amount, upper[pick])
                    vflow[pick] += amount
                    vlen[pick] *= 1 + step * amount / upper[pick]
                for e in path:
                    flows[pick, e] += amount
                    load[e] += amount
                    length[e] *= 1 + step * amount / caps[e]
        threshold *= 1 + step
        bound = min(bound, dual())

    congestion = max([load[e] / caps[e] for e in range(m) if load[e] > 0]
                     + [vflow[k] / upper[k] for k in range(K) if capped[k] and vflow[k] > 0]
                     + [0.0])
    if congestion > 0:
        flows /= congestion
    return ApproxResult(flows, _net_total(flows, graph, pairs), bound, False, step)


def _net_total(flows: np.ndarray, graph: _Graph, pairs) -> float:
    tails = np.asarray(graph.tails)
    total = 0.0
    for k, (s, _) in enumerate(pairs):
        total += float(flows[k, tails == s].sum())
    return total


def _min_hop_congestion(graph: _Graph, pairs, demands: np.ndarray) -> float:
    """Congestion of routing every demand on its fewest-hop path."""
    load = [0.0] * graph.m
    unit = [1.0] * graph.m
    cache: dict[int, list[int]] = {}
    for k, (s, d) in enumerate(pairs):
        if s not in cache:
            cache[s] = graph.dijkstra(unit, s)[1]
        for e in graph.trace(cache[s], s, d):
            load[e] += demands[k]
    return max(load[e] / graph.caps[e] for e in range(graph.m) if load[e] > 0)


def max_concurrent_flow(network: CoreNetwork, caps: np.ndarray, pairs: list[tuple[int, int]],
                        demands: np.ndarray, eps: float,
                        max_refinements: int = 6) -> ApproxResult:
    """(1 - eps)-approximate maximum concurrent flow for positive demands.

    The returned flows satisfy ``beta * demands[k]`` exactly for every
    commodity (``value`` is beta).
    """
    if not 0 < eps < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    demands = np.asarray(demands, dtype=float)
    if np.any(demands <= 0):
        raise ValueError("demands must be positive")
    graph = _Graph(network, np.asarray(caps, dtype=float))
    K = len(pairs)
    unit = [1.0] * graph.m
    reach: dict[int, list[float]] = {}
    for s, d in pairs:
        if s not in reach:
            reach[s] = graph.dijkstra(unit, s)[0]
        if not math.isfinite(reach[s][d]):
            return ApproxResult(np.zeros((K, graph.m)), 0.0, 0.0, True, eps)
    # demands scaled so the optimum throughput is at least 1
    scale = 1.0 / _min_hop_congestion(graph, pairs, demands)
    step = eps
    best: ApproxResult | None = None
    for _ in range(max_refinements):
        res = _gk_concurrent(graph, pairs, demands * scale, step)
        res.value *= scale
        res.dual_bound *= scale
        if best is None or res.value > best.value:
            best = res
        bound = min(res.dual_bound, best.dual_bound)
        if best.value >= (1.0 - eps) * bound - 1e-12:
            best.certified = True
            best.dual_bound = bound
            return best
        step /= 2.0
    assert best is not None
    return best


def _gk_concurrent(graph: _Graph, pairs, demands: np.ndarray, step: float,
                   max_restarts: int = 30) -> ApproxResult:
    K, m = len(pairs), graph.m
    caps = graph.caps
    groups = _group_by_source(pairs, list(range(K)))
    delta = (m / (1 - step)) ** (-1 / step) if step < 1 else 1e-6
    phase_cap = 2 * math.ceil(math.log(1 / delta, 1 + step)) + 2
    factor = 1.0
    for _ in range(max_restarts):
        d = demands * factor
        length = [delta / c if c > USABLE_TOL else INF for c in caps]
        D = sum(c * l for c, l in zip(caps, length) if c > USABLE_TOL)
        flows = np.zeros((K, m))
        routed = np.zeros(K)
        bound = INF
        phases = 0
        while D < 1.0 and phases < phase_cap:
            for s, ks in groups.items():
                rem = {k: d[k] for k in ks}
                while D < 1.0 and rem:
                    dist, pred = graph.dijkstra(length, s)
                    paths = {k: graph.trace(pred, s, pairs[k][1]) for k in rem}
                    load: dict[int, float] = {}
                    for k, path in paths.items():
                        for e in path:
                            load[e] = load.get(e, 0.0) + rem[k]
                    frac = min([1.0] + [caps[e] / x for e, x in load.items()])
                    for k, path in paths.items():
                        amt = frac * rem[k]
                        flows[k, path] += amt
                        routed[k] += amt
                        rem[k] -= amt
                        if rem[k] <= 1e-12 * d[k]:
                            del rem[k]
                    for e, x in load.items():
                        inc = frac * x
                        old = length[e]
                        length[e] = old * (1 + step * inc / caps[e])
                        D += caps[e] * (length[e] - old)
            phases += 1
            # dual bound D(l) / sum_k d_k dist_k(l)
            denom = 0.0
            for s, ks in groups.items():
                dist, _ = graph.dijkstra(length, s)
                denom += sum(d[k] * dist[pairs[k][1]] for k in ks)
            bound = min(bound, D / denom)
        if D >= 1.0:
            break
        factor *= 2.0  # optimum throughput is at least 2 in current units
    load_all = flows.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        cong = np.where(load_all > 0, load_all / np.asarray(caps), 0.0)
    congestion = float(cong.max()) if cong.size else 0.0
    if congestion <= 0:
        return ApproxResult(flows, 0.0, bound * factor, False, step)
    beta = float(np.min(routed / d)) / congestion
    # trim every commodity to exactly beta * demand
    flows *= (beta * d / routed)[:, None]
    return ApproxResult(flows, beta * factor, bound * factor, False, step)
