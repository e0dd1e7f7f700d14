"""Deficit/excess classification, flow bounds for the bounded programs, and
greedy flow balancing between commodities."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import networkx as nx
import numpy as np

from .mcf import FlowBounds, FlowError, FlowSolution, PathDecomposition

log = logging.getLogger(__name__)

# Flow amounts below this are treated as zero by the balancer.
BALANCE_TOL = 1e-12


def fairness_stddev(aggregate: Sequence[float], alpha: Sequence[float]) -> float:
    """Population standard deviation of f(k)/alpha(k) over commodities with alpha > 0."""
    aggregate = np.asarray(aggregate, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    keep = alpha > 0
    if not keep.any():
        return 0.0
    return float(np.std(aggregate[keep] / alpha[keep]))


@dataclass(frozen=True)
class CommodityClassification:
    ratios: np.ndarray  # S_k = f(k) / alpha(k)
    sigma: float
    deficit: tuple[int, ...]
    excess: tuple[int, ...]


def classify(f_mc: Sequence[float], alpha: Sequence[float],
             sigma_override: float | None = None) -> CommodityClassification:
    """Split commodities at sigma = (min S + max S) / 2; S_k == sigma counts as deficit."""
    f_mc = np.asarray(f_mc, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if f_mc.shape != alpha.shape:
        raise FlowError("flow and max-flow vectors differ in length")
    if np.any(alpha <= 0):
        raise FlowError("commodity with zero max flow must be pruned before classification")
    s = f_mc / alpha
    if sigma_override is not None:
        sigma = float(sigma_override)
    elif s.size:
        sigma = float((s.min() + s.max()) / 2)
    else:
        sigma = 0.0
    deficit = tuple(int(k) for k in np.flatnonzero(s <= sigma))
    excess = tuple(int(k) for k in np.flatnonzero(s > sigma))
    return CommodityClassification(s, sigma, deficit, excess)


def mb1_bounds(cls: CommodityClassification, f_mc: Sequence[float],
               alpha: Sequence[float]) -> FlowBounds:
    """Excess keeps at least sigma*alpha and at most its current flow;
    deficit keeps at least its current flow and at most sigma*alpha."""
    f_mc = np.asarray(f_mc, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    lower = np.empty_like(f_mc)
    upper = np.empty_like(f_mc)
    ex = list(cls.excess)
    de = list(cls.deficit)
    lower[ex], upper[ex] = cls.sigma * alpha[ex], f_mc[ex]
    lower[de], upper[de] = f_mc[de], cls.sigma * alpha[de]
    # S_k == sigma makes the deficit interval a point; keep it exact
    upper[de] = np.maximum(upper[de], lower[de])
    return FlowBounds(lower, upper)


def mb2_bounds(cls: CommodityClassification, f_mc: Sequence[float], alpha: Sequence[float],
               beta_mconf: float) -> FlowBounds:
    """Every commodity keeps at least beta*alpha; excess at most its current
    flow, deficit at most its max flow.

    An excess commodity whose current flow is below beta*alpha gets an
    empty interval; the bounded solver then reports infeasibility.
    """
    f_mc = np.asarray(f_mc, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    lower = beta_mconf * alpha
    upper = alpha.copy()
    ex = list(cls.excess)
    upper[ex] = f_mc[ex]
    bad = [k for k in ex if lower[k] > upper[k] + 1e-9]
    if bad:
        log.warning("excess commodities %s sit below the concurrent throughput", bad)
    return FlowBounds(lower, upper)


@dataclass(frozen=True)
class BalanceParams:
    sigma_override: float | None = None
    tau: float = 1e-6
    max_paths_per_commodity: int = 64
    # fewest-hop core paths tried for a deficit commodity after its own paths
    candidate_paths: int = 4
    # cap each transfer so the spread of f/alpha can never grow
    variance_guard: bool = True

    def __post_init__(self) -> None:
        if self.tau < 0:
            raise FlowError("tau must be non-negative")
        if self.max_paths_per_commodity < 1:
            raise FlowError("max_paths_per_commodity must be at least 1")
        if self.candidate_paths < 0:
            raise FlowError("candidate_paths must be non-negative")


@dataclass(frozen=True)
class Transfer:
    deficit: int
    excess: int
    edge: tuple[int, int]
    bw: float

    def __str__(self) -> str:
        return f"transfer d={self.deficit} t={self.excess} edge={self.edge[0]}->{self.edge[1]} bw={self.bw:.9g}"


@dataclass
class BalanceResult:
    solution: FlowSolution
    paths: PathDecomposition
    classification: CommodityClassification
    transfers: list[Transfer] = field(default_factory=list)

    def trace(self) -> str:
        return "".join(f"{t}\n" for t in self.transfers)


class _PathTable:
    """Mutable per-commodity path flows."""

    def __init__(self, network, paths: PathDecomposition):
        self.network = network
        self.entries: list[list[list]] = []  # [path, edges, flow]
        for k in range(len(paths.paths)):
            self.entries.append([[p, network.path_edges(p), f] for p, f in paths.paths[k]])

    def ordered(self, k: int, limit: int, extra: list[tuple[int, ...]] = ()) -> list[list]:
        """Flow-carrying paths (heaviest first), then unused ``extra`` paths."""
        live = sorted((x for x in self.entries[k] if x[2] > BALANCE_TOL), key=lambda x: (-x[2], x[0]))
        seen = {x[0] for x in live}
        for p in extra:
            if p not in seen:
                live.append([p, self.network.path_edges(p), 0.0])
        return live[:limit]

    def add(self, k: int, path: tuple[int, ...], edges: list[int], amount: float) -> None:
        for x in self.entries[k]:
            if x[0] == path:
                x[2] += amount
                return
        self.entries[k].append([path, edges, amount])

    def freeze(self) -> PathDecomposition:
        return PathDecomposition(tuple(
            tuple((p, float(f)) for p, _, f in ent if f > BALANCE_TOL) for ent in self.entries))


def balance_flows(solution: FlowSolution, paths: PathDecomposition, alpha: Sequence[float],
                  params: BalanceParams = BalanceParams()) -> BalanceResult:
    """Move flow from excess to deficit commodities across shared saturated edges.

    For each deficit commodity (in commodity order) and each of its paths
    (heaviest first) that has a single tightest edge while every other edge
    keeps more than ``tau`` left over, flow of the excess commodity furthest
    above sigma is moved off its heaviest path through that edge and onto
    the deficit path.  The tightest edge's load is unchanged and every other
    deficit-path edge had room, so feasibility is kept.  With
    ``variance_guard`` each move is also capped so the spread of f/alpha
    does not grow.  Works on a copy; the input solution is not modified.
    """
    alpha = np.asarray(alpha, dtype=float)
    network = solution.network
    if len(paths.paths) != len(solution.commodities):
        raise FlowError("path decomposition does not match the commodity set")
    recon = paths.edge_flows(network)
    if np.abs(recon - solution.flows).max(initial=0.0) > 1e-6 * max(1.0, solution.flows.max(initial=0.0)):
        raise FlowError("paths do not reconstruct the edge flows")

    out = solution.copy()
    fb = out.aggregate
    cls = classify(fb, alpha, params.sigma_override)
    sigma = cls.sigma
    table = _PathTable(network, paths)
    left = out.capacities - out.flows.sum(axis=0)
    excess = set(cls.excess)
    n = len(fb)
    transfers: list[Transfer] = []

    graph = _core_graph(network, out.capacities) if params.candidate_paths else None
    for d in cls.deficit:
        if not excess:
            break
        c = out.commodities[d]
        extra = _fewest_hop_paths(graph, c.source, c.dest, params.candidate_paths) if graph is not None else []
        for entry in table.ordered(d, params.max_paths_per_commodity, extra):
            p_path, p_edges = entry[0], entry[1]
            done = False
            for _ in range(4 * (n + network.edge_count)):
                need = sigma * alpha[d] - fb[d]
                if need <= BALANCE_TOL or not excess:
                    done = True
                    break
                lo = [left[e] for e in p_edges]
                i_min = int(np.argmin(lo))
                e = p_edges[i_min]
                others = [v for j, v in enumerate(lo) if j != i_min]
                if any(v <= params.tau for v in others):
                    break
                holders = [t for t in sorted(excess) if out.flows[t, e] > BALANCE_TOL]
                if not holders:
                    break
                t = max(holders, key=lambda k: (fb[k] / alpha[k] - sigma, -k))
                q = max((x for x in table.entries[t] if e in x[1] and x[2] > BALANCE_TOL),
                        key=lambda x: (x[2], tuple(-v for v in x[0])))
                zeta = min(others) if others else np.inf
                bw = min(q[2], zeta, need, fb[t] - sigma * alpha[t])
                if params.variance_guard:
                    bw = min(bw, _variance_cap(fb / alpha, d, t, alpha, n))
                if bw <= BALANCE_TOL:
                    break
                table.add(d, p_path, p_edges, bw)
                q[2] -= bw
                out.flows[d, p_edges] += bw
                out.flows[t, q[1]] -= bw
                out.flows[t, q[1]] = np.maximum(out.flows[t, q[1]], 0.0)
                left[p_edges] -= bw
                left[q[1]] += bw
                fb[d] += bw
                fb[t] -= bw
                transfers.append(Transfer(d, t, (int(network.tails[e]), int(network.heads[e])), bw))
                log.debug("%s", transfers[-1])
                if fb[t] - sigma * alpha[t] <= BALANCE_TOL:
                    excess.discard(t)
            if done:
                break
    return BalanceResult(out, table.freeze(), cls, transfers)


def _core_graph(network, caps: np.ndarray) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(network.nodes)
    g.add_edges_from((int(network.tails[e]), int(network.heads[e]))
                     for e in sorted(range(network.edge_count), key=lambda e: (network.tails[e], network.heads[e]))
                     if caps[e] > BALANCE_TOL)
    return g


def _fewest_hop_paths(graph: nx.DiGraph, s: int, d: int, count: int) -> list[tuple[int, ...]]:
    if not nx.has_path(graph, s, d):
        return []
    found = []
    for p in nx.shortest_simple_paths(graph, s, d):
        found.append(tuple(p))
        if len(found) == count:
            break
    return sorted(found, key=lambda p: (len(p), p))


def _variance_cap(s: np.ndarray, d: int, t: int, alpha: np.ndarray, n: int) -> float:
    """Move from t to d that minimises the variance of ``s`` (0 if none helps).

    Any move up to twice this size would still not raise the variance.
    """
    u, v = 1.0 / alpha[d], 1.0 / alpha[t]
    mu = s.mean()
    slope = 2 * u * (s[d] - mu) - 2 * v * (s[t] - mu)
    curve = u * u + v * v - (u - v) ** 2 / n
    if slope >= 0 or curve <= 0:
        return 0.0
    return -slope / (2 * curve)
