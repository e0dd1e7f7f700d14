"""Per-VPN partition subgraphs built from multicommodity flow solutions.

A commodity's edge flows are split equally among the VPNs sharing its
border pair, and each VPN's partition is the sum of its shares.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .fairness import BalanceParams, balance_flows, classify, fairness_stddev, mb1_bounds, mb2_bounds
from .flows import max_flow
from .mcf import FlowSolution, path_decompose, solve_bounded_mmcf, solve_mconf, solve_mmcf
from .network import CommoditySet, CoreNetwork, VpnRegistry, derive_commodities, resolve_capacities

log = logging.getLogger(__name__)

# Partition links thinner than this are dropped.
LINK_TOL = 1e-9
# Commodities whose max flow is at most this are pruned before solving.
ALPHA_TOL = 1e-9

SCHEMES = ("mconf", "mmcf", "mmcf+mb1", "mmcf+mb2", "mmcf+balanced")
FAIRNESS = {"none": "mmcf", "mb1": "mmcf+mb1", "mb2": "mmcf+mb2", "balance": "mmcf+balanced"}


@dataclass(frozen=True)
class PartitionSubgraph:
    vpn: str
    links: dict[tuple[int, int], float]
    hosts: frozenset[int] = frozenset()

    @property
    def nodes(self) -> frozenset[int]:
        return frozenset(v for link in self.links for v in link) | self.hosts

    @property
    def total(self) -> float:
        return float(sum(self.links.values()))

    def capacity_vector(self, network: CoreNetwork) -> np.ndarray:
        caps = np.zeros(network.edge_count)
        for (u, v), c in self.links.items():
            caps[network.edge_index(u, v)] = c
        return caps


@dataclass
class PartitionSet:
    subgraphs: dict[str, PartitionSubgraph]
    scheme: str
    epsilon: float
    factor: float = 1.0
    solution: FlowSolution | None = None
    alpha: np.ndarray = field(default_factory=lambda: np.zeros(0))
    warnings: list[str] = field(default_factory=list)

    def __getitem__(self, vpn: str) -> PartitionSubgraph:
        return self.subgraphs[vpn]

    def load(self, network: CoreNetwork) -> np.ndarray:
        out = np.zeros(network.edge_count)
        for sub in self.subgraphs.values():
            out += sub.capacity_vector(network)
        return out

    def efficiency(self, network: CoreNetwork) -> float:
        """Partitioned capacity over total core capacity."""
        cap = float(network.total.sum())
        return sum(s.total for s in self.subgraphs.values()) / cap if cap > 0 else 0.0

    def fairness_stddev(self) -> float:
        if self.solution is None or not len(self.alpha):
            return 0.0
        return fairness_stddev(self.solution.aggregate, self.alpha)


@dataclass(frozen=True)
class PartitionReport:
    max_violation: float
    violations: dict[tuple[int, int], float]

    @property
    def valid(self) -> bool:
        return self.max_violation <= 1e-6


def commodity_alphas(network: CoreNetwork, commodities: CommoditySet, caps: np.ndarray) -> np.ndarray:
    return np.array([max_flow(network, c.source, c.dest, caps).value for c in commodities])


def _prepare(network: CoreNetwork, registry: VpnRegistry, capacity_view):
    caps = resolve_capacities(network, capacity_view)
    commodities = derive_commodities(network, registry)
    alpha = commodity_alphas(network, commodities, caps)
    live = [k for k in range(len(commodities)) if alpha[k] > ALPHA_TOL]
    if len(live) < len(commodities):
        log.info("pruned %d commodities without capacity", len(commodities) - len(live))
    commodities = commodities.subset(live)
    return caps, commodities.with_demands(alpha[live]), alpha[live]


def _split(network: CoreNetwork, registry: VpnRegistry, solution: FlowSolution) -> dict[str, PartitionSubgraph]:
    acc = {u: np.zeros(network.edge_count) for u in registry.vpns}
    for k, c in enumerate(solution.commodities):
        share = solution.flows[k] / len(c.sharing)
        for u in c.sharing:
            acc[u] += share
    out = {}
    for u in registry.vpns:
        links = {(int(network.tails[e]), int(network.heads[e])): float(acc[u][e])
                 for e in np.flatnonzero(acc[u] >= LINK_TOL)}
        out[u] = PartitionSubgraph(u, links, registry.hosts(u))
    return out


def _factor(capacity_view) -> float:
    return float(getattr(capacity_view, "factor", 1.0))


def partition_mconf(network: CoreNetwork, registry: VpnRegistry, method: str = "exact",
                    epsilon: float = 0.7, capacity_view="residual") -> PartitionSet:
    """Partitions from a concurrent flow whose demands are the pairwise max flows."""
    caps, commodities, alpha = _prepare(network, registry, capacity_view)
    eps = epsilon if method == "fptas" else 0.0
    if not len(commodities):
        return PartitionSet(_split(network, registry, _no_flow(network, commodities, caps)),
                            "mconf", eps, _factor(capacity_view), None, alpha)
    sol = solve_mconf(network, commodities, method, epsilon, caps)
    return PartitionSet(_split(network, registry, sol), "mconf", eps, _factor(capacity_view), sol,
                        alpha, list(sol.notes))


def partition_mmcf(network: CoreNetwork, registry: VpnRegistry, method: str = "exact",
                   epsilon: float = 0.7, capacity_view="residual", fairness: str = "none",
                   balance_params: BalanceParams = BalanceParams()) -> PartitionSet:
    """Partitions from a maximum multicommodity flow, optionally rebalanced.

    ``fairness`` is ``none``, ``mb1``, ``mb2`` (bounded re-solve) or
    ``balance`` (greedy flow transfers).  An infeasible bound set falls back
    to the plain solution and leaves a warning on the result.
    """
    if fairness not in FAIRNESS:
        raise ValueError(f"unknown fairness post-processing {fairness!r}")
    scheme = FAIRNESS[fairness]
    caps, commodities, alpha = _prepare(network, registry, capacity_view)
    eps = epsilon if method == "fptas" else 0.0
    if not len(commodities):
        return PartitionSet(_split(network, registry, _no_flow(network, commodities, caps)),
                            scheme, eps, _factor(capacity_view), None, alpha)
    sol = solve_mmcf(network, commodities, method, epsilon, caps)
    warnings = list(sol.notes)
    if fairness in ("mb1", "mb2"):
        cls = classify(sol.aggregate, alpha)
        if fairness == "mb1":
            bounds = mb1_bounds(cls, sol.aggregate, alpha)
            start = sol
        else:
            start = solve_mconf(network, commodities, method, epsilon, caps)
            bounds = mb2_bounds(cls, sol.aggregate, alpha, start.beta or 0.0)
        bounded = solve_bounded_mmcf(network, commodities, bounds, method, epsilon, caps, start)
        if bounded.feasible:
            sol = bounded
            warnings += bounded.notes
        else:
            msg = f"{fairness} bounds infeasible; kept unbounded solution"
            warnings += bounded.notes + [msg]
            log.warning(msg)
    elif fairness == "balance":
        sol = balance_flows(sol, path_decompose(sol), alpha, balance_params).solution
    return PartitionSet(_split(network, registry, sol), scheme, eps, _factor(capacity_view), sol,
                        alpha, warnings)


def build_partitions(network: CoreNetwork, registry: VpnRegistry, scheme: str, method: str = "exact",
                     epsilon: float = 0.7, capacity_view="residual",
                     balance_params: BalanceParams = BalanceParams()) -> PartitionSet:
    """Dispatch on a scheme name from :data:`SCHEMES`."""
    if scheme == "mconf":
        return partition_mconf(network, registry, method, epsilon, capacity_view)
    for fair, name in FAIRNESS.items():
        if name == scheme:
            return partition_mmcf(network, registry, method, epsilon, capacity_view, fair, balance_params)
    raise ValueError(f"unknown partition scheme {scheme!r}")


def verify_partition(network: CoreNetwork, partitions: PartitionSet, capacity_view="residual") -> PartitionReport:
    """Per-edge excess of summed partition capacity over the capacity view."""
    caps = resolve_capacities(network, capacity_view)
    over = partitions.load(network) - caps
    bad = {(int(network.tails[e]), int(network.heads[e])): float(over[e]) for e in np.flatnonzero(over > 1e-6)}
    return PartitionReport(float(max(0.0, over.max(initial=0.0))), bad)


def _no_flow(network: CoreNetwork, commodities: CommoditySet, caps: np.ndarray) -> FlowSolution:
    return FlowSolution(network, commodities, caps, np.zeros((0, network.edge_count)), np.zeros(0),
                        "mmcf", status="empty")
