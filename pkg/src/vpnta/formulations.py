"""Node-arc linear programs for the flow problems, built for :mod:`vpnta.lp`.

Every builder returns the program plus an index describing where the edge
flow variables live, so callers can map an LP solution back onto edges.
Edges whose capacity is zero get no variables (they could only carry zero).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp import LinearProgram, LpBuilder
from .network import CommoditySet, CoreNetwork, NetworkError, VpnRegistry

USABLE_TOL = 1e-12


@dataclass
class FlowLpIndex:
    """Variable layout of a node-arc program."""

    edge_var: list[dict[int, int]]  # commodity -> {edge index: variable}
    value_var: list[int]  # commodity -> f(k) variable, or -1
    beta_var: int = -1

    def edge_flows(self, x: np.ndarray, edge_count: int) -> np.ndarray:
        out = np.zeros((len(self.edge_var), edge_count))
        for k, table in enumerate(self.edge_var):
            for e, j in table.items():
                out[k, e] = x[j]
        return np.maximum(out, 0.0)


def _commodity_flows(b: LpBuilder, network: CoreNetwork, caps: np.ndarray,
                     pairs: list[tuple[int, int]], tags: list[str]) -> list[dict[int, int]]:
    usable = [e for e in range(network.edge_count) if caps[e] > USABLE_TOL]
    tables = []
    for (s, d), tag in zip(pairs, tags):
        tables.append({e: b.var(f"x_{tag}_{network.tails[e]}_{network.heads[e]}") for e in usable})
    return tables


def _conservation(b: LpBuilder, network: CoreNetwork, table: dict[int, int], s: int, d: int,
                  value: dict[int, float]) -> None:
    """Net outflow = +value at s, -value at d, 0 elsewhere.

    ``value`` maps a variable index to its coefficient in the supplied flow
    (e.g. {f_k: 1} or {beta: D_k}).
    """
    for v in network.nodes:
        row: dict[int, float] = {}
        for e in network.out_edges(v):
            if e in table:
                row[table[e]] = row.get(table[e], 0.0) + 1.0
        for e in network.in_edges(v):
            if e in table:
                row[table[e]] = row.get(table[e], 0.0) - 1.0
        sign = 1.0 if v == s else -1.0 if v == d else 0.0
        if sign:
            for j, coef in value.items():
                row[j] = row.get(j, 0.0) - sign * coef
        if row:
            b.row(row, "==", 0.0)


def _capacity_rows(b: LpBuilder, caps: np.ndarray, tables: list[dict[int, int]]) -> None:
    for e, cap in enumerate(caps):
        row = {t[e]: 1.0 for t in tables if e in t}
        if row:
            b.row(row, "<=", float(cap))


def mconf_lp(network: CoreNetwork, caps: np.ndarray, commodities: CommoditySet) -> tuple[LinearProgram, FlowLpIndex]:
    """Maximize beta such that every commodity ships beta * D(k)."""
    b = LpBuilder()
    beta = b.var("beta", obj=1.0)
    tags = [c.label for c in commodities]
    tables = _commodity_flows(b, network, caps, commodities.pairs, tags)
    for c, table in zip(commodities, tables):
        _conservation(b, network, table, c.source, c.dest, {beta: float(c.demand)})
    _capacity_rows(b, caps, tables)
    return b.build(), FlowLpIndex(tables, [-1] * len(commodities), beta)


def mmcf_lp(network: CoreNetwork, caps: np.ndarray, commodities: CommoditySet,
            lower: np.ndarray | None = None, upper: np.ndarray | None = None) -> tuple[LinearProgram, FlowLpIndex]:
    """Maximize total flow, optionally with per-commodity flow bounds."""
    K = len(commodities)
    lower = np.zeros(K) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(K, np.inf) if upper is None else np.asarray(upper, dtype=float)
    b = LpBuilder()
    fvars = [b.var(f"f_{c.label}", obj=1.0, lower=lower[k], upper=upper[k])
             for k, c in enumerate(commodities)]
    tables = _commodity_flows(b, network, caps, commodities.pairs, [c.label for c in commodities])
    for c, table, f in zip(commodities, tables, fvars):
        _conservation(b, network, table, c.source, c.dest, {f: 1.0})
    _capacity_rows(b, caps, tables)
    return b.build(), FlowLpIndex(tables, fvars)


def mmconf_lp(network: CoreNetwork, caps: np.ndarray, commodities: CommoditySet) -> tuple[LinearProgram, FlowLpIndex]:
    """Per-commodity throughputs: maximize sum of beta_k * D(k), shipping beta_k * D(k).

    Kept only to check that dividing maximum multicommodity flows by the
    demands gives the same optimum.
    """
    b = LpBuilder()
    betas = [b.var(f"beta_{c.label}", obj=float(c.demand)) for c in commodities]
    tables = _commodity_flows(b, network, caps, commodities.pairs, [c.label for c in commodities])
    for c, table, beta in zip(commodities, tables, betas):
        _conservation(b, network, table, c.source, c.dest, {beta: float(c.demand)})
    _capacity_rows(b, caps, tables)
    return b.build(), FlowLpIndex(tables, betas)


@dataclass
class VpnCsIndex:
    keys: list[tuple[str, int, int]]  # (vpn, source, dest) per flow block
    flows: FlowLpIndex


def vpn_cs_lp(network: CoreNetwork, registry: VpnRegistry, caps: np.ndarray | None = None,
              max_nodes: int = 10, max_vpns: int = 4) -> tuple[LinearProgram, VpnCsIndex]:
    """Un-aggregated per-VPN program with the equal-flow fairness rows.

    Every VPN gets its own commodity for each ordered pair of its hosts.  The
    objective is the total edge flow of all VPN commodities, and VPNs that
    share a border pair must ship equal flow across it.  Only for small
    instances; larger ones raise :class:`NetworkError`.
    """
    if network.node_count > max_nodes or len(registry) > max_vpns:
        raise NetworkError(f"instance exceeds size guard ({max_nodes} nodes, {max_vpns} VPNs)")
    registry.validate(network)
    caps = network.total.copy() if caps is None else np.asarray(caps, dtype=float)
    keys = [(u, s, d) for u in registry.vpns
            for s in sorted(registry.hosts(u)) for d in sorted(registry.hosts(u)) if s != d]
    b = LpBuilder()
    fvars = [b.var(f"f_{u}_{s}_{d}") for u, s, d in keys]
    usable = [e for e in range(network.edge_count) if caps[e] > USABLE_TOL]
    tables = []
    for u, s, d in keys:
        tables.append({e: b.var(f"x_{u}_{s}_{d}_{network.tails[e]}_{network.heads[e]}", obj=1.0)
                       for e in usable})
    for (u, s, d), table, f in zip(keys, tables, fvars):
        _conservation(b, network, table, s, d, {f: 1.0})
    _capacity_rows(b, caps, tables)
    by_pair: dict[tuple[int, int], list[int]] = {}
    for i, (_, s, d) in enumerate(keys):
        by_pair.setdefault((s, d), []).append(i)
    for members in by_pair.values():
        for i in members[1:]:
            b.row({fvars[members[0]]: 1.0, fvars[i]: -1.0}, "==", 0.0)
    return b.build(), VpnCsIndex(keys, FlowLpIndex(tables, fvars))
