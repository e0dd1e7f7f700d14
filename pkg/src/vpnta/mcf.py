"""Maximum concurrent flow, maximum multicommodity flow, bounded variants,
and path decomposition of the resulting flows."""
from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import fptas
from .formulations import mconf_lp, mmcf_lp
from .lp import solve_lp
from .network import CommoditySet, CoreNetwork, NetworkError, resolve_capacities

# Edge flows at or below this are treated as zero when decomposing.
DECOMP_TOL = 1e-10
MODES = ("mconf", "mmcf", "bounded-mmcf")


class FlowError(ValueError):
    """Bad solver input or a flow violating conservation."""


@dataclass(frozen=True)
class FlowBounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape:
            raise FlowError("bound vectors differ in length")
        if np.any(lo < 0):
            raise FlowError("negative lower bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def vacuous(cls, count: int) -> "FlowBounds":
        return cls(np.zeros(count), np.full(count, np.inf))

    @property
    def consistent(self) -> bool:
        """True when every lower bound is at most its upper bound."""
        return bool(np.all(self.lower <= self.upper + 1e-12))


@dataclass
class FlowSolution:
    """Per-commodity edge flows on one network under one capacity view.

    ``flows[k, e]`` is the flow of commodity ``k`` on edge ``e``.  ``status``
    is ``optimal`` (exact), ``approximate`` (FPTAS), ``infeasible`` or
    ``empty``.
    """

    network: CoreNetwork
    commodities: CommoditySet
    capacities: np.ndarray
    flows: np.ndarray
    aggregate: np.ndarray
    mode: str
    epsilon: float = 0.0
    beta: float | None = None
    status: str = "optimal"
    dual_bound: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def total(self) -> float:
        return float(self.aggregate.sum())

    @property
    def feasible(self) -> bool:
        return self.status in ("optimal", "approximate")

    def edge_load(self) -> np.ndarray:
        return self.flows.sum(axis=0) if len(self.commodities) else np.zeros(self.network.edge_count)

    def left_over(self) -> np.ndarray:
        return self.capacities - self.edge_load()

    def max_violation(self) -> float:
        return float(max(0.0, (-self.left_over()).max(initial=0.0)))

    def copy(self) -> "FlowSolution":
        return replace(self, flows=self.flows.copy(), aggregate=self.aggregate.copy(),
                       notes=list(self.notes))


@dataclass(frozen=True)
class PathDecomposition:
    """Per commodity, the (node path, flow) pairs that make up its flow."""

    paths: tuple[tuple[tuple[tuple[int, ...], float], ...], ...]

    def flow_of(self, k: int) -> float:
        return float(sum(f for _, f in self.paths[k]))

    def edge_flows(self, network: CoreNetwork) -> np.ndarray:
        out = np.zeros((len(self.paths), network.edge_count))
        for k, entries in enumerate(self.paths):
            for path, f in entries:
                out[k, network.path_edges(path)] += f
        return out


def _check_method(method: str, epsilon: float) -> None:
    if method not in ("exact", "fptas"):
        raise FlowError(f"unknown method {method!r}")
    if method == "fptas" and not 0 < epsilon < 1:
        raise FlowError("epsilon must lie in (0, 1)")


def _empty(network: CoreNetwork, commodities: CommoditySet, caps: np.ndarray, mode: str,
           epsilon: float) -> FlowSolution:
    return FlowSolution(network, commodities, caps, np.zeros((0, network.edge_count)), np.zeros(0),
                        mode, epsilon, None, "empty")


def _finish(network: CoreNetwork, commodities: CommoditySet, caps: np.ndarray, flows: np.ndarray,
            mode: str, epsilon: float, status: str, **extra) -> FlowSolution:
    """Strip cycles and recompute aggregates from the canonical decomposition."""
    sol = FlowSolution(network, commodities, caps, flows, net_outflow(network, commodities, flows),
                       mode, epsilon, status=status, **extra)
    # summed paths can close new cycles, so repeat until the flows settle
    for _ in range(10):
        paths = path_decompose(sol)
        rebuilt = paths.edge_flows(network)
        settled = np.abs(rebuilt - sol.flows).max(initial=0.0) <= DECOMP_TOL
        sol.flows = rebuilt
        sol.aggregate = np.array([paths.flow_of(k) for k in range(len(commodities))])
        if settled:
            break
    return sol


def net_outflow(network: CoreNetwork, commodities: CommoditySet, flows: np.ndarray) -> np.ndarray:
    out = np.zeros(len(commodities))
    for k, c in enumerate(commodities):
        out[k] = (flows[k, list(network.out_edges(c.source))].sum()
                  - flows[k, list(network.in_edges(c.source))].sum())
    return out


def solve_mconf(network: CoreNetwork, commodities: CommoditySet, method: str = "exact",
                epsilon: float = 0.7, capacity_view="residual") -> FlowSolution:
    """Largest common fraction beta of every commodity's demand.

    Demands come from ``Commodity.demand`` and must all be positive.
    """
    _check_method(method, epsilon)
    caps = resolve_capacities(network, capacity_view)
    eps = epsilon if method == "fptas" else 0.0
    if not len(commodities):
        return _empty(network, commodities, caps, "mconf", eps)
    demands = commodities.demands
    if np.any(~np.isfinite(demands)) or np.any(demands <= 0):
        raise FlowError("every commodity needs a positive demand")
    if method == "exact":
        lp, index = mconf_lp(network, caps, commodities)
        res = solve_lp(lp)
        if not res.optimal:
            raise FlowError(f"concurrent flow program is {res.status}")
        beta = float(res.x[index.beta_var])
        flows = index.edge_flows(res.x, network.edge_count)
        sol = _finish(network, commodities, caps, flows, "mconf", 0.0, "optimal", beta=beta)
    else:
        approx = fptas.max_concurrent_flow(network, caps, commodities.pairs, demands, epsilon)
        sol = _finish(network, commodities, caps, approx.flows, "mconf", epsilon, "approximate",
                      beta=approx.value, dual_bound=approx.dual_bound)
        if not approx.certified:
            sol.notes.append("approximation bound not certified")
    return sol


def solve_mmcf(network: CoreNetwork, commodities: CommoditySet, method: str = "exact",
               epsilon: float = 0.7, capacity_view="residual") -> FlowSolution:
    """Largest total flow over all commodities, no fairness coupling."""
    _check_method(method, epsilon)
    caps = resolve_capacities(network, capacity_view)
    eps = epsilon if method == "fptas" else 0.0
    if not len(commodities):
        return _empty(network, commodities, caps, "mmcf", eps)
    if method == "exact":
        lp, index = mmcf_lp(network, caps, commodities)
        res = solve_lp(lp)
        if not res.optimal:
            raise FlowError(f"multicommodity flow program is {res.status}")
        return _finish(network, commodities, caps, index.edge_flows(res.x, network.edge_count),
                       "mmcf", 0.0, "optimal")
    approx = fptas.max_multiflow(network, caps, commodities.pairs, epsilon)
    sol = _finish(network, commodities, caps, approx.flows, "mmcf", epsilon, "approximate",
                  dual_bound=approx.dual_bound)
    if not approx.certified:
        sol.notes.append("approximation bound not certified")
    return sol


def solve_bounded_mmcf(network: CoreNetwork, commodities: CommoditySet, bounds: FlowBounds,
                       method: str = "exact", epsilon: float = 0.7,
                       capacity_view="residual", warm_start: FlowSolution | None = None) -> FlowSolution:
    """Largest total flow with every commodity's flow inside its bounds.

    An infeasible bound set is reported through ``status == "infeasible"``
    (flows all zero), never raised.

    The approximate path first ships the lower bounds, then fills the
    remaining capacity with a capped multiflow run.  The lower bounds are
    shipped by scaling down ``warm_start`` when it meets them, else by a
    concurrent-flow run (reachable iff its throughput is at least 1).  It is
    a heuristic; only the exact path is optimal.
    """
    _check_method(method, epsilon)
    caps = resolve_capacities(network, capacity_view)
    K = len(commodities)
    eps = epsilon if method == "fptas" else 0.0
    if not K:
        return _empty(network, commodities, caps, "bounded-mmcf", eps)
    if bounds.lower.shape != (K,):
        raise FlowError("bounds do not match the commodity count")
    infeasible = FlowSolution(network, commodities, caps, np.zeros((K, network.edge_count)),
                              np.zeros(K), "bounded-mmcf", eps, status="infeasible")
    if not bounds.consistent:
        infeasible.notes.append("lower bound above upper bound")
        return infeasible
    # bounds within round-off of each other become a point
    bounds = FlowBounds(np.minimum(bounds.lower, bounds.upper), bounds.upper)
    if method == "exact":
        lp, index = mmcf_lp(network, caps, commodities, bounds.lower, bounds.upper)
        res = solve_lp(lp)
        if res.status == "infeasible":
            return infeasible
        if not res.optimal:
            raise FlowError(f"bounded multicommodity program is {res.status}")
        return _finish(network, commodities, caps, index.edge_flows(res.x, network.edge_count),
                       "bounded-mmcf", 0.0, "optimal")

    flows = np.zeros((K, network.edge_count))
    need = np.flatnonzero(bounds.lower > 1e-12)
    if need.size and _meets_lower(warm_start, commodities, caps, bounds.lower):
        scale = np.divide(bounds.lower, warm_start.aggregate,
                          out=np.zeros(K), where=warm_start.aggregate > 0)
        flows = warm_start.flows * np.minimum(scale, 1.0)[:, None]
    elif need.size:
        sub = commodities.subset(need.tolist()).with_demands(bounds.lower[need])
        first = fptas.max_concurrent_flow(network, caps, sub.pairs, sub.demands, epsilon)
        if first.value < 1.0 - 1e-9:
            infeasible.notes.append(f"lower bounds reachable only to fraction {first.value:.4f}")
            return infeasible
        flows[need] = first.flows / first.value
    residual = np.maximum(caps - flows.sum(axis=0), 0.0)
    room = np.maximum(bounds.upper - bounds.lower, 0.0)
    second = fptas.max_multiflow(network, residual, commodities.pairs, epsilon, upper=room)
    flows += second.flows
    sol = _finish(network, commodities, caps, flows, "bounded-mmcf", epsilon, "approximate")
    # clip round-off so reported aggregates honour the bounds
    sol.aggregate = np.clip(sol.aggregate, bounds.lower, bounds.upper)
    return sol


def _meets_lower(start: FlowSolution | None, commodities: CommoditySet, caps: np.ndarray,
                 lower: np.ndarray) -> bool:
    if start is None or start.commodities != commodities or not start.feasible:
        return False
    if np.any(start.flows.sum(axis=0) > caps + 1e-9):
        return False
    return bool(np.all(start.aggregate >= lower - 1e-9 * np.maximum(1.0, lower)))


def path_decompose(solution: FlowSolution, tol: float = DECOMP_TOL) -> PathDecomposition:
    """Split each commodity's flow into simple source-to-destination paths.

    Walks from the source along the heaviest outgoing edge; a revisited node
    closes a cycle, whose flow is cancelled.  Flow left after the source is
    drained forms cycles only and is dropped.  Raises :class:`FlowError` when
    the input violates conservation beyond round-off.
    """
    network = solution.network
    out = []
    for k, c in enumerate(solution.commodities):
        x = np.where(solution.flows[k] > tol, solution.flows[k], 0.0)
        _check_conservation(network, x, c.source, c.dest, k)
        out.append(_decompose_one(network, x, c.source, c.dest, tol))
    return PathDecomposition(tuple(out))


def _check_conservation(network: CoreNetwork, x: np.ndarray, s: int, d: int, k: int) -> None:
    scale = max(1.0, float(x.max(initial=0.0)))
    for v in network.nodes:
        if v in (s, d):
            continue
        net = x[list(network.out_edges(v))].sum() - x[list(network.in_edges(v))].sum()
        if abs(net) > 1e-6 * scale:
            raise FlowError(f"commodity {k} violates conservation at node {v} by {net:.3g}")


def _decompose_one(network: CoreNetwork, x: np.ndarray, s: int, d: int,
                   tol: float) -> tuple[tuple[tuple[int, ...], float], ...]:
    heads = network.heads
    _cancel_cycles_at(network, x, s, False, tol)
    _cancel_cycles_at(network, x, d, True, tol)
    found: dict[tuple[int, ...], float] = defaultdict(float)
    order: list[tuple[int, ...]] = []
    while True:
        nodes, edges, pos = [s], [], {s: 0}
        u = s
        while u != d:
            best, width = -1, tol
            for e in network.out_edges(u):
                if x[e] > width:
                    best, width = e, x[e]
            if best < 0:
                break
            v = int(heads[best])
            if v in pos:
                i = pos[v]
                cycle = edges[i:] + [best]
                _subtract(x, cycle, tol)
                for w in nodes[i + 1:]:
                    del pos[w]
                nodes, edges = nodes[:i + 1], edges[:i]
                u = v
                continue
            pos[v] = len(nodes)
            nodes.append(v)
            edges.append(best)
            u = v
        if u == d:
            amount = _subtract(x, edges, tol)
            key = tuple(nodes)
            if key not in found:
                order.append(key)
            found[key] += amount
        elif edges:
            x[edges[-1]] = 0.0  # dead end left by round-off
        else:
            break
    return tuple((p, found[p]) for p in order)


def _cancel_cycles_at(network: CoreNetwork, x: np.ndarray, v: int, forward: bool, tol: float) -> None:
    """Cancel cycles until no flow enters ``v`` (or leaves it, if ``forward``).

    Walks from ``v`` along the heaviest edge against (or with) the flow; by
    conservation the walk must revisit a node, closing a cycle.
    """
    step = network.out_edges if forward else network.in_edges
    ends = network.heads if forward else network.tails
    while any(x[e] > tol for e in step(v)):
        nodes, edges, pos = [v], [], {v: 0}
        u = v
        while True:
            best = max(step(u), key=lambda e: x[e], default=-1)
            if best < 0 or x[best] <= tol:
                x[edges[-1]] = 0.0  # dead end left by round-off
                break
            w = int(ends[best])
            if w in pos:
                _subtract(x, edges[pos[w]:] + [best], tol)
                break
            pos[w] = len(nodes)
            nodes.append(w)
            edges.append(best)
            u = w


def _subtract(x: np.ndarray, edges: Sequence[int], tol: float) -> float:
    amount = float(x[edges].min())
    x[edges] -= amount
    x[edges] = np.where(x[edges] <= tol, 0.0, x[edges])
    return amount


def ratios(solution: FlowSolution, alpha: Sequence[float]) -> np.ndarray:
    """f(k) / alpha(k) per commodity."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise FlowError("ratios need positive max flows")
    return solution.aggregate / alpha


def flow_solution_csv(solution: FlowSolution, alpha: Sequence[float] | None = None) -> str:
    """Edge rows then one summary row per commodity, in a single CSV table."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "commodity", "tail", "head", "flow", "aggregate", "alpha", "ratio"])
    net = solution.network
    for k, c in enumerate(solution.commodities):
        for e in np.flatnonzero(solution.flows[k] > 0):
            w.writerow(["edge", c.label, int(net.tails[e]), int(net.heads[e]),
                        repr(float(solution.flows[k, e])), "", "", ""])
    for k, c in enumerate(solution.commodities):
        a = "" if alpha is None else repr(float(alpha[k]))
        r = "" if alpha is None or alpha[k] <= 0 else repr(float(solution.aggregate[k] / alpha[k]))
        w.writerow(["summary", c.label, "", "", "", repr(float(solution.aggregate[k])), a, r])
    return buf.getvalue()


def read_flow_csv(text: str, network: CoreNetwork, commodities: CommoditySet) -> np.ndarray:
    """Edge-flow matrix from :func:`flow_solution_csv` output."""
    flows = np.zeros((len(commodities), network.edge_count))
    labels = {c.label: k for k, c in enumerate(commodities)}
    reader = csv.DictReader(io.StringIO(text))
    missing = {"kind", "commodity", "tail", "head", "flow"} - set(reader.fieldnames or ())
    if missing:
        raise FlowError(f"flow CSV lacks column(s) {sorted(missing)}")
    for line, row in enumerate(reader, start=2):
        if row["kind"] != "edge":
            continue
        if row["commodity"] not in labels:
            raise FlowError(f"line {line}: unknown commodity {row['commodity']}")
        try:
            e = network.edge_index(int(row["tail"]), int(row["head"]))
        except (ValueError, NetworkError) as exc:
            raise FlowError(f"line {line}: {exc}") from None
        flows[labels[row["commodity"]], e] = float(row["flow"])
    return flows
