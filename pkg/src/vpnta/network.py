"""Core network, VPN hosting and commodity model."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

# Residual bookkeeping tolerance (bandwidth units).
CAPACITY_TOL = 1e-9


class NetworkError(ValueError):
    """Raised for malformed networks, registries or capacity operations."""


@dataclass
class CoreNetwork:
    """Directed capacitated core graph.

    Nodes are the integers ``0 .. node_count - 1``.  Edge ``i`` runs from
    ``tails[i]`` to ``heads[i]``; ``total`` holds t(e) and ``residual`` r(e).
    Only ``residual`` is ever mutated, and only via :meth:`allocate` /
    :meth:`release`.
    """

    node_count: int
    tails: np.ndarray
    heads: np.ndarray
    total: np.ndarray
    residual: np.ndarray
    border_nodes: frozenset[int] = frozenset()
    _index: dict[tuple[int, int], int] = field(default_factory=dict, repr=False)
    _out: tuple[tuple[int, ...], ...] = field(default=(), repr=False)
    _in: tuple[tuple[int, ...], ...] = field(default=(), repr=False)

    def __post_init__(self) -> None:
        self._index = {(int(u), int(v)): i for i, (u, v) in enumerate(zip(self.tails, self.heads))}
        out: list[list[int]] = [[] for _ in range(self.node_count)]
        inc: list[list[int]] = [[] for _ in range(self.node_count)]
        for i, (u, v) in enumerate(zip(self.tails, self.heads)):
            out[u].append(i)
            inc[v].append(i)
        # adjacency sorted by neighbour id so every traversal is deterministic
        self._out = tuple(tuple(sorted(es, key=lambda e: int(self.heads[e]))) for es in out)
        self._in = tuple(tuple(sorted(es, key=lambda e: int(self.tails[e]))) for es in inc)

    @property
    def nodes(self) -> range:
        return range(self.node_count)

    @property
    def edge_count(self) -> int:
        return len(self.tails)

    def edges(self) -> Iterator[tuple[int, int, float]]:
        for u, v, t in zip(self.tails, self.heads, self.total):
            yield int(u), int(v), float(t)

    def edge_index(self, tail: int, head: int) -> int:
        try:
            return self._index[(tail, head)]
        except KeyError:
            raise NetworkError(f"no edge ({tail}, {head})") from None

    def has_edge(self, tail: int, head: int) -> bool:
        return (tail, head) in self._index

    def out_edges(self, node: int) -> tuple[int, ...]:
        return self._out[node]

    def in_edges(self, node: int) -> tuple[int, ...]:
        return self._in[node]

    def path_edges(self, path: Sequence[int]) -> list[int]:
        return [self.edge_index(u, v) for u, v in zip(path, path[1:])]

    def average_degree(self) -> float:
        """Undirected average degree; a pair of antiparallel edges counts once."""
        if self.node_count == 0:
            return 0.0
        links = {frozenset((int(u), int(v))) for u, v in zip(self.tails, self.heads)}
        return 2.0 * len(links) / self.node_count

    def is_weakly_connected(self) -> bool:
        if self.node_count <= 1:
            return True
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for e in self._out[u]:
                v = int(self.heads[e])
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
            for e in self._in[u]:
                v = int(self.tails[e])
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.node_count

    def copy(self) -> "CoreNetwork":
        """Independent copy; residual state is not shared."""
        return CoreNetwork(self.node_count, self.tails.copy(), self.heads.copy(),
                           self.total.copy(), self.residual.copy(), self.border_nodes)

    def with_border_nodes(self, border: Iterable[int]) -> "CoreNetwork":
        border = frozenset(int(b) for b in border)
        bad = [b for b in border if not 0 <= b < self.node_count]
        if bad:
            raise NetworkError(f"border nodes outside node range: {sorted(bad)}")
        return CoreNetwork(self.node_count, self.tails.copy(), self.heads.copy(),
                           self.total.copy(), self.residual.copy(), border)

    # residual state -------------------------------------------------------

    def allocate(self, edges: Sequence[int], amount: float) -> None:
        """Debit ``amount`` from the residual capacity of every edge."""
        if amount < 0:
            raise NetworkError("negative allocation")
        idx = np.asarray(edges, dtype=int)
        if np.any(self.residual[idx] < amount - CAPACITY_TOL):
            raise NetworkError("allocation exceeds residual capacity")
        self.residual[idx] = np.maximum(self.residual[idx] - amount, 0.0)

    def release(self, edges: Sequence[int], amount: float) -> None:
        if amount < 0:
            raise NetworkError("negative release")
        idx = np.asarray(edges, dtype=int)
        if np.any(self.residual[idx] + amount > self.total[idx] + CAPACITY_TOL):
            raise NetworkError("release exceeds total capacity")
        self.residual[idx] = np.minimum(self.residual[idx] + amount, self.total[idx])

    def utilization(self) -> float:
        cap = float(self.total.sum())
        return float((self.total - self.residual).sum()) / cap if cap > 0 else 0.0


def build_network(node_count: int, edge_list: Iterable[tuple[int, int, float]],
                  border_nodes: Iterable[int] = ()) -> CoreNetwork:
    """Build a network with residual capacities equal to the totals."""
    if node_count < 0:
        raise NetworkError("negative node count")
    tails, heads, caps = [], [], []
    seen: set[tuple[int, int]] = set()
    for tail, head, cap in edge_list:
        tail, head, cap = int(tail), int(head), float(cap)
        if not (0 <= tail < node_count and 0 <= head < node_count):
            raise NetworkError(f"dangling endpoint in edge ({tail}, {head})")
        if tail == head:
            raise NetworkError(f"self loop at node {tail}")
        if cap < 0 or not np.isfinite(cap):
            raise NetworkError(f"negative capacity on edge ({tail}, {head})")
        if (tail, head) in seen:
            raise NetworkError(f"duplicate edge ({tail}, {head})")
        seen.add((tail, head))
        tails.append(tail)
        heads.append(head)
        caps.append(cap)
    total = np.asarray(caps, dtype=float)
    net = CoreNetwork(node_count, np.asarray(tails, dtype=int), np.asarray(heads, dtype=int),
                      total, total.copy())
    return net.with_border_nodes(border_nodes) if border_nodes else net


@dataclass(frozen=True)
class VpnRegistry:
    """Which border nodes host which VPN (P_u)."""

    hosting: dict[str, frozenset[int]]

    def __init__(self, hosting: dict[str, Iterable[int]] | Iterable[tuple[str, Iterable[int]]]):
        items = hosting.items() if isinstance(hosting, dict) else hosting
        table: dict[str, frozenset[int]] = {}
        for name, nodes in items:
            if name in table:
                raise NetworkError(f"duplicate VPN id {name!r}")
            table[str(name)] = frozenset(int(b) for b in nodes)
        object.__setattr__(self, "hosting", dict(sorted(table.items())))

    @property
    def vpns(self) -> list[str]:
        return list(self.hosting)

    def hosts(self, vpn: str) -> frozenset[int]:
        return self.hosting[vpn]

    def vpns_at(self, node: int) -> frozenset[str]:
        return frozenset(u for u, ps in self.hosting.items() if node in ps)

    def validate(self, network: CoreNetwork) -> None:
        for vpn, ps in self.hosting.items():
            unknown = sorted(ps - network.border_nodes)
            if unknown:
                raise NetworkError(f"VPN {vpn!r} hosted on non-border node(s) {unknown}")

    def __len__(self) -> int:
        return len(self.hosting)


@dataclass(frozen=True)
class Commodity:
    id: int
    source: int
    dest: int
    sharing: tuple[str, ...]
    demand: float | None = None

    def __post_init__(self) -> None:
        if self.source == self.dest:
            raise NetworkError("commodity source equals destination")
        if not self.sharing:
            raise NetworkError("commodity with empty sharing set")

    @property
    def pair(self) -> tuple[int, int]:
        return (self.source, self.dest)

    @property
    def label(self) -> str:
        return f"{self.source}-{self.dest}"


class CommoditySet(Sequence[Commodity]):
    """Commodities ordered lexicographically by (source, dest)."""

    def __init__(self, commodities: Iterable[Commodity]):
        items = sorted(commodities, key=lambda c: c.pair)
        pairs = [c.pair for c in items]
        if len(set(pairs)) != len(pairs):
            raise NetworkError("duplicate (source, dest) commodity")
        # ids follow the canonical order
        self._items = tuple(
            Commodity(i, c.source, c.dest, c.sharing, c.demand) for i, c in enumerate(items)
        )
        self._by_pair = {c.pair: c for c in self._items}

    def __getitem__(self, i):  # type: ignore[override]
        return self._items[i]

    def __len__(self) -> int:
        return len(self._items)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, CommoditySet) and self._items == other._items

    def __repr__(self) -> str:
        return f"CommoditySet({[c.label for c in self._items]})"

    def by_pair(self, source: int, dest: int) -> Commodity:
        return self._by_pair[(source, dest)]

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [c.pair for c in self._items]

    @property
    def demands(self) -> np.ndarray:
        return np.array([np.nan if c.demand is None else c.demand for c in self._items])

    def with_demands(self, demands: Sequence[float]) -> "CommoditySet":
        if len(demands) != len(self):
            raise NetworkError("demand vector length mismatch")
        return CommoditySet(
            Commodity(c.id, c.source, c.dest, c.sharing, float(d)) for c, d in zip(self._items, demands)
        )

    def subset(self, keep: Iterable[int]) -> "CommoditySet":
        keep = set(keep)
        return CommoditySet(c for c in self._items if c.id in keep)

    def for_vpn(self, vpn: str) -> list[Commodity]:
        return [c for c in self._items if vpn in c.sharing]


def derive_commodities(network: CoreNetwork, registry: VpnRegistry) -> CommoditySet:
    """One commodity per ordered border pair that shares at least one VPN."""
    registry.validate(network)
    at = {b: registry.vpns_at(b) for b in sorted(network.border_nodes)}
    out = []
    for s, us in at.items():
        for d, ud in at.items():
            if s == d:
                continue
            shared = us & ud
            if shared:
                out.append(Commodity(len(out), s, d, tuple(sorted(shared))))
    return CommoditySet(out)


def resolve_capacities(network: CoreNetwork, view="residual") -> np.ndarray:
    """Per-edge capacity array for a capacity view.

    ``view`` is ``"total"``, ``"residual"``, any object exposing a
    ``capacities`` array (e.g. an oversubscribed view), or an explicit
    per-edge sequence.  Always returns a fresh array.
    """
    if isinstance(view, str):
        if view == "total":
            return network.total.copy()
        if view == "residual":
            return network.residual.copy()
        raise NetworkError(f"unknown capacity view {view!r}")
    caps = getattr(view, "capacities", view)
    caps = np.array(caps, dtype=float)
    if caps.shape != (network.edge_count,):
        raise NetworkError("capacity vector does not match edge count")
    if np.any(caps < 0):
        raise NetworkError("negative capacity in view")
    return caps
