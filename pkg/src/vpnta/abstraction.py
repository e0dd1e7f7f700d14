"""Source-star abstractions and their star / single-node aggregates.

A source-star (SSA) for root ``b`` of VPN ``u`` advertises, for every other
host ``y`` of ``u``, the widest-path bottleneck from ``b`` to ``y`` in the
input graph: either the VPN's partition subgraph or the whole residual core.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .flows import max_capacity_tree
from .network import CoreNetwork, NetworkError, VpnRegistry, resolve_capacities
from .partition import PartitionSubgraph

KINDS = ("SSA", "SA", "SNA")
# Stand-in for the virtual hub of a star or the single node of a simple-node view.
HUB = -1


@dataclass(frozen=True)
class AbstractTopology:
    vpn: str
    kind: str
    root: int | None
    links: dict[tuple[int, int], float]
    generated_at: float = 0.0

    def w(self, x: int, y: int) -> float:
        """Advertised capacity from ``x`` to ``y`` (0 when not advertised)."""
        if self.kind == "SSA":
            return self.links.get((x, y), 0.0)
        if self.kind == "SA":
            return min(self.links.get((x, HUB), 0.0), self.links.get((y, HUB), 0.0))
        return self.links.get((HUB, HUB), 0.0)


class OversubscribedView:
    """Capacity view with ``factor`` times the residual capacity of each edge."""

    def __init__(self, network: CoreNetwork, factor: float):
        if factor < 1:
            raise NetworkError("oversubscription factor must be at least 1")
        self.network = network
        self.factor = float(factor)

    @property
    def capacities(self) -> np.ndarray:
        return self.factor * self.network.residual


def apply_oversubscription(network: CoreNetwork, factor: float) -> OversubscribedView:
    return OversubscribedView(network, factor)


def _as_caps(network: CoreNetwork, graph) -> np.ndarray:
    if isinstance(graph, PartitionSubgraph):
        return graph.capacity_vector(network)
    return resolve_capacities(network, graph)


def generate_ssa(network: CoreNetwork, root: int, peers: Iterable[int], graph="residual",
                 vpn: str = "", generated_at: float = 0.0) -> AbstractTopology:
    """Source-star rooted at ``root`` over ``peers`` (which must include the root).

    ``graph`` is a capacity view of ``network``: ``"residual"``, ``"total"``,
    an explicit vector, an :class:`OversubscribedView`, or a
    :class:`PartitionSubgraph`.  Unreachable peers get 0.
    """
    peers = sorted(set(int(p) for p in peers))
    if root not in peers:
        raise NetworkError(f"root {root} does not host VPN {vpn!r}")
    tree = max_capacity_tree(network, root, [p for p in peers if p != root], _as_caps(network, graph))
    return AbstractTopology(vpn, "SSA", root, {(root, y): r.bottleneck for y, r in tree.items()}, generated_at)


def aggregate(ssa_set: Mapping[int, AbstractTopology] | Iterable[AbstractTopology], target: str,
              peers: Iterable[int] | None = None) -> AbstractTopology:
    """Star (SA) or simple-node (SNA) view from every source-star of one VPN.

    SA: the spoke of border ``x`` is the largest capacity in ``x``'s
    source-star.  SNA: the largest capacity over all source-stars.  Passing
    ``peers`` checks that every host contributed a source-star.
    """
    if target not in ("SA", "SNA"):
        raise ValueError(f"cannot aggregate into {target!r}")
    stars = list(ssa_set.values()) if isinstance(ssa_set, Mapping) else list(ssa_set)
    if not stars:
        raise NetworkError("no source-stars to aggregate")
    vpns = {s.vpn for s in stars}
    if len(vpns) != 1 or any(s.kind != "SSA" for s in stars):
        raise NetworkError("aggregate needs source-stars of a single VPN")
    roots = {s.root for s in stars}
    if peers is not None and roots != set(peers):
        raise NetworkError(f"missing source-stars for roots {sorted(set(peers) - roots)}")
    spokes = {s.root: max(s.links.values(), default=0.0) for s in sorted(stars, key=lambda s: s.root)}
    when = max(s.generated_at for s in stars)
    if target == "SA":
        return AbstractTopology(vpns.pop(), "SA", None, {(x, HUB): w for x, w in spokes.items()}, when)
    return AbstractTopology(vpns.pop(), "SNA", None, {(HUB, HUB): max(spokes.values())}, when)


def partition_ssa(network: CoreNetwork, registry: VpnRegistry, partitions,
                  generated_at: float = 0.0) -> dict[tuple[str, int], AbstractTopology]:
    """Source-stars for every (VPN, root) from each VPN's partition subgraph."""
    out = {}
    for u in registry.vpns:
        caps = partitions[u].capacity_vector(network)
        hosts = registry.hosts(u)
        for b in sorted(hosts):
            out[(u, b)] = generate_ssa(network, b, hosts, caps, u, generated_at)
    return out


def decentralized_max_capacity(network: CoreNetwork, registry: VpnRegistry, graph="residual",
                               generated_at: float = 0.0) -> dict[tuple[str, int], AbstractTopology]:
    """Source-stars for every (VPN, root) on the whole core.

    All VPNs see the same input graph, so any two VPNs advertise identical
    capacities for a shared border pair.  One bottleneck tree per root
    serves every VPN hosted there.
    """
    caps = _as_caps(network, graph)
    out = {}
    roots = sorted({b for u in registry.vpns for b in registry.hosts(u)})
    for b in roots:
        vpns = sorted(registry.vpns_at(b))
        targets = sorted({p for u in vpns for p in registry.hosts(u)} - {b})
        tree = max_capacity_tree(network, b, targets, caps)
        for u in vpns:
            links = {(b, y): tree[y].bottleneck for y in sorted(registry.hosts(u)) if y != b}
            out[(u, b)] = AbstractTopology(u, "SSA", b, links, generated_at)
    return out
