import networkx as nx
import numpy as np
import pytest

from vpnta.abstraction import (HUB, AbstractTopology, OversubscribedView, aggregate, apply_oversubscription,
                               decentralized_max_capacity, generate_ssa, partition_ssa)
from vpnta.flows import max_flow
from vpnta.network import NetworkError, VpnRegistry, build_network
from vpnta.partition import PartitionSubgraph, partition_mmcf

from conftest import random_vpn_instance, triangle


def brute_widest(edges: dict, s, d):
    g = nx.DiGraph()
    g.add_edges_from((u, v, {"c": c}) for (u, v), c in edges.items() if c > 0)
    if s not in g or d not in g:
        return 0.0
    return max((min(g[a][b]["c"] for a, b in zip(p, p[1:])) for p in nx.all_simple_paths(g, s, d)),
               default=0.0)


def test_single_link_partition():
    net = build_network(2, [(0, 1, 9)], [0, 1])
    star = generate_ssa(net, 0, [0, 1], PartitionSubgraph("A", {(0, 1): 4.0}), "A")
    assert star.links == {(0, 1): 4.0} and star.w(0, 1) == 4.0


def test_empty_partition_all_zero():
    net = build_network(3, [(0, 1, 9), (1, 2, 9)], [0, 1, 2])
    star = generate_ssa(net, 0, [0, 1, 2], PartitionSubgraph("A", {}), "A")
    assert star.links == {(0, 1): 0.0, (0, 2): 0.0}


def test_root_must_host():
    net, _, _ = triangle()
    with pytest.raises(NetworkError):
        generate_ssa(net, 2, [0, 1])


def test_triangle_partition_star_matches_enumeration():
    net, reg, _ = triangle()
    parts = partition_mmcf(net, reg)
    stars = partition_ssa(net, reg, parts)
    for (u, root), star in stars.items():
        for (x, y), w in star.links.items():
            assert x == root
            assert w == brute_widest(parts[u].links, x, y)


def test_aggregate_rules():
    s1 = AbstractTopology("A", "SSA", 0, {(0, 1): 3.0, (0, 2): 5.0})
    s2 = AbstractTopology("A", "SSA", 1, {(1, 0): 2.0, (1, 2): 7.0})
    sa = aggregate([s1, s2], "SA")
    assert sa.links == {(0, HUB): 5.0, (1, HUB): 7.0}
    assert sa.w(0, 1) == 5.0
    assert aggregate([s1, s2], "SNA").links == {(HUB, HUB): 7.0}


def test_aggregate_single_root_and_zeros():
    s = AbstractTopology("A", "SSA", 0, {(0, 1): 0.0})
    assert aggregate([s], "SA").links == {(0, HUB): 0.0}
    assert aggregate([s], "SNA").w(0, 1) == 0.0


def test_aggregate_incomplete():
    s = AbstractTopology("A", "SSA", 0, {(0, 1): 1.0})
    with pytest.raises(NetworkError, match="missing"):
        aggregate([s], "SA", peers=[0, 1])


def test_oversubscription_view():
    net = build_network(2, [(0, 1, 10)], [0, 1])
    assert np.array_equal(apply_oversubscription(net, 1).capacities, net.residual)
    assert apply_oversubscription(net, 3).capacities[0] == 30
    with pytest.raises(NetworkError):
        OversubscribedView(net, 0.5)


def test_decentralized_identical_hosting():
    net, _ = random_vpn_instance(3, vpns=1)
    hosts = sorted(net.border_nodes)[:3]
    reg = VpnRegistry({"A": hosts, "B": hosts})
    stars = decentralized_max_capacity(net, reg)
    for b in hosts:
        assert stars[("A", b)].links == stars[("B", b)].links


def test_decentralized_single_vpn_is_core_widest():
    net, _, _ = triangle()
    reg = VpnRegistry({"A": [0, 1, 2]})
    star = decentralized_max_capacity(net, reg)[("A", 0)]
    assert star.links == {(0, 1): 1.0, (0, 2): 1.0}


def test_regenerate_after_allocation():
    net = build_network(4, [(0, 1, 10), (1, 3, 10), (0, 2, 4), (2, 3, 4)], [0, 3])
    reg = VpnRegistry({"A": [0, 3]})
    assert decentralized_max_capacity(net, reg)[("A", 0)].w(0, 3) == 10
    net.allocate(net.path_edges([0, 1, 3]), 8)
    assert decentralized_max_capacity(net, reg)[("A", 0)].w(0, 3) == 4


@pytest.mark.parametrize("seed", range(15))
def test_fairness_policy_and_flow_bound(seed):
    net, reg = random_vpn_instance(seed, vpns=3)
    stars = decentralized_max_capacity(net, reg)
    seen = {}
    for (u, b), star in stars.items():
        for (x, y), w in star.links.items():
            seen.setdefault((x, y), set()).add(w)
            assert w <= max_flow(net, x, y, "residual").value + 1e-12
    assert all(len(ws) == 1 for ws in seen.values())


@pytest.mark.parametrize("seed", range(10))
def test_centralized_star_is_routable_in_partition(seed):
    net, reg = random_vpn_instance(seed + 20, vpns=2)
    parts = partition_mmcf(net, reg)
    for (u, b), star in partition_ssa(net, reg, parts).items():
        for (x, y), w in star.links.items():
            assert w == pytest.approx(brute_widest(parts[u].links, x, y), abs=1e-12)
