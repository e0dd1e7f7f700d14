import numpy as np
import pytest

from vpnta.abstraction import OversubscribedView
from vpnta.mcf import solve_mconf, solve_mmcf
from vpnta.network import VpnRegistry, build_network, derive_commodities
from vpnta.partition import (SCHEMES, PartitionSet, PartitionSubgraph, build_partitions, partition_mconf,
                             partition_mmcf, verify_partition)

from conftest import random_vpn_instance, triangle


def test_single_edge_three_way_split():
    net = build_network(2, [(0, 1, 12)], [0, 1])
    reg = VpnRegistry({"A": [0, 1], "B": [0, 1], "C": [0, 1]})
    parts = partition_mconf(net, reg)
    for u in "ABC":
        assert parts[u].links == {(0, 1): pytest.approx(4.0)}


def test_triangle_mconf_partition_is_the_flow():
    net, reg, comms = triangle()
    parts = partition_mconf(net, reg)
    sol = solve_mconf(net, comms)
    assert np.allclose(parts["A"].capacity_vector(net), sol.edge_load())
    assert parts.scheme == "mconf" and parts.epsilon == 0


def test_triangle_mmcf_partition():
    net, reg, _ = triangle()
    parts = partition_mmcf(net, reg)
    assert parts["A"].total == pytest.approx(2.0)
    assert parts.solution.total == pytest.approx(2.0)


def test_two_vpns_halve_allocation():
    net, _, _ = triangle()
    one = partition_mmcf(net, VpnRegistry({"A": [0, 1, 2]}))
    two = partition_mmcf(net, VpnRegistry({"A": [0, 1, 2], "B": [0, 1, 2]}))
    half = one["A"].capacity_vector(net) / 2
    assert np.allclose(two["A"].capacity_vector(net), half)
    assert np.array_equal(two["A"].capacity_vector(net), two["B"].capacity_vector(net))


def test_single_host_vpn_is_empty():
    net, _, _ = triangle()
    parts = partition_mconf(net, VpnRegistry({"A": [0, 1, 2], "B": [1]}))
    assert parts["B"].links == {} and parts["B"].hosts == frozenset({1})


def test_balance_on_fair_flow_matches_plain():
    net = build_network(2, [(0, 1, 8)], [0, 1])
    reg = VpnRegistry({"A": [0, 1]})
    assert partition_mmcf(net, reg, fairness="balance").subgraphs == partition_mmcf(net, reg).subgraphs


def test_verify_valid_and_corrupted():
    net, reg, _ = triangle()
    parts = partition_mmcf(net, reg)
    assert verify_partition(net, parts).max_violation == 0
    links = dict(parts["A"].links)
    links[(0, 1)] += 1
    bad = PartitionSet({"A": PartitionSubgraph("A", links)}, "mmcf", 0.0)
    rep = verify_partition(net, bad)
    assert rep.max_violation == pytest.approx(1.0) and list(rep.violations) == [(0, 1)]
    assert not rep.valid


def test_verify_empty_set():
    net, _, _ = triangle()
    assert verify_partition(net, PartitionSet({}, "mconf", 0.0)).valid


def test_oversubscribed_partition_exceeds_true_residual():
    net = build_network(2, [(0, 1, 10)], [0, 1])
    reg = VpnRegistry({"A": [0, 1], "B": [0, 1]})
    view = OversubscribedView(net, 9)
    parts = partition_mmcf(net, reg, capacity_view=view)
    assert parts.factor == 9
    assert verify_partition(net, parts, view).valid
    assert verify_partition(net, parts, "residual").max_violation == pytest.approx(80.0)


def test_unknown_scheme():
    net, reg, _ = triangle()
    with pytest.raises(ValueError):
        build_partitions(net, reg, "nope")


@pytest.mark.parametrize("scheme", SCHEMES)
@pytest.mark.parametrize("method", ["exact", "fptas"])
@pytest.mark.parametrize("seed", range(6))
def test_soundness_and_equal_shares(scheme, method, seed):
    net, reg = random_vpn_instance(seed, vpns=3)
    parts = build_partitions(net, reg, scheme, method, 0.5)
    assert verify_partition(net, parts).max_violation <= 1e-6
    if parts.solution is None:
        return
    comms = parts.solution.commodities
    # rebuild each VPN's share directly and compare exactly
    for u in reg.vpns:
        acc = np.zeros(net.edge_count)
        for k, c in enumerate(comms):
            if u in c.sharing:
                acc += parts.solution.flows[k] / len(c.sharing)
        acc[acc < 1e-9] = 0.0
        assert np.array_equal(parts[u].capacity_vector(net), acc)
    # every partition link is a core edge carrying positive capacity
    total = sum(p.total for p in parts.subgraphs.values())
    assert total == pytest.approx(parts.solution.flows.sum(), abs=1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_mmcf_aggregate_dominates(seed):
    net, reg = random_vpn_instance(seed + 50, vpns=2)
    mm = partition_mmcf(net, reg)
    mc = partition_mconf(net, reg)
    if mm.solution is None:
        return
    assert mm.solution.total >= mc.solution.total - 1e-6
