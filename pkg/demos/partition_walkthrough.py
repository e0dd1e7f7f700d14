"""Walk through partitioning on a small core and print what each scheme gives.

    python3 demos/partition_walkthrough.py
"""
from vpnta.abstraction import OversubscribedView, partition_ssa
from vpnta.fairness import fairness_stddev
from vpnta.network import VpnRegistry, build_network
from vpnta.partition import SCHEMES, build_partitions, verify_partition


def show(title, net, parts):
    sol = parts.solution
    print(f"\n== {title}")
    if sol is not None:
        print(f"  total flow {sol.total:.3f}, fairness stddev {fairness_stddev(sol.aggregate, parts.alpha):.3f}")
    for vpn, sub in parts.subgraphs.items():
        links = ", ".join(f"{u}->{v}:{c:.2f}" for (u, v), c in sorted(sub.links.items()))
        print(f"  {vpn}: {links or '(empty)'}")
    print(f"  max excess over capacity {verify_partition(net, parts, 'residual').max_violation:.2e}")


def main():
    # two disjoint routes from 0 to 3 plus a shortcut 1->2; borders at 0, 1, 3
    net = build_network(4, [(0, 1, 10), (1, 3, 10), (0, 2, 4), (2, 3, 4), (1, 2, 3)], [0, 1, 3])
    reg = VpnRegistry({"A": [0, 3], "B": [0, 1, 3]})
    print("core edges:", ", ".join(f"{t}->{h} cap {c:g}" for t, h, c in net.edges()))
    print("hosting:", reg.hosting)

    for scheme in SCHEMES:
        show(scheme, net, build_partitions(net, reg, scheme, "exact"))

    # the approximate solvers trade optimality for speed
    show("mmcf, fptas eps=0.2", net, build_partitions(net, reg, "mmcf", "fptas", 0.2))

    # oversubscription inflates the capacities the partitioner sees
    view = OversubscribedView(net, 3)
    over = build_partitions(net, reg, "mconf", "exact", capacity_view=view)
    show("mconf with Y=3", net, over)
    print(f"  excess over true capacity {verify_partition(net, over, 'residual').max_violation:.2f}")

    # what each VPN's border router is told: widest capacity to every peer
    print("\n== source-star abstractions from the mmcf partitions")
    for (vpn, root), star in partition_ssa(net, reg, build_partitions(net, reg, "mmcf")).items():
        print(f"  {vpn}@{root}: " + ", ".join(f"->{d}:{w:.2f}" for (_, d), w in sorted(star.links.items())))


if __name__ == "__main__":
    main()
