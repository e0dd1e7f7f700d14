"""Seeded Waxman random topologies and random VPN placement."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .network import CoreNetwork, NetworkError, VpnRegistry, build_network

CapacityPolicy = float | Callable[[np.random.Generator], float]

DEFAULT_CAPACITY = 100.0


def _expected_degree(base: np.ndarray, scale: float, n: int) -> float:
    return 2.0 * float(np.minimum(1.0, scale * base).sum()) / n


def _fit_scale(base: np.ndarray, target: float, n: int) -> float:
    """Probability multiplier whose expected average degree hits ``target``."""
    if target >= n - 1:
        return float("inf")
    lo, hi = 0.0, 1.0
    while _expected_degree(base, hi, n) < target:
        hi *= 2.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if _expected_degree(base, mid, n) < target:
            lo = mid
        else:
            hi = mid
    return hi


def generate_waxman(n: int, alpha: float = 0.15, beta: float = 2.2,
                    target_avg_degree: float = 4.0,
                    capacity_policy: CapacityPolicy = DEFAULT_CAPACITY,
                    seed: int = 0, max_tries: int = 500) -> CoreNetwork:
    """Waxman graph on the unit square with its average degree steered to a target.

    Each unordered pair (u, v) is linked with probability
    ``min(1, s * alpha * exp(-dist / (beta * L)))`` where ``L`` is the largest
    realised pairwise distance and ``s`` is fitted per placement so the
    expected degree equals the target.  A link becomes two directed edges with
    the same capacity.  Placements are redrawn until the realised degree is
    within 0.5 of the target (skipped for ``n < 5``) and the graph is
    connected.  Every node is a border node; narrow ``border_nodes`` with
    :func:`assign_vpns` or :meth:`CoreNetwork.with_border_nodes`.
    """
    if n < 2:
        raise NetworkError("waxman graph needs at least two nodes")
    if not 0 < alpha <= 1 or beta <= 0:
        raise NetworkError("waxman parameters need 0 < alpha <= 1 and beta > 0")
    if n >= 5 and target_avg_degree - 0.5 > n - 1:
        raise NetworkError(f"average degree {target_avg_degree} unreachable with {n} nodes")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(max_tries):
        pos = rng.random((n, 2))
        dist = np.hypot(*(pos[iu] - pos[ju]).T)
        span = dist.max() if dist.max() > 0 else 1.0
        base = alpha * np.exp(-dist / (beta * span))
        scale = _fit_scale(base, target_avg_degree, n)
        prob = np.ones_like(base) if np.isinf(scale) else np.minimum(1.0, scale * base)
        keep = rng.random(base.shape) < prob
        edges = []
        for u, v in zip(iu[keep], ju[keep]):
            cap = capacity_policy(rng) if callable(capacity_policy) else float(capacity_policy)
            edges.append((int(u), int(v), cap))
            edges.append((int(v), int(u), cap))
        net = build_network(n, edges, border_nodes=range(n))
        if n >= 5 and abs(net.average_degree() - target_avg_degree) > 0.5:
            continue
        if net.is_weakly_connected():
            return net
    raise NetworkError(f"could not reach average degree {target_avg_degree} in {max_tries} tries")


def assign_vpns(network: CoreNetwork, n_vpns: int, border_count: int,
                hosts_per_vpn: int, seed: int = 0) -> tuple[CoreNetwork, VpnRegistry]:
    """Pick ``border_count`` border nodes and host each VPN on a random subset.

    VPNs are named ``A``, ``B``, ... in order.  Returns the network narrowed to
    the chosen border set and the registry.
    """
    if n_vpns < 1:
        raise NetworkError("at least one VPN is required")
    if not 2 <= hosts_per_vpn <= border_count <= network.node_count:
        raise NetworkError("need 2 <= hosts_per_vpn <= border_count <= node_count")
    rng = np.random.default_rng(seed)
    border = sorted(int(b) for b in rng.choice(network.node_count, border_count, replace=False))
    hosting = {}
    for i in range(n_vpns):
        name = _vpn_name(i)
        hosting[name] = sorted(int(b) for b in rng.choice(border, hosts_per_vpn, replace=False))
    return network.with_border_nodes(border), VpnRegistry(hosting)


def _vpn_name(i: int) -> str:
    name = ""
    i += 1
    while i:
        i, r = divmod(i - 1, 26)
        name = chr(ord("A") + r) + name
    return name
