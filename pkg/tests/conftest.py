from __future__ import annotations

from pathlib import Path

import networkx as nx
import numpy as np
import pytest
from scipy.optimize import linprog

from vpnta.flows import max_flow
from vpnta.network import Commodity, CommoditySet, VpnRegistry, build_network

FIXTURES = Path(__file__).parent / "fixtures"


def triangle():
    """A=0 -> B=1 -> C=2 with unit capacities; one VPN on all three nodes."""
    net = build_network(3, [(0, 1, 1.0), (1, 2, 1.0)], [0, 1, 2])
    reg = VpnRegistry({"A": [0, 1, 2]})
    comms = CommoditySet([Commodity(0, 0, 1, ("A",), 1.0), Commodity(1, 0, 2, ("A",), 1.0),
                          Commodity(2, 1, 2, ("A",), 1.0)])
    return net, reg, comms


def diamond():
    """s=0 -> {a=1, b=2} -> d=3 with s->a 4, s->b 4, a->d 2, b->d 6."""
    return build_network(4, [(0, 1, 4.0), (0, 2, 4.0), (1, 3, 2.0), (2, 3, 6.0)], [0, 3])


def random_instance(seed: int, max_nodes: int = 12, max_commodities: int = 6, p: float = 0.35):
    """Random digraph with integer capacities and commodities whose demand is their max flow."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, max_nodes + 1))
    edges = []
    for u in range(n):
        for v in range(n):
            if u != v and rng.random() < p:
                edges.append((u, v, float(rng.integers(1, 11))))
    net = build_network(n, edges)
    pairs = [(s, d) for s in range(n) for d in range(n) if s != d]
    rng.shuffle(pairs)
    comms = []
    for s, d in pairs:
        a = max_flow(net, s, d).value
        if a > 1e-9:
            comms.append(Commodity(len(comms), s, d, ("A",), a))
        if len(comms) == max_commodities:
            break
    return net, CommoditySet(comms)


def random_vpn_instance(seed: int, n: int = 8, vpns: int = 2, p: float = 0.4):
    """Random digraph with every node a border node and VPNs on random host sets."""
    rng = np.random.default_rng(seed)
    edges = [(u, v, float(rng.integers(1, 11))) for u in range(n) for v in range(n)
             if u != v and rng.random() < p]
    net = build_network(n, edges, range(n))
    hosting = {}
    for i in range(vpns):
        size = int(rng.integers(2, min(n, 4) + 1))
        hosting[chr(ord("A") + i)] = sorted(int(x) for x in rng.choice(n, size, replace=False))
    return net, VpnRegistry(hosting)


def path_lp_oracle(net, comms, objective: str, caps=None):
    """Optimum over explicit simple-path variables with scipy's HiGHS.

    ``objective`` is ``"mmcf"`` (total flow) or ``"mconf"`` (common fraction
    of each demand).  Independent of the package's arc formulation and simplex.
    """
    caps = net.total if caps is None else np.asarray(caps)
    g = nx.DiGraph()
    g.add_nodes_from(range(net.node_count))
    for e, (t, h, _) in enumerate(net.edges()):
        if caps[e] > 0:
            g.add_edge(t, h, e=e)
    paths = []
    for k, c in enumerate(comms):
        for p in nx.all_simple_paths(g, c.source, c.dest):
            paths.append((k, [g[u][v]["e"] for u, v in zip(p, p[1:])]))
    npath = len(paths)
    beta = 1 if objective == "mconf" else 0
    nv = npath + beta
    a_ub = np.zeros((net.edge_count, nv))
    for j, (_, es) in enumerate(paths):
        for e in es:
            a_ub[e, j] = 1.0
    b_ub = np.asarray(caps, dtype=float)
    c = np.zeros(nv)
    a_eq, b_eq = None, None
    if objective == "mmcf":
        c[:npath] = -1.0
    else:
        c[-1] = -1.0
        a_eq = np.zeros((len(comms), nv))
        for j, (k, _) in enumerate(paths):
            a_eq[k, j] = 1.0
        for k, cm in enumerate(comms):
            a_eq[k, -1] = -cm.demand
        b_eq = np.zeros(len(comms))
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    assert res.status == 0
    return -res.fun


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
