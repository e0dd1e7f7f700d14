"""Line-oriented text formats for topologies, VPN hosting, partitions,
source-star dumps and scripted call lists.

All formats are whitespace-delimited, one record per line; ``#`` starts a
comment.  Parse errors carry the 1-based line number.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .network import CoreNetwork, VpnRegistry, build_network


class FormatError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _records(text: str) -> Iterator[tuple[int, list[str]]]:
    for no, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            yield no, body.split()


def _int(tok: str, no: int, what: str) -> int:
    try:
        v = int(tok)
    except ValueError:
        raise FormatError(no, f"{what} {tok!r} is not an integer") from None
    if v < 0:
        raise FormatError(no, f"{what} {v} is negative")
    return v


def _float(tok: str, no: int, what: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise FormatError(no, f"{what} {tok!r} is not a number") from None


# topology --------------------------------------------------------------------

def parse_topology(text: str) -> CoreNetwork:
    """Network from ``node``/``border``/``edge`` records; node ids must be 0..n-1."""
    nodes: dict[int, int] = {}
    border: list[tuple[int, int]] = []
    edges: list[tuple[int, int, int, float]] = []
    for no, tok in _records(text):
        kind = tok[0]
        if kind == "node" and len(tok) == 2:
            v = _int(tok[1], no, "node id")
            if v in nodes:
                raise FormatError(no, f"node {v} declared twice")
            nodes[v] = no
        elif kind == "border" and len(tok) == 2:
            border.append((_int(tok[1], no, "border id"), no))
        elif kind == "edge" and len(tok) == 4:
            edges.append((_int(tok[1], no, "tail"), _int(tok[2], no, "head"),
                          no, _float(tok[3], no, "capacity")))
        else:
            raise FormatError(no, f"unrecognised record {' '.join(tok)!r}")
    n = len(nodes)
    for v, no in nodes.items():
        if v >= n:
            raise FormatError(no, f"node ids must be contiguous from 0; got {v} with {n} nodes")
    for b, no in border:
        if b not in nodes:
            raise FormatError(no, f"border node {b} is not declared")
    seen: set[tuple[int, int]] = set()
    for t, h, no, cap in edges:
        for v in (t, h):
            if v not in nodes:
                raise FormatError(no, f"dangling endpoint {v}")
        if (t, h) in seen:
            raise FormatError(no, f"duplicate edge ({t}, {h})")
        seen.add((t, h))
        if cap < 0:
            raise FormatError(no, f"negative capacity on edge ({t}, {h})")
        if t == h:
            raise FormatError(no, f"self loop at node {t}")
    return build_network(n, [(t, h, c) for t, h, _, c in edges], [b for b, _ in border])


def format_topology(network: CoreNetwork, header: Iterable[str] = ()) -> str:
    lines = [f"# {h}" for h in header]
    lines += [f"node {v}" for v in network.nodes]
    lines += [f"border {b}" for b in sorted(network.border_nodes)]
    lines += [f"edge {t} {h} {c:.12g}" for t, h, c in network.edges()]
    return "\n".join(lines) + "\n"


def load_topology(path: str | Path) -> CoreNetwork:
    return parse_topology(Path(path).read_text())


# VPN hosting -------------------------------------------------------------------

def parse_vpns(text: str, network: CoreNetwork | None = None) -> VpnRegistry:
    hosting: dict[str, list[int]] = {}
    lines: dict[str, int] = {}
    for no, tok in _records(text):
        if tok[0] != "vpn" or len(tok) < 4 or tok[2] != "hosts":
            raise FormatError(no, f"expected 'vpn <name> hosts <id> ...', got {' '.join(tok)!r}")
        name = tok[1]
        if name in hosting:
            raise FormatError(no, f"duplicate VPN id {name!r}")
        ids = [_int(t, no, "host id") for t in tok[3:]]
        if len(set(ids)) != len(ids):
            raise FormatError(no, f"VPN {name!r} lists a host twice")
        hosting[name] = ids
        lines[name] = no
    registry = VpnRegistry(hosting)
    if network is not None:
        for name, ids in hosting.items():
            bad = sorted(set(ids) - network.border_nodes)
            if bad:
                raise FormatError(lines[name], f"VPN {name!r} hosted on non-border node(s) {bad}")
    return registry


def format_vpns(registry: VpnRegistry) -> str:
    return "".join(f"vpn {u} hosts {' '.join(str(b) for b in sorted(registry.hosts(u)))}\n"
                   for u in registry.vpns)


def load_vpns(path: str | Path, network: CoreNetwork | None = None) -> VpnRegistry:
    return parse_vpns(Path(path).read_text(), network)


# partitions --------------------------------------------------------------------

def format_partitions(partitions, network: CoreNetwork | None = None) -> str:
    """``part <vpn> <tail> <head> <capacity>`` lines under a provenance header."""
    lines = [f"# scheme {partitions.scheme}", f"# epsilon {partitions.epsilon:g}",
             f"# oversubscription {partitions.factor:g}"]
    if network is not None:
        lines.append(f"# efficiency {partitions.efficiency(network):.12g}")
    lines += [f"# warning {w}" for w in partitions.warnings]
    for u in sorted(partitions.subgraphs):
        for (t, h), c in sorted(partitions.subgraphs[u].links.items()):
            lines.append(f"part {u} {t} {h} {c:.12g}")
    return "\n".join(lines) + "\n"


def parse_partitions(text: str) -> dict[str, dict[tuple[int, int], float]]:
    out: dict[str, dict[tuple[int, int], float]] = {}
    for no, tok in _records(text):
        if tok[0] != "part" or len(tok) != 5:
            raise FormatError(no, f"expected 'part <vpn> <tail> <head> <capacity>'")
        link = (_int(tok[2], no, "tail"), _int(tok[3], no, "head"))
        table = out.setdefault(tok[1], {})
        if link in table:
            raise FormatError(no, f"duplicate partition link {link} for VPN {tok[1]!r}")
        table[link] = _float(tok[4], no, "capacity")
    return out


# abstractions ------------------------------------------------------------------

def format_ssa(stars, timestamp: float) -> str:
    """``ssa <vpn> <root> <peer> <w>`` lines, ordered by (vpn, root, peer)."""
    lines = [f"# generated_at {timestamp:g}"]
    for s in sorted(stars, key=lambda s: (s.vpn, s.root)):
        for (x, y), w in sorted(s.links.items()):
            lines.append(f"ssa {s.vpn} {x} {y} {w:.12g}")
    return "\n".join(lines) + "\n"


# scripted calls ------------------------------------------------------------------

@dataclass(frozen=True)
class ScriptedCall:
    time: float
    vpn: str
    source: int
    dest: int
    bandwidth: float
    holding: float


def parse_script(text: str) -> list[ScriptedCall]:
    """``call <time> <vpn> <src> <dst> <bandwidth> <holding>`` lines."""
    out = []
    for no, tok in _records(text):
        if tok[0] != "call" or len(tok) != 7:
            raise FormatError(no, "expected 'call <time> <vpn> <src> <dst> <bandwidth> <holding>'")
        call = ScriptedCall(_float(tok[1], no, "time"), tok[2], _int(tok[3], no, "source"),
                            _int(tok[4], no, "destination"), _float(tok[5], no, "bandwidth"),
                            _float(tok[6], no, "holding time"))
        if call.time < 0 or call.bandwidth <= 0 or call.holding <= 0:
            raise FormatError(no, "time must be >= 0, bandwidth and holding time > 0")
        if call.source == call.dest:
            raise FormatError(no, "call source equals destination")
        out.append(call)
    return sorted(out, key=lambda c: c.time)


def format_script(calls: Iterable[ScriptedCall]) -> str:
    return "".join(f"call {c.time:g} {c.vpn} {c.source} {c.dest} {c.bandwidth:g} {c.holding:g}\n"
                   for c in calls)

