import pytest

from vpnta.formats import (FormatError, ScriptedCall, format_partitions, format_script, format_ssa,
                           format_topology, format_vpns, parse_partitions, parse_script, parse_topology,
                           parse_vpns)
from vpnta.abstraction import partition_ssa
from vpnta.partition import partition_mmcf

from conftest import triangle


def test_topology_round_trip():
    net, reg, _ = triangle()
    text = format_topology(net, ["triangle"])
    back = parse_topology(text)
    assert list(back.edges()) == list(net.edges()) and back.border_nodes == net.border_nodes
    assert format_topology(back, ["triangle"]) == text


@pytest.mark.parametrize("text,line,msg", [
    ("node 0\nnode 1\nedge 0 1 3\nedge 0 1 4\n", 4, "duplicate edge"),
    ("node 0\nnode 1\nedge 0 2 3\n", 3, "dangling"),
    ("node 0\nnode 1\nedge 0 1 -1\n", 3, "negative capacity"),
    ("node 0\nnode 0\n", 2, "declared twice"),
    ("node 0\nnode 1\nlink 0 1\n", 3, "unrecognised"),
    ("node 0\nnode 1\nedge 0 1 x\n", 3, "not a number"),
    ("node 0\nnode 2\n", 2, "contiguous"),
])
def test_topology_errors_are_line_numbered(text, line, msg):
    with pytest.raises(FormatError, match=msg) as info:
        parse_topology(text)
    assert info.value.line == line


def test_vpns_round_trip_and_errors():
    net, reg, _ = triangle()
    assert parse_vpns(format_vpns(reg), net).hosting == reg.hosting
    with pytest.raises(FormatError, match="duplicate VPN"):
        parse_vpns("vpn A hosts 0 1\nvpn A hosts 1 2\n")
    with pytest.raises(FormatError) as info:
        parse_vpns("# hosting\nvpn A hosts 0 7\n", net)
    assert info.value.line == 2


def test_partition_dump_round_trip():
    net, reg, _ = triangle()
    parts = partition_mmcf(net, reg)
    text = format_partitions(parts, net)
    assert text.startswith("# scheme mmcf\n")
    assert parse_partitions(text) == {"A": parts["A"].links}


def test_ssa_dump():
    net, reg, _ = triangle()
    stars = partition_ssa(net, reg, partition_mmcf(net, reg))
    text = format_ssa(stars.values(), 12.5)
    lines = text.splitlines()
    assert lines[0] == "# generated_at 12.5"
    assert lines[1] == "ssa A 0 1 1"


def test_script_round_trip_and_sorting():
    calls = parse_script("call 20 A 0 3 6 100\ncall 10 A 0 3 8 100  # first\n")
    assert [c.time for c in calls] == [10, 20]
    assert parse_script(format_script(calls)) == calls
    with pytest.raises(FormatError, match="source equals"):
        parse_script("call 1 A 0 0 1 1\n")
    with pytest.raises(FormatError):
        parse_script("call 1 A 0 1 -1 1\n")
    assert isinstance(calls[0], ScriptedCall)
