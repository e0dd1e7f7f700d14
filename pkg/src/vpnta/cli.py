"""Command-line driver: gen, partition, balance, simulate, report.

The default output directory is taken from ``VPNTA_OUTPUT_DIR`` (else the
current directory); ``--out-dir`` overrides it.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import logging
import os
import sys
import tempfile
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .abstraction import OversubscribedView, partition_ssa
from .fairness import BalanceParams, balance_flows, fairness_stddev
from .formats import FormatError, format_partitions, format_ssa, format_topology, format_vpns, \
    load_topology, load_vpns, parse_script
from .mcf import flow_solution_csv, path_decompose, solve_mmcf
from .network import NetworkError
from .partition import SCHEMES, _prepare, build_partitions, verify_partition
from .simulator import REPLICATION_COLUMNS, SimConfig, SimError, aggregate_rows, calls_rows, \
    CALL_COLUMNS, replication_row, run_replication
from .waxman import assign_vpns, generate_waxman

log = logging.getLogger("vpnta")

ENV_OUTPUT = "VPNTA_OUTPUT_DIR"


class CliError(Exception):
    pass


def _out_dir(args) -> Path:
    path = Path(args.out_dir or os.environ.get(ENV_OUTPUT) or ".")
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_atomic(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# gen ----------------------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.vpns < 1:
        raise CliError("--vpns must be at least 1")
    border = args.border_count or min(10, args.waxman)
    net = generate_waxman(args.waxman, args.alpha, args.beta, args.degree, args.capacity, args.seed)
    net, registry = assign_vpns(net, args.vpns, border, args.hosts_per_vpn, args.seed)
    out = _out_dir(args)
    header = [f"waxman n={args.waxman} alpha={args.alpha:g} beta={args.beta:g} degree={args.degree:g} "
              f"capacity={args.capacity:g} seed={args.seed}"]
    write_atomic(out / args.topology_name, format_topology(net, header))
    write_atomic(out / args.vpn_name, format_vpns(registry))
    print(f"nodes {net.node_count} edges {net.edge_count} avg_degree {net.average_degree():.3f} "
          f"border {len(net.border_nodes)} vpns {len(registry)}")
    return 0


# partition / balance ----------------------------------------------------------------

def _load(args):
    net = load_topology(args.topology)
    return net, load_vpns(args.vpns, net)


def _method(args) -> tuple[str, float]:
    return ("exact", 0.0) if args.exact else ("fptas", args.epsilon)


def cmd_partition(args) -> int:
    net, registry = _load(args)
    method, eps = _method(args)
    scheme = "mconf" if args.scheme == "mconf" else \
        {"none": "mmcf", "mb1": "mmcf+mb1", "mb2": "mmcf+mb2", "balance": "mmcf+balanced"}[args.fair]
    if args.scheme == "mconf" and args.fair != "none":
        raise CliError("--fair applies to the mmcf scheme only")
    view = OversubscribedView(net, args.oversubscription) if args.oversubscription > 1 else "residual"
    params = BalanceParams(tau=args.tau)
    parts = build_partitions(net, registry, scheme, method, eps or 0.7, view, params)
    report = verify_partition(net, parts, view)
    out = _out_dir(args)
    write_atomic(out / args.output, format_partitions(parts, net))
    if args.ssa:
        stars = partition_ssa(net, registry, parts, 0.0)
        write_atomic(out / args.ssa, format_ssa(stars.values(), 0.0))
    for w in parts.warnings:
        print(f"note: {w}")
    print(f"scheme {parts.scheme} efficiency {parts.efficiency(net):.6f} "
          f"fairness_stddev {parts.fairness_stddev():.6f} max_violation {report.max_violation:.3g}")
    return 0 if report.valid else 1


def cmd_balance(args) -> int:
    net, registry = _load(args)
    method, eps = _method(args)
    caps, commodities, alpha = _prepare(net, registry, "residual")
    sol = solve_mmcf(net, commodities, method, eps or 0.7, caps)
    if not len(commodities):
        print("no commodities")
        return 0
    params = BalanceParams(sigma_override=args.sigma, tau=args.tau, max_paths_per_commodity=args.max_paths)
    res = balance_flows(sol, path_decompose(sol), alpha, params)
    out = _out_dir(args)
    write_atomic(out / args.output, flow_solution_csv(res.solution, alpha))
    if args.trace:
        write_atomic(out / args.trace, res.trace())
    before = fairness_stddev(sol.aggregate, alpha)
    after = fairness_stddev(res.solution.aggregate, alpha)
    print(f"transfers {len(res.transfers)} aggregate {res.solution.total:.6f} "
          f"stddev_before {before:.6f} stddev_after {after:.6f}")
    return 0


# simulate -------------------------------------------------------------------------

SIM_KEYS = {
    "holding_mean": float, "mean_interarrival": float, "bw_min": float, "bw_max": float,
    "linkstate_update": float, "cs_update": float, "ta_refresh": float, "method": str,
    "epsilon": float, "duration": float, "warmup": float, "replications": int, "base_seed": int,
    "balance_tau": float,
}


def _key_line(text: str, section: str, key: str) -> int:
    current = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
        elif current == section and line.split("=", 1)[0].strip() == key:
            return no
    return 0


def load_config(path: str) -> dict:
    """Experiment settings from an INI-style file.

    Sections: ``[inputs]`` (topology, vpns, script), ``[sweep]`` (schemes,
    holding, oversubscription as whitespace/comma lists), ``[sim]``
    (simulation fields), ``[output]`` (dir).
    """
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        raise CliError(f"{path}: {exc}") from None
    out: dict = {"sim": {}}
    known = {"inputs": {"topology", "vpns", "script"}, "sweep": {"schemes", "holding", "oversubscription"},
             "sim": set(SIM_KEYS), "output": {"dir"}}
    for section in parser.sections():
        if section not in known:
            raise CliError(f"{path}: line {_key_line(text, section, '') or '?'}: unknown section [{section}]")
        for key, raw in parser.items(section):
            no = _key_line(text, section, key)
            if key not in known[section]:
                raise CliError(f"{path}: line {no}: unknown key {key!r} in [{section}]")
            try:
                if section == "sim":
                    out["sim"][key] = SIM_KEYS[key](raw)
                elif section == "sweep":
                    items = raw.replace(",", " ").split()
                    if not items:
                        raise ValueError("empty list")
                    out[key] = items if key == "schemes" else [float(x) for x in items]
                else:
                    out[key] = raw
            except ValueError as exc:
                raise CliError(f"{path}: line {no}: bad value for {key}: {exc}") from None
    return out


def _cell(job):
    cfg, net, registry, script, index = job
    seed = cfg.base_seed + index
    try:
        res = run_replication(cfg, net, registry, seed, script)
    except Exception as exc:  # reported per cell, never silently dropped
        return index, None, f"{type(exc).__name__}: {exc}"
    if not res.residual_restored:
        return index, res, "residual capacity not restored after drain"
    return index, res, None


def cmd_simulate(args) -> int:
    conf = load_config(args.config) if args.config else {"sim": {}}
    topology = args.topology or conf.get("topology")
    vpns = args.vpns or conf.get("vpns")
    if not topology or not vpns:
        raise CliError("topology and VPN files are required (flags or [inputs] section)")
    net = load_topology(topology)
    registry = load_vpns(vpns, net)
    script_path = args.script or conf.get("script")
    script = parse_script(Path(script_path).read_text()) if script_path else None
    if args.out_dir is None and "dir" in conf:
        args.out_dir = conf["dir"]
    sim = dict(conf["sim"])
    for key in SIM_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            sim[key] = val
    if args.exact:
        sim["method"] = "exact"
    schemes = args.scheme or conf.get("schemes") or ["mmcf"]
    holdings = args.holding or conf.get("holding") or [sim.get("holding_mean", 100.0)]
    factors = args.oversubscription or conf.get("oversubscription") or [1.0]
    sim.pop("holding_mean", None)

    jobs, cells = [], []
    for scheme in schemes:
        for h in holdings:
            for y in factors:
                cfg = SimConfig(scheme=scheme, holding_mean=float(h), oversubscription=float(y), **sim)
                cells.append(cfg)
                jobs.extend((cfg, net, registry, script, i) for i in range(cfg.replications))
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_cell, jobs))
    else:
        results = [_cell(job) for job in jobs]

    out = _out_dir(args)
    rep_rows, agg_rows, failed = [], [], []
    pos = 0
    for cfg in cells:
        chunk = results[pos:pos + cfg.replications]
        pos += cfg.replications
        rows, reports = [], []
        for index, res, err in chunk:
            if err:
                failed.append(f"{cfg.scheme} H={cfg.holding_mean:g} Y={cfg.oversubscription:g} "
                              f"replication {index}: {err}")
            if res is not None:
                rows.append(replication_row(index, cfg, res.metrics))
                reports.append(res.metrics)
                if args.trace:
                    name = f"calls_{cfg.scheme}_H{cfg.holding_mean:g}_Y{cfg.oversubscription:g}_r{index}.csv"
                    write_atomic(out / name, _csv_text(CALL_COLUMNS, calls_rows(res.records)))
        cell_agg = aggregate_rows(cfg, reports) if reports else []
        stem = f"sim_{cfg.scheme}_H{cfg.holding_mean:g}_Y{cfg.oversubscription:g}"
        write_atomic(out / f"{stem}.csv", _csv_text(REPLICATION_COLUMNS, rows))
        rep_rows += rows
        agg_rows += cell_agg
    write_atomic(out / "replications.csv", _csv_text(REPLICATION_COLUMNS, rep_rows))
    write_atomic(out / "aggregate.csv", _csv_text(REPLICATION_COLUMNS, agg_rows))
    for row in agg_rows:
        if row[0] == "mean":
            print(f"{row[1]:>14} H={row[2]:>6} Y={row[3]:>4} success={float(row[5]):.4f} "
                  f"crankback={float(row[6]):.4f} miss={float(row[7]):.4f} efficiency={float(row[9]):.4f}")
    for f in failed:
        print(f"FAILED {f}", file=sys.stderr)
    return 1 if failed else 0


# report ---------------------------------------------------------------------------

REPORT_METRICS = REPLICATION_COLUMNS[5:]


def read_metric_csv(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in REPLICATION_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise CliError(f"{path}: schema mismatch, missing column {missing[0]!r}")
        return [row for row in reader if row["replication"] not in ("mean", "std")]


def cmd_report(args) -> int:
    rows = []
    for path in args.csv:
        rows += read_metric_csv(path)
    by = args.by
    other = "Y" if by == "H" else "H"
    groups: dict = defaultdict(list)
    for r in rows:
        groups[(r["scheme"], float(r[other]), float(r[by]))].append(r)
    long_rows = []
    for (scheme, fixed, col), members in sorted(groups.items()):
        for metric in REPORT_METRICS:
            vals = np.array([float(m[metric]) for m in members])
            vals = vals[~np.isnan(vals)]
            mean = float(vals.mean()) if vals.size else float("nan")
            std = float(vals.std(ddof=1)) if vals.size > 1 else float("nan")
            h, y = (col, fixed) if by == "H" else (fixed, col)
            long_rows.append([scheme, repr(h), repr(y), metric, repr(mean), repr(std), str(vals.size)])
    out = _out_dir(args)
    write_atomic(out / args.output, _csv_text(["scheme", "H", "Y", "metric", "mean", "std", "n"], long_rows))
    metrics = args.metric or ["success", "crankback", "miss", "abstraction_efficiency"]
    cols = sorted({k[2] for k in groups})
    for metric in metrics:
        if metric not in REPORT_METRICS:
            raise CliError(f"unknown metric {metric!r}")
        print(f"\n{metric} (rows: scheme/{other}, columns: {by})")
        print(" " * 24 + "".join(f"{c:>12g}" for c in cols))
        for scheme, fixed in sorted({(k[0], k[1]) for k in groups}):
            cells = []
            for c in cols:
                members = groups.get((scheme, fixed, c), [])
                vals = [float(m[metric]) for m in members if m[metric] != "nan"]
                cells.append(f"{np.mean(vals):12.4f}" if vals else f"{'-':>12}")
            print(f"{scheme:>16} {other}={fixed:<5g}" + "".join(cells))
    return 0


# parser ---------------------------------------------------------------------------

def _solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--exact", action="store_true", help="solve with the exact LP")
    g.add_argument("--epsilon", type=float, default=None, help="FPTAS accuracy (default 0.7)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vpnta", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a Waxman topology and VPN hosting")
    g.add_argument("--waxman", type=int, required=True, metavar="N", help="node count")
    g.add_argument("--alpha", type=float, default=0.15)
    g.add_argument("--beta", type=float, default=2.2)
    g.add_argument("--degree", type=float, default=4.0, help="target average degree")
    g.add_argument("--capacity", type=float, default=100.0, help="capacity of every link")
    g.add_argument("--vpns", type=int, default=5)
    g.add_argument("--border-count", type=int, default=None, help="border nodes (default: 10 or N)")
    g.add_argument("--hosts-per-vpn", type=int, default=4)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--topology-name", default="topology.txt")
    g.add_argument("--vpn-name", default="vpns.txt")
    g.add_argument("--out-dir")
    g.set_defaults(func=cmd_gen)

    q = sub.add_parser("partition", help="compute per-VPN partitions")
    q.add_argument("--topology", required=True)
    q.add_argument("--vpns", required=True)
    q.add_argument("--scheme", choices=("mconf", "mmcf"), default="mmcf")
    q.add_argument("--fair", choices=("none", "mb1", "mb2", "balance"), default="none")
    _solver_flags(q)
    q.add_argument("--oversubscription", type=float, default=1.0, metavar="Y")
    q.add_argument("--tau", type=float, default=1e-6)
    q.add_argument("--output", default="partitions.txt")
    q.add_argument("--ssa", default=None, help="also write source-star abstractions here")
    q.add_argument("--out-dir")
    q.set_defaults(func=cmd_partition)

    b = sub.add_parser("balance", help="balance a maximum multicommodity flow")
    b.add_argument("--topology", required=True)
    b.add_argument("--vpns", required=True)
    _solver_flags(b)
    b.add_argument("--tau", type=float, default=1e-6)
    b.add_argument("--sigma", type=float, default=None, help="override the deficit/excess threshold")
    b.add_argument("--max-paths", type=int, default=64)
    b.add_argument("--output", default="balanced_flows.csv")
    b.add_argument("--trace", default=None, help="write one line per transfer here")
    b.add_argument("--out-dir")
    b.set_defaults(func=cmd_balance)

    s = sub.add_parser("simulate", help="run call simulations over a scheme x H x Y sweep")
    s.add_argument("--config")
    s.add_argument("--topology")
    s.add_argument("--vpns")
    s.add_argument("--script", help="scripted calls instead of random arrivals")
    s.add_argument("--scheme", action="append", choices=("decentralized",) + SCHEMES)
    s.add_argument("--holding", type=float, action="append", metavar="H")
    s.add_argument("--oversubscription", type=float, action="append", metavar="Y")
    s.add_argument("--replications", type=int)
    s.add_argument("--duration", type=float)
    s.add_argument("--warmup", type=float)
    s.add_argument("--seed", dest="base_seed", type=int)
    s.add_argument("--mean-interarrival", dest="mean_interarrival", type=float)
    s.add_argument("--bw-min", dest="bw_min", type=float)
    s.add_argument("--bw-max", dest="bw_max", type=float)
    s.add_argument("--ta-refresh", dest="ta_refresh", type=float)
    s.add_argument("--cs-update", dest="cs_update", type=float)
    s.add_argument("--linkstate-update", dest="linkstate_update", type=float)
    _solver_flags(s)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--trace", action="store_true", help="write per-call CSVs")
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("report", help="merge simulation CSVs into comparison tables")
    r.add_argument("csv", nargs="+")
    r.add_argument("--by", choices=("H", "Y"), default="H")
    r.add_argument("--metric", action="append")
    r.add_argument("--output", default="report_long.csv")
    r.add_argument("--out-dir")
    r.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, FormatError, NetworkError, SimError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
