"""Discrete-event simulation of VPN bandwidth calls over a shared core.

Each VPN's customer edge holds a source-star per host, refreshed every
``ta_refresh`` seconds.  A call is admitted locally when its bandwidth fits
the advertised capacity, then routed by the provider edge on a widest path;
otherwise it is rejected locally and classified as a correct rejection
(hit) or a wrong one (miss) against the true residual core.

Events at the same instant run in the order: departures, link-state
snapshots, capacity-sharing updates, abstraction refreshes, arrivals; ties
within a class keep their scheduling order.
"""
from __future__ import annotations

import heapq
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .abstraction import AbstractTopology, OversubscribedView, decentralized_max_capacity, partition_ssa
from .fairness import BalanceParams
from .flows import FLOW_TOL, widest_path
from .formats import ScriptedCall
from .network import CoreNetwork, VpnRegistry
from .partition import SCHEMES as PARTITION_SCHEMES
from .partition import PartitionSet, build_partitions

log = logging.getLogger(__name__)

SCHEMES = ("decentralized",) + PARTITION_SCHEMES
OUTCOMES = ("accepted", "crankback", "hit", "miss")

DEPART, LINKSTATE, CS_UPDATE, TA_REFRESH, ARRIVE = range(5)


class SimError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    scheme: str = "mmcf"
    holding_mean: float = 100.0
    mean_interarrival: float = 100.0
    bw_min: float = 1.0
    bw_max: float = 10.0
    linkstate_update: float = 5.0
    cs_update: float = 10.0
    ta_refresh: float = 100.0
    method: str = "fptas"
    epsilon: float = 0.7
    oversubscription: float = 1.0
    duration: float = 3000.0
    warmup: float | None = None  # None means 10% of duration
    replications: int = 5
    base_seed: int = 0
    balance_tau: float = 1e-6

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise SimError(f"unknown scheme {self.scheme!r}; choose from {', '.join(SCHEMES)}")
        for name in ("holding_mean", "mean_interarrival", "linkstate_update", "cs_update",
                     "ta_refresh", "duration"):
            if not getattr(self, name) > 0:
                raise SimError(f"{name} must be positive")
        if not 0 < self.bw_min <= self.bw_max:
            raise SimError("need 0 < bw_min <= bw_max")
        if self.oversubscription < 1:
            raise SimError("oversubscription factor must be at least 1")
        if self.method not in ("exact", "fptas"):
            raise SimError(f"unknown method {self.method!r}")
        if self.method == "fptas" and not 0 < self.epsilon < 1:
            raise SimError("epsilon must lie in (0, 1)")
        if not 0 <= self.warmup_time < self.duration:
            raise SimError("warmup must be shorter than the duration")
        if self.replications < 1:
            raise SimError("need at least one replication")

    @property
    def warmup_time(self) -> float:
        return 0.1 * self.duration if self.warmup is None else self.warmup

    @property
    def centralized(self) -> bool:
        return self.scheme != "decentralized"

    @property
    def erlang(self) -> float:
        """Offered load of each VPN's call stream."""
        return self.holding_mean / self.mean_interarrival

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class CallRecord:
    arrival: float
    vpn: str
    source: int
    dest: int
    bandwidth: float
    holding: float
    outcome: str = ""
    path: tuple[int, ...] = ()
    advertised: float = 0.0


@dataclass(frozen=True)
class MetricsReport:
    calls: int
    accepted: int
    crankback: int
    hit: int
    miss: int
    success_ratio: float
    crankback_ratio: float
    miss_ratio: float
    utilization: float
    abstraction_efficiency: float
    fairness_stddev: float

    @property
    def no_calls(self) -> bool:
        return self.calls == 0

    def as_dict(self) -> dict:
        return asdict(self)


def compute_metrics(records: list[CallRecord], utilization_samples: list[float] = (),
                    efficiencies: list[float] = (), stddevs: list[float] = ()) -> MetricsReport:
    """Ratios over the given records; with no records every ratio is NaN."""
    counts = {o: 0 for o in OUTCOMES}
    for r in records:
        counts[r.outcome] += 1
    n = len(records)

    def ratio(x: int) -> float:
        return x / n if n else math.nan

    def mean(xs) -> float:
        return float(np.mean(xs)) if len(xs) else math.nan

    return MetricsReport(n, counts["accepted"], counts["crankback"], counts["hit"], counts["miss"],
                         ratio(counts["accepted"] + counts["hit"]), ratio(counts["crankback"]),
                         ratio(counts["miss"]), mean(utilization_samples), mean(efficiencies), mean(stddevs))


@dataclass
class ReplicationResult:
    metrics: MetricsReport
    records: list[CallRecord]
    residual_restored: bool
    partitions_computed: int = 0
    warnings: list[str] = field(default_factory=list)


class _Streams:
    """Independent random streams per VPN and purpose, all derived from one seed."""

    PURPOSES = ("arrival", "pair", "bandwidth", "holding")

    def __init__(self, seed: int, vpns: list[str]):
        root = np.random.SeedSequence(seed)
        children = root.spawn(len(vpns))
        self.rng = {}
        for u, child in zip(vpns, children):
            for purpose, grand in zip(self.PURPOSES, child.spawn(len(self.PURPOSES))):
                self.rng[(u, purpose)] = np.random.default_rng(grand)

    def __call__(self, vpn: str, purpose: str) -> np.random.Generator:
        return self.rng[(vpn, purpose)]


class Simulation:
    """One replication over a private copy of the network."""

    def __init__(self, config: SimConfig, network: CoreNetwork, registry: VpnRegistry, seed: int,
                 script: list[ScriptedCall] | None = None):
        registry.validate(network)
        self.cfg = config
        self.net = network.copy()
        self.net.residual[:] = self.net.total
        self.registry = registry
        self.seed = seed
        self.script = script
        self.streams = _Streams(seed, registry.vpns)
        self.pairs = {u: [(s, d) for s in sorted(registry.hosts(u)) for d in sorted(registry.hosts(u)) if s != d]
                      for u in registry.vpns}
        self.heap: list = []
        self.seq = 0
        self.records: list[CallRecord] = []
        self.util: list[float] = []
        self.eff: list[float] = []
        self.sdev: list[float] = []
        self.warnings: list[str] = []
        self.ta: dict[tuple[str, int], AbstractTopology] = {}
        # capacity-sharing state
        self.cs_snapshot = self.net.residual.copy()
        self.cs_version = 0
        self.partition_version = -1
        self.partitions: PartitionSet | None = None
        self.partition_left: dict[str, np.ndarray] = {}
        self.partitions_computed = 0

    # event plumbing -------------------------------------------------------------

    def push(self, time: float, kind: int, payload=None) -> None:
        heapq.heappush(self.heap, (time, kind, self.seq, payload))
        self.seq += 1

    def run(self) -> ReplicationResult:
        cfg = self.cfg
        end = cfg.duration
        self._schedule_periodic(LINKSTATE, cfg.linkstate_update, end)
        if cfg.centralized:
            self._schedule_periodic(CS_UPDATE, cfg.cs_update, end)
        self._schedule_periodic(TA_REFRESH, cfg.ta_refresh, end)
        if self.script is not None:
            for call in self.script:
                if call.time < end:
                    self.push(call.time, ARRIVE, call)
        else:
            for u in self.registry.vpns:
                if len(self.pairs[u]) == 0:
                    msg = f"VPN {u} has fewer than two hosts and generates no calls"
                    self.warnings.append(msg)
                    log.warning(msg)
                    continue
                self._next_arrival(u, 0.0)
        while self.heap:
            time, kind, _, payload = heapq.heappop(self.heap)
            if time >= end and kind != DEPART:
                continue
            if kind == DEPART:
                self._depart(payload)
            elif kind == LINKSTATE:
                if time >= cfg.warmup_time:
                    self.util.append(self.net.utilization())
            elif kind == CS_UPDATE:
                self.cs_snapshot = self.net.residual.copy()
                self.cs_version += 1
            elif kind == TA_REFRESH:
                self._refresh(time)
            else:
                self._arrive(time, payload)
        restored = bool(np.allclose(self.net.residual, self.net.total, rtol=0, atol=1e-6))
        counted = [r for r in self.records if r.arrival >= cfg.warmup_time]
        metrics = compute_metrics(counted, self.util, self.eff, self.sdev)
        return ReplicationResult(metrics, self.records, restored, self.partitions_computed, self.warnings)

    def _schedule_periodic(self, kind: int, every: float, end: float) -> None:
        k = 0
        while k * every < end:
            self.push(k * every, kind)
            k += 1

    def _next_arrival(self, vpn: str, now: float) -> None:
        t = now + self.streams(vpn, "arrival").exponential(self.cfg.mean_interarrival)
        if t < self.cfg.duration:
            self.push(t, ARRIVE, vpn)

    # abstraction refresh ---------------------------------------------------------

    def _refresh(self, now: float) -> None:
        cfg = self.cfg
        if not cfg.centralized:
            self.ta = decentralized_max_capacity(self.net, self.registry, "residual", now)
            return
        if self.partition_version != self.cs_version:
            self._recompute_partitions()
        self.ta = partition_ssa(self.net, self.registry, self.partitions, now)

    def _recompute_partitions(self) -> None:
        cfg = self.cfg
        snap = self.net.copy()
        snap.residual[:] = self.cs_snapshot
        view = OversubscribedView(snap, cfg.oversubscription) if cfg.oversubscription > 1 else "residual"
        parts = build_partitions(snap, self.registry, cfg.scheme, cfg.method, cfg.epsilon, view,
                                 BalanceParams(tau=cfg.balance_tau))
        self.partitions = parts
        self.partition_version = self.cs_version
        self.partitions_computed += 1
        self.partition_left = {u: parts[u].capacity_vector(self.net) for u in self.registry.vpns}
        self.warnings.extend(parts.warnings)
        self.eff.append(parts.efficiency(self.net))
        self.sdev.append(parts.fairness_stddev())

    # calls ----------------------------------------------------------------------

    def _arrive(self, now: float, payload) -> None:
        cfg = self.cfg
        if isinstance(payload, ScriptedCall):
            call = CallRecord(now, payload.vpn, payload.source, payload.dest, payload.bandwidth, payload.holding)
            if call.vpn not in self.pairs or (call.source, call.dest) not in self.pairs[call.vpn]:
                raise SimError(f"scripted call at t={now:g} uses a pair not hosted by VPN {call.vpn!r}")
        else:
            u = payload
            pairs = self.pairs[u]
            s, d = pairs[int(self.streams(u, "pair").integers(len(pairs)))]
            bw = float(self.streams(u, "bandwidth").uniform(cfg.bw_min, cfg.bw_max))
            hold = float(self.streams(u, "holding").exponential(cfg.holding_mean))
            call = CallRecord(now, u, s, d, bw, hold)
            self._next_arrival(u, now)
        self.records.append(call)
        star = self.ta.get((call.vpn, call.source))
        call.advertised = star.w(call.source, call.dest) if star is not None else 0.0
        if call.bandwidth <= call.advertised:
            self._route(now, call)
        else:
            core = widest_path(self.net, call.source, call.dest, "residual")
            call.outcome = "miss" if core.bottleneck >= call.bandwidth else "hit"

    def _route(self, now: float, call: CallRecord) -> None:
        confined = self.cfg.centralized and self.cfg.oversubscription <= 1
        if confined:
            caps = np.minimum(self.partition_left[call.vpn], self.net.residual)
            found = widest_path(self.net, call.source, call.dest, caps)
        else:
            found = widest_path(self.net, call.source, call.dest, "residual")
        if found.bottleneck + FLOW_TOL < call.bandwidth:
            call.outcome = "crankback"
            return
        edges = self.net.path_edges(found.path)
        self.net.allocate(edges, call.bandwidth)
        version = None
        if confined:
            left = self.partition_left[call.vpn]
            left[edges] = np.maximum(left[edges] - call.bandwidth, 0.0)
            version = self.partition_version
        call.outcome = "accepted"
        call.path = found.path
        self.push(now + call.holding, DEPART, (call, edges, version))

    def _depart(self, payload) -> None:
        call, edges, version = payload
        self.net.release(edges, call.bandwidth)
        if version is not None and version == self.partition_version:
            # the call was carved out of the current partition; give it back
            left = self.partition_left[call.vpn]
            cap = self.partitions[call.vpn].capacity_vector(self.net)
            left[edges] = np.minimum(left[edges] + call.bandwidth, cap[edges])


def run_replication(config: SimConfig, network: CoreNetwork, registry: VpnRegistry, seed: int,
                    script: list[ScriptedCall] | None = None) -> ReplicationResult:
    return Simulation(config, network, registry, seed, script).run()


def run_replications(config: SimConfig, network: CoreNetwork, registry: VpnRegistry,
                     script: list[ScriptedCall] | None = None) -> list[ReplicationResult]:
    """Replication ``i`` uses seed ``base_seed + i``."""
    return [run_replication(config, network, registry, config.base_seed + i, script)
            for i in range(config.replications)]


# CSV -------------------------------------------------------------------------

REPLICATION_COLUMNS = ["replication", "scheme", "H", "Y", "epsilon", "success", "crankback", "miss",
                       "utilization", "abstraction_efficiency", "fairness_stddev", "calls"]
METRIC_COLUMNS = REPLICATION_COLUMNS[5:]


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "nan" if math.isnan(x) else repr(float(x))


def replication_row(index: int, config: SimConfig, m: MetricsReport) -> list[str]:
    eps = config.epsilon if config.method == "fptas" and config.centralized else 0.0
    vals = [index, config.scheme, float(config.holding_mean), float(config.oversubscription), eps,
            m.success_ratio, m.crankback_ratio, m.miss_ratio, m.utilization,
            m.abstraction_efficiency, m.fairness_stddev, m.calls]
    return [_fmt(v) for v in vals]


def aggregate_rows(config: SimConfig, reports: list[MetricsReport]) -> list[list[str]]:
    """``mean`` and ``std`` (sample) rows over replications; NaN entries are skipped."""
    eps = config.epsilon if config.method == "fptas" and config.centralized else 0.0
    table = np.array([[r.success_ratio, r.crankback_ratio, r.miss_ratio, r.utilization,
                       r.abstraction_efficiency, r.fairness_stddev, r.calls] for r in reports], dtype=float)
    rows = []
    for stat in ("mean", "std"):
        vals = []
        for j in range(table.shape[1]):
            col = table[:, j][~np.isnan(table[:, j])]
            if stat == "mean":
                vals.append(float(col.mean()) if col.size else math.nan)
            else:
                vals.append(float(col.std(ddof=1)) if col.size > 1 else math.nan)
        head = [stat, config.scheme, float(config.holding_mean), float(config.oversubscription), eps]
        rows.append([_fmt(v) for v in head + vals])
    return rows


def calls_rows(records: list[CallRecord]) -> list[list[str]]:
    return [[_fmt(r.arrival), r.vpn, str(r.source), str(r.dest), _fmt(r.bandwidth), _fmt(r.holding),
             _fmt(r.advertised), r.outcome, "-".join(str(v) for v in r.path)] for r in records]


CALL_COLUMNS = ["arrival", "vpn", "source", "dest", "bandwidth", "holding", "advertised", "outcome", "path"]

