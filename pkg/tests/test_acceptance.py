"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected and repeated in the pytest terminal summary.
Run alone with ``pytest tests/test_acceptance.py``.
"""
import contextlib
import csv
import io
import time

import numpy as np
import pytest
from scipy import stats

import conftest
from conftest import path_lp_oracle, random_instance, random_vpn_instance, triangle
from vpnta.cli import main as cli_main
from vpnta.fairness import BalanceParams, balance_flows, classify, fairness_stddev, mb1_bounds, mb2_bounds
from vpnta.formats import load_topology, load_vpns, parse_script
from vpnta.mcf import path_decompose, solve_bounded_mmcf, solve_mconf, solve_mmcf
from vpnta.partition import SCHEMES, build_partitions, verify_partition
from vpnta.abstraction import OversubscribedView
from vpnta.simulator import REPLICATION_COLUMNS, SimConfig, aggregate_rows, replication_row, run_replications
from vpnta.waxman import assign_vpns, generate_waxman


@contextlib.contextmanager
def criterion(number: int, title: str):
    """Record PASS/FAIL for one criterion; ``detail`` collects reported figures."""
    detail: list[str] = []
    try:
        yield detail
    except BaseException as exc:
        line = f"criterion {number:2d} FAIL  {title}: {'; '.join(detail)} [{type(exc).__name__}: {exc}]"
        conftest.ACCEPTANCE_LINES.append(line)
        print(line)
        raise
    line = f"criterion {number:2d} PASS  {title}: {'; '.join(detail)}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)


# Simulation runs are cached so the determinism criterion can repeat each one.
_RUNS: dict[tuple, bytes] = {}


def waxman_world():
    net = generate_waxman(22, 0.15, 2.2, 4.0, seed=1)
    return assign_vpns(net, 5, 10, 4, seed=1)


def simulate_csv(world: str, cfg: SimConfig, fresh: bool = False) -> tuple[bytes, list]:
    net, reg, script = WORLDS[world]()
    results = run_replications(cfg, net, reg, script)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPLICATION_COLUMNS)
    w.writerows(replication_row(i, cfg, r.metrics) for i, r in enumerate(results))
    w.writerows(aggregate_rows(cfg, [r.metrics for r in results]))
    data = buf.getvalue().encode()
    if not fresh:
        _RUNS[(world, cfg)] = data
    return data, results


def _scripted_world():
    from pathlib import Path
    fx = Path(__file__).parent / "fixtures"
    net = load_topology(fx / "diamond4.topo")
    return net, load_vpns(fx / "diamond4.vpns", net), parse_script((fx / "three_calls.script").read_text())


def _small_world():
    net, reg = assign_vpns(generate_waxman(10, seed=3), 3, 6, 3, seed=3)
    return net, reg, None


WORLDS = {"waxman22": lambda: (*waxman_world(), None), "scripted": _scripted_world, "small": _small_world}


def _metric(results, name):
    return np.array([getattr(r.metrics, name) for r in results])


# 1 ---------------------------------------------------------------------------

def test_c01_triangle_oracle():
    with criterion(1, "triangle oracle") as d:
        t0 = time.perf_counter()
        net, _, comms = triangle()
        mc = solve_mconf(net, comms)
        mm = solve_mmcf(net, comms)
        elapsed = time.perf_counter() - t0
        d += [f"beta={mc.beta:.9f}", f"MConF aggregate={mc.total:.9f}", f"MMCF aggregate={mm.total:.9f}",
              f"{elapsed * 1000:.1f} ms"]
        assert mc.beta == pytest.approx(0.5, abs=1e-7)
        assert mc.total == pytest.approx(1.5, abs=1e-7)
        assert mm.total == pytest.approx(2.0, abs=1e-7)
        # independent path-enumeration oracle
        assert path_lp_oracle(net, comms, "mconf") == pytest.approx(0.5, abs=1e-7)
        assert path_lp_oracle(net, comms, "mmcf") == pytest.approx(2.0, abs=1e-7)
        assert elapsed < 1.0


# 2 ---------------------------------------------------------------------------

def test_c02_fptas_guarantee():
    with criterion(2, "FPTAS guarantee") as d:
        checked, worst, fptas_time = 0, np.inf, 0.0
        t0 = time.perf_counter()
        seed = 0
        while checked < 50:
            net, comms = random_instance(seed)
            seed += 1
            if not len(comms):
                continue
            checked += 1
            exact_mc = solve_mconf(net, comms).beta
            exact_mm = solve_mmcf(net, comms).total
            for eps in (0.1, 0.7):
                t1 = time.perf_counter()
                mc = solve_mconf(net, comms, "fptas", eps)
                mm = solve_mmcf(net, comms, "fptas", eps)
                fptas_time += time.perf_counter() - t1
                assert mc.beta >= (1 - eps) * exact_mc - 1e-9, (seed, eps)
                assert mm.total >= (1 - eps) * exact_mm - 1e-9, (seed, eps)
                assert mc.max_violation() <= 1e-6 and mm.max_violation() <= 1e-6
                if exact_mc > 0:
                    worst = min(worst, mc.beta / exact_mc)
                if exact_mm > 0:
                    worst = min(worst, mm.total / exact_mm)
        total = time.perf_counter() - t0
        d += [f"{checked} instances x eps {{0.1, 0.7}}", f"worst ratio to exact {worst:.4f}",
              f"FPTAS time {fptas_time:.1f} s", f"total {total:.1f} s"]
        assert total < 60


# 3 ---------------------------------------------------------------------------

def test_c03_dominance_and_fairness_ordering():
    with criterion(3, "dominance and fairness ordering") as d:
        checked, sd_means = 0, np.zeros(4)
        for seed in range(100):
            net, comms = random_instance(seed)
            if not len(comms):
                continue
            alpha = comms.demands
            mm = solve_mmcf(net, comms)
            mc = solve_mconf(net, comms)
            cls = classify(mm.aggregate, alpha)
            b1 = solve_bounded_mmcf(net, comms, mb1_bounds(cls, mm.aggregate, alpha), warm_start=mm)
            b2 = solve_bounded_mmcf(net, comms, mb2_bounds(cls, mm.aggregate, alpha, mc.beta), warm_start=mc)
            assert b1.feasible and b2.feasible, seed
            assert mm.total >= b1.total - 1e-6, seed
            assert b1.total >= b2.total - 1e-6, seed
            assert b2.total >= mc.total - 1e-6, seed
            sd = [fairness_stddev(x.aggregate, alpha) for x in (mc, b2, b1, mm)]
            assert sd[0] == pytest.approx(0.0, abs=1e-7), seed
            assert sd[0] <= sd[1] + 1e-6 and sd[1] <= sd[3] + 1e-6, seed
            sd_means += sd
            checked += 1
        sd_means /= checked
        d += [f"{checked} instances",
              "mean stddev MConF/MB-2/MB-1/MMCF " + "/".join(f"{x:.4f}" for x in sd_means)]


# 4 ---------------------------------------------------------------------------

def test_c04_flow_balancing_contract():
    with criterion(4, "flow balancing contract") as d:
        before, after, seed, checked = [], [], 0, 0
        while checked < 100:
            net, comms = random_instance(seed)
            seed += 1
            if not len(comms):
                continue
            checked += 1
            alpha = comms.demands
            sol = solve_mmcf(net, comms)
            out = balance_flows(sol, path_decompose(sol), alpha, BalanceParams()).solution
            assert out.total == pytest.approx(sol.total, abs=1e-9), seed
            assert out.max_violation() <= 1e-9, seed
            b, a = fairness_stddev(sol.aggregate, alpha), fairness_stddev(out.aggregate, alpha)
            assert a <= b + 1e-9, seed
            before.append(b)
            after.append(a)
        before, after = np.array(before), np.array(after)
        reduction = before - after
        rel = reduction[before > 0] / before[before > 0]
        net, _, comms = triangle()
        sol = solve_mmcf(net, comms)
        res = balance_flows(sol, path_decompose(sol), comms.demands)
        d += [f"{checked} instances", f"mean stddev {before.mean():.4f} -> {after.mean():.4f}",
              f"mean relative reduction {100 * rel.mean():.1f}% (target about 25%)",
              f"improved on {int((reduction > 1e-9).sum())}", f"triangle transfers {len(res.transfers)}"]
        assert reduction.mean() > 0
        assert not res.transfers and np.array_equal(res.solution.flows, sol.flows)


# 5 ---------------------------------------------------------------------------

def test_c05_partition_soundness():
    with criterion(5, "partition soundness") as d:
        runs, worst = 0, 0.0
        for seed in range(12):
            net, reg = random_vpn_instance(seed, vpns=3)
            for scheme in SCHEMES:
                for method in ("exact", "fptas"):
                    for factor in (1, 3):
                        view = OversubscribedView(net, factor)
                        parts = build_partitions(net, reg, scheme, method, 0.5, view)
                        rep = verify_partition(net, parts, view)
                        worst = max(worst, rep.max_violation)
                        assert rep.max_violation <= 1e-6, (seed, scheme, method, factor)
                        runs += 1
                        if parts.solution is None:
                            continue
                        comms = parts.solution.commodities
                        for u in reg.vpns:
                            acc = np.zeros(net.edge_count)
                            for k, c in enumerate(comms):
                                if u in c.sharing:
                                    acc += parts.solution.flows[k] / len(c.sharing)
                            acc[acc < 1e-9] = 0.0
                            assert np.array_equal(parts[u].capacity_vector(net), acc)
        d += [f"{runs} partition sets", f"worst excess {worst:.2e}"]


# 6 ---------------------------------------------------------------------------

def test_c06_simulation_taxonomy():
    with criterion(6, "simulation taxonomy") as d:
        cfg = SimConfig(scheme="decentralized", duration=400, warmup=0, replications=1)
        _, results = simulate_csv("scripted", cfg)
        outcomes = [r.outcome for r in results[0].records]
        assert outcomes == ["accepted", "crankback", "miss"]
        assert results[0].residual_restored
        reps = 0
        for scheme in ("decentralized", "mconf", "mmcf", "mmcf+balanced"):
            cfg = SimConfig(scheme=scheme, duration=1500, holding_mean=500, mean_interarrival=20,
                            replications=3)
            _, results = simulate_csv("small", cfg)
            for r in results:
                m = r.metrics
                assert m.calls > 0
                assert abs(m.success_ratio + m.crankback_ratio + m.miss_ratio - 1) <= 1e-12
                assert r.residual_restored
                reps += 1
        d += [f"scripted outcomes {outcomes}", f"{reps} random replications sum to 1 and drain"]


# 7 ---------------------------------------------------------------------------

def test_c07_near_zero_centralized_crankback():
    with criterion(7, "near-zero centralized crankback") as d:
        t0 = time.perf_counter()
        for scheme in ("mconf", "mmcf"):
            cfg = SimConfig(scheme=scheme, holding_mean=100, oversubscription=1, duration=5000, replications=5)
            _, results = simulate_csv("waxman22", cfg)
            crank = _metric(results, "crankback_ratio").mean()
            d.append(f"{scheme} crankback {100 * crank:.2f}% success {_metric(results, 'success_ratio').mean():.3f}")
            assert crank < 0.02
        elapsed = time.perf_counter() - t0
        d.append(f"{elapsed:.0f} s")
        assert elapsed < 300


# 8 ---------------------------------------------------------------------------

Y_SWEEP = (1, 3, 5, 7, 9)


def test_c08_oversubscription_response():
    with criterion(8, "oversubscription response") as d:
        base = SimConfig(scheme="mconf", holding_mean=100, duration=5000, replications=5)
        succ, crank = {}, {}
        for y in Y_SWEEP:
            _, results = simulate_csv("waxman22", base.with_(oversubscription=float(y)))
            succ[y] = _metric(results, "success_ratio")
            crank[y] = _metric(results, "crankback_ratio")
        d.append("success " + " ".join(f"Y{y}={succ[y].mean():.3f}" for y in Y_SWEEP))
        d.append("crankback " + " ".join(f"Y{y}={crank[y].mean():.4f}" for y in Y_SWEEP))
        # replications share seeds across Y, so the comparison is paired
        diff = succ[3] - succ[1]
        p = stats.ttest_1samp(diff, 0.0, alternative="greater").pvalue if diff.std() > 0 else (
            0.0 if diff.mean() > 0 else 1.0)
        d.append(f"Y3-Y1 {diff.mean():+.4f} one-sided p={p:.4f}")
        assert diff.mean() > 0 and p < 0.05
        # non-decreasing until the first clear drop; past it crankback must grow
        means = [succ[y].mean() for y in Y_SWEEP]
        tol = max(0.01, 2 * max(succ[y].std(ddof=1) for y in Y_SWEEP) / np.sqrt(base.replications))
        drop = next((i for i in range(1, len(means)) if means[i] < means[i - 1] - tol), None)
        if drop is None:
            d.append("no saturation within the sweep")
        else:
            y0 = Y_SWEEP[drop - 1]
            d.append(f"saturation after Y={y0}")
            assert crank[Y_SWEEP[-1]].mean() > crank[y0].mean()
        d.append("targets: ~50% gain, saturation near Y=7, ~3% crankback (recorded, not asserted)")


# 9 ---------------------------------------------------------------------------

def test_c09_efficiency_vs_load():
    with criterion(9, "efficiency vs load") as d:
        base = SimConfig(scheme="mconf", oversubscription=1, duration=5000, replications=5)
        eff = {}
        for h in (100.0, 1000.0):
            _, results = simulate_csv("waxman22", base.with_(holding_mean=h))
            eff[h] = _metric(results, "abstraction_efficiency")
        d += [f"MConF efficiency H=100 {eff[100.0].mean():.3f}", f"H=1000 {eff[1000.0].mean():.3f}",
              f"drop {100 * (1 - eff[1000.0].mean() / eff[100.0].mean()):.1f}% (target 55% falling ~10%)"]
        assert eff[100.0].mean() > eff[1000.0].mean()
        assert 0.3 <= eff[100.0].mean() <= 0.8


# 10 --------------------------------------------------------------------------

def test_c10_determinism(tmp_path, capsys):
    with criterion(10, "determinism") as d:
        if not _RUNS:
            # run standalone: seed the cache with the cheap runs
            simulate_csv("scripted", SimConfig(scheme="decentralized", duration=400, warmup=0, replications=1))
            simulate_csv("small", SimConfig(scheme="mconf", duration=1500, mean_interarrival=20, replications=2))
        for (world, cfg), first in list(_RUNS.items()):
            again, _ = simulate_csv(world, cfg, fresh=True)
            assert again == first, (world, cfg.scheme, cfg.holding_mean, cfg.oversubscription)
        # the CLI writes the same bytes too
        args = ["gen", "--waxman", "12", "--vpns", "3", "--border-count", "6", "--seed", "5"]
        for out in ("a", "b"):
            assert cli_main(args + ["--out-dir", str(tmp_path / out)]) == 0
            assert cli_main(["partition", "--topology", str(tmp_path / out / "topology.txt"),
                             "--vpns", str(tmp_path / out / "vpns.txt"), "--scheme", "mmcf",
                             "--out-dir", str(tmp_path / out)]) == 0
            assert cli_main(["simulate", "--topology", str(tmp_path / out / "topology.txt"),
                             "--vpns", str(tmp_path / out / "vpns.txt"), "--scheme", "mconf",
                             "--duration", "1000", "--replications", "2", "--mean-interarrival", "20",
                             "--out-dir", str(tmp_path / out)]) == 0
        capsys.readouterr()
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        for name in names:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
        d += [f"{len(_RUNS)} simulation runs repeated byte-identically", f"{len(names)} CLI files identical"]
