"""Acceptance criteria for the simulator, one test per criterion.

Each test records a PASS/FAIL line; the lines are printed in the terminal
summary (see conftest.py) whether or not output capture is on.
"""
import math
import time

import numpy as np
import pytest

from cogcompose.agent import CognitiveAgent, LocalExecutor
from cogcompose.attention import C2, GlobalParams, spread_activation
from cogcompose.declarative import Slipnet
from cogcompose.domain import AbstractService, Premise
from cogcompose.perception import Stimulus, StimulusClass, decay_activation
from cogcompose.procedural import Heuristic, update_utility
from cogcompose.sim import SimConfig, run_once, run_scenario
from cogcompose.sim.metrics import mean
from cogcompose.sim.scenario import BUY_FOOD_ORDER, buy_food_catalog, buy_food_goal
from cogcompose.working_memory import INTERNAL, WorkingMemoryUnit, base_level

import oracles
from conftest import record

RUNS = 30
DENSITIES = (20, 40, 60)


def _flex(**kw):
    return SimConfig(audit=True, **kw)


@pytest.fixture(scope="module")
def density_runs():
    t0 = time.perf_counter()
    runs = {d: run_scenario(_flex(density=d, cl=5, mobility="slow"), RUNS) for d in DENSITIES}
    runs["elapsed"] = time.perf_counter() - t0
    return runs


def _pfr(records):
    return mean(r.pfr for r in records)


def _check(n, ok, detail):
    record(n, ok, detail)
    assert ok, detail


# 1 ---------------------------------------------------------------------------

def _formula_cases(rng, cases=25):
    bad = []
    for _ in range(cases):
        sal, cc = int(rng.integers(1, 11)), int(rng.integers(0, 400))
        if not oracles.rel_close(decay_activation(sal, cc), oracles.percept_activation(sal, cc)):
            bad.append(("decay", sal, cc))

        d, ib = float(rng.uniform(0.1, 1.0)), float(rng.uniform(0, 0.5))
        times = sorted(int(t) for t in rng.integers(0, 60, size=int(rng.integers(1, 5))))
        now = times[-1] + int(rng.integers(0, 30))
        u = WorkingMemoryUnit(Premise("p"), INTERNAL, d, ib, times[0], list(times))
        if not oracles.rel_close(base_level(u, now), oracles.base_level(ib, d, times, now)):
            bad.append(("base-level", times, now))

        net, links = Slipnet(), []
        names = [f"n{i}" for i in range(5)]
        for nm in names:
            net.add_node(nm, float(rng.uniform(0, 100)))
        for _ in range(4):
            a, b = rng.choice(names, 2, replace=False)
            length = float(rng.uniform(0.05, 1.0))
            net.add_link(str(a), str(b), "rel", length)
            links.append((str(a), str(b), length))
        before = dict(net.nodes)
        net.spread()
        want = oracles.slipnet_step(before, links, net.k, net.threshold, net.ceiling)
        if not all(oracles.rel_close(net.nodes[k], want[k]) for k in before):
            bad.append(("slipnet", before))

        pool = [Premise("q", str(i)) for i in range(6)]
        svcs = []
        for i in range(4):
            pre = frozenset(rng.choice(pool, int(rng.integers(1, 3)), replace=False))
            add = frozenset(rng.choice(pool, int(rng.integers(1, 3)), replace=False))
            dele = frozenset(rng.choice(pool, int(rng.integers(0, 2)), replace=False))
            svcs.append(AbstractService(f"s{i}", pre, add, dele))
        wm = frozenset(rng.choice(pool, int(rng.integers(0, 4)), replace=False))
        goals, prot = frozenset(pool[:1]), frozenset(pool[5:])
        prev = {s.id: float(rng.uniform(0, 40)) for s in svcs}
        execs = frozenset(s.id for s in svcs if rng.random() < 0.5)
        params = GlobalParams.from_tuple(rng.integers(10, 50, size=5))
        got = spread_activation(svcs, wm, goals, prot, params, prev, executable=execs)
        want = oracles.activation_terms([(s.id, s.preconds, s.add, s.delete) for s in svcs],
                                        wm, goals, prot, params.as_tuple(), prev, execs)
        for s in svcs:
            t = got[s.id]
            if not all(oracles.rel_close(a, b) for a, b in zip((t.aw, t.ag, t.tg, t.bw, t.fw, t.total),
                                                              want[s.id])):
                bad.append(("activation", s.id))

        h = Heuristic("h", "x", usage=int(rng.integers(0, 5)), utility=float(rng.uniform(-10, 10)))
        r = float(rng.uniform(-10, 10))
        if not oracles.rel_close(update_utility(h, r).utility, oracles.utility(h.utility, r, h.usage)):
            bad.append(("utility", h.utility, r))
    return bad


def test_criterion_01_formula_oracles():
    t0 = time.perf_counter()
    bad = _formula_cases(np.random.default_rng(2024))
    elapsed = time.perf_counter() - t0
    _check(1, not bad and elapsed < 1.0,
           f"25 cases x 5 formulas, {len(bad)} mismatches, {elapsed:.2f}s")


# 2 ---------------------------------------------------------------------------

def test_criterion_02_buy_food_chaining():
    t0 = time.perf_counter()
    wrong = []
    worst = 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        agent = CognitiveAgent(buy_food_catalog(rng), [buy_food_goal()], rng=rng)
        order = LocalExecutor(agent).run(60, [Stimulus(StimulusClass.EXTERNAL_REQUEST, "request=buy-food")])
        worst = max(worst, agent.cycle)
        if order != BUY_FOOD_ORDER or not agent.finished:
            wrong.append(seed)
    elapsed = time.perf_counter() - t0
    _check(2, not wrong and worst <= 60 and elapsed < 5.0,
           f"50 seeds, {len(wrong)} out of order, max {worst} cycles, {elapsed:.2f}s")


# 3 ---------------------------------------------------------------------------

def test_criterion_03_density_trend(density_runs):
    pfr = [_pfr(density_runs[d]) for d in DENSITIES]
    elapsed = density_runs["elapsed"]
    strictly = pfr[0] > pfr[1] > pfr[2]
    drop = pfr[0] / pfr[2] if pfr[2] > 0 else math.inf
    _check(3, strictly and drop >= 5.0 and elapsed < 120,
           "PFR " + " > ".join(f"{p:.3f}" for p in pfr) + f", drop {drop:.1f}x, {elapsed:.1f}s")


# 4 ---------------------------------------------------------------------------

def test_criterion_04_mobility_trend(density_runs):
    slow = _pfr(density_runs[20])
    fast = _pfr(run_scenario(_flex(density=20, cl=5, mobility="fast"), RUNS))
    _check(4, fast > slow, f"sparse PFR fast {fast:.3f} vs slow {slow:.3f}")


# 5 ---------------------------------------------------------------------------

def test_criterion_05_memory_scalability(density_runs):
    mu5 = mean(r.mu_bytes for r in density_runs[60])
    mu10 = mean(r.mu_bytes for r in run_scenario(_flex(density=60, cl=10, mobility="slow"), RUNS))
    ratio = mu10 / mu5
    _check(5, ratio <= 1.25, f"density 60 slow: MU CL-10 / CL-5 = {ratio:.3f}")


# 6 ---------------------------------------------------------------------------

def _cell(records):
    ok = [r for r in records if r.efr is not None]
    return mean(r.efr for r in ok), mean(r.ct_s for r in ok)


def test_criterion_06_adaptability_ordering():
    worse, better = [], 0
    for mob in ("slow", "medium", "fast"):
        for d in DENSITIES:
            base = SimConfig(mode="adaptability", users=2, density=d, mobility=mob, audit=True)
            e1, t1 = _cell(run_scenario(base, RUNS))
            e2, t2 = _cell(run_scenario(base.with_(params=C2, config_id="C2"), RUNS))
            if e2 > e1 or t2 > t1:
                worse.append(f"{mob}/{d}")
            better += e2 < e1
    _check(6, not worse and better >= 6,
           f"C2 no worse in {9 - len(worse)}/9 cells, strictly lower EFR in {better}/9 (need 6)")


# 7 ---------------------------------------------------------------------------

def test_criterion_07_failover_liveness():
    recs = run_scenario(_flex(density=60, cl=5, fail_active_cm=True), 100)
    killed = [r for r in recs if r.failover.get("killed")]
    completed = sum(r.completed for r in recs)
    requests = sum(r.requests for r in recs)
    dups = sum(r.duplicates for r in recs)
    share = completed / requests
    _check(7, share >= 0.95 and dups == 0 and killed,
           f"{completed}/{requests} completed after CM kill ({len(killed)} kills), {dups} duplicates")


# 8 ---------------------------------------------------------------------------

def test_criterion_08_determinism():
    cells = [SimConfig(density=20, cl=5, mobility="fast"),
             SimConfig(density=40, cl=10, mobility="medium", params=C2, config_id="C2"),
             SimConfig(mode="adaptability", users=2, density=20, mobility="slow"),
             SimConfig(density=60, fail_active_cm=True)]
    diff = []
    for cfg in cells:
        for i in range(3):
            a, b = run_once(cfg, i).row(), run_once(cfg, i).row()
            if ",".join(a) != ",".join(b):
                diff.append((cfg.mode, cfg.density, i))
    _check(8, not diff, f"12 replays across 4 configurations, {len(diff)} differing rows")


# 9 ---------------------------------------------------------------------------

def test_criterion_09_wm_discipline(density_runs):
    recs = [r for d in DENSITIES for r in density_runs[d]]
    recs += run_scenario(SimConfig(mode="adaptability", users=2, density=40, audit=True), 10)
    recs += run_scenario(_flex(density=40, cl=10, mobility="fast"), 10)
    peak = max(r.peak_wm for r in recs)
    audits = sum(r.audit_failures for r in recs)
    _check(9, peak <= 7 and audits == 0,
           f"{len(recs)} audited runs, peak WM {peak}, {audits} audit failures")


# 10 --------------------------------------------------------------------------

def test_criterion_10_activation_persists_on_switch():
    checks = []
    for cfg in (SimConfig(mode="adaptability", users=2, density=40),
                SimConfig(mode="adaptability", users=2, density=40, params=C2, config_id="C2")):
        for r in run_scenario(cfg, 15):
            checks += r.switch_checks
    drops = [c for c in checks if c[2] < c[1]]
    _check(10, checks and not drops,
           f"{len(checks)} shared services at goal switch, {len(drops)} lost activation")
