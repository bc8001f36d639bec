import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cogcompose.errors import ConfigInvalid
from cogcompose.sim import SimConfig, load_experiment, run_once, run_scenario, to_csv
from cogcompose.sim.config import expand_grid, resolve_params
from cogcompose.sim.events import EventKind, EventQueue
from cogcompose.sim.metrics import (CSV_COLUMNS, MemoryLedger, aggregate, format_report,
                                    read_csv, write_csv)
from cogcompose.sim.mobility import Walker, reflect, step_mobility
from cogcompose.sim.scenario import generate_scenario, link, relevant_services

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_events_pop_in_time_then_insertion_order():
    q = EventQueue()
    q.push(100, EventKind.HEARTBEAT, n=1)
    q.push(50, EventKind.MOVE_STEP, n=2)
    q.push(100, EventKind.MESSAGE, n=3)
    q.push(200, EventKind.NODE_FAIL, n=4)
    assert [e.payload["n"] for e in q.pop_due(100)] == [2, 1, 3]
    assert len(q) == 1


def test_event_in_past_rejected():
    q = EventQueue()
    q.pop_due(500)
    with pytest.raises(ValueError):
        q.push(400, EventKind.STIMULUS)


def test_reflect_fixed():
    assert reflect(12.0, 0.0, 10.0) == (8.0, True)
    assert reflect(-3.0, 0.0, 10.0) == (3.0, True)
    assert reflect(5.0, 0.0, 10.0) == (5.0, False)


@given(st.floats(-1e4, 1e4), st.floats(0, 20), st.floats(0, 2 * math.pi))
def test_walk_stays_in_arena(x, speed, heading):
    pos = (min(max(x, 0.0), 100.0), 50.0)
    (nx, ny), _ = step_mobility(pos, heading, speed, 3.0, (100.0, 100.0))
    assert 0 <= nx <= 100 and 0 <= ny <= 100


def test_walker_speed_class():
    w = Walker((0.0, 0.0), np.random.default_rng(1), "fast")
    w.advance(0.0, 0.25, (1000.0, 1000.0))
    assert 8.0 <= w.speed <= 13.0


def test_ledger_peak():
    led = MemoryLedger()
    led.charge("p", 10)
    led.charge("p", -10)
    led.charge("p", 5)
    assert led.peak["p"] == 10 and led.current["p"] == 5
    with pytest.raises(ValueError):
        led.charge("p", -6)


def test_ledger_mean_of_peaks():
    led = MemoryLedger()
    led.charge("a", 10)
    led.set("b", 30)
    assert led.peak_mu() == 20
    assert MemoryLedger().peak_mu() == 0.0


def test_csv_roundtrip(tmp_path):
    recs = run_scenario(SimConfig(density=20, runs=2, cl=3))
    path = tmp_path / "m.csv"
    write_csv(recs, path)
    rows = read_csv(path)
    assert list(rows[0]) == CSV_COLUMNS
    assert [r["seed"] for r in rows] == ["0", "1"]
    assert path.read_text() == to_csv(recs)
    cells = aggregate(rows)
    assert len(cells) == 1 and cells[0]["runs"] == 2
    assert "slow" in format_report(cells)


def test_config_validation():
    with pytest.raises(ConfigInvalid):
        SimConfig(mobility="jet")
    with pytest.raises(ConfigInvalid):
        SimConfig(density=0, cl=0)
    with pytest.raises(ConfigInvalid):
        resolve_params("C9")
    assert resolve_params([22, 27, 42, 23, 18])[1] == "C2"


def test_shipped_configs_load():
    for name in ("buy_food.yaml", "flexibility.yaml", "adaptability.yaml"):
        exp = load_experiment(CONFIGS / name)
        assert isinstance(exp.simulation, SimConfig)
    assert load_experiment(CONFIGS / "adaptability.yaml").simulation.mode == "adaptability"


def test_bad_file(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("simulation:\n  warp: 9\n")
    with pytest.raises(ConfigInvalid):
        load_experiment(p)
    with pytest.raises(ConfigInvalid):
        load_experiment(tmp_path / "missing.yaml")


def test_expand_grid():
    cells = expand_grid(SimConfig(), {"density": [20, 40], "attention": ["C1", "C2"]})
    assert [(c.config_id, c.density) for c in cells] == [("C1", 20), ("C1", 40), ("C2", 20), ("C2", 40)]


def test_no_users_warns_and_reports_zero():
    with pytest.warns(RuntimeWarning):
        rec = run_once(SimConfig(users=0, runs=1))
    assert rec.pfr == 0.0 and rec.efr is None
    assert rec.row()[CSV_COLUMNS.index("EFR")] == "NA"


def test_same_seed_same_row():
    cfg = SimConfig(density=20, cl=4, mobility="medium")
    assert run_once(cfg, 3).row() == run_once(cfg, 3).row()


def test_generated_chain_is_linked():
    cfg = SimConfig(cl=5, mode="adaptability")
    sc = generate_scenario(cfg, np.random.default_rng(0))
    assert len(sc.chain) == 5 and len(sc.replacement) == 2
    user = sc.users[0]
    assert user.request == (link("c0"),) and user.goal.targets == {link("c5")}
    assert user.switch_to.targets == {link("r2")}
    needed = relevant_services(sc.catalog, user.goal.targets)
    assert set(sc.chain) <= needed
    for k, sid in enumerate(sc.chain, start=1):
        s = sc.catalog.abstract[sid]
        assert link(f"c{k-1}") in s.preconds and link(f"c{k}") in s.add
        assert len(s.realizers) == cfg.concrete_per_abstract


def test_buy_food_file_completes():
    exp = load_experiment(CONFIGS / "buy_food.yaml")
    recs = run_scenario(exp.simulation, runs=3)
    assert all(r.pfr == 0.0 for r in recs)
