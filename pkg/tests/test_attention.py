import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cogcompose.attention import (C1, C2, BehaviorNetwork, FanIn, GlobalParams, NetworkLinks,
                                  normalize_activations, select_service, spread_activation)
from cogcompose.domain import AbstractService, Premise

from oracles import activation_terms, rel_close

POOL = [Premise("p", str(i)) for i in range(8)]


def _random_services(rng, n):
    out = []
    for i in range(n):
        pre = frozenset(rng.choice(POOL, int(rng.integers(1, 4)), replace=False))
        add = frozenset(rng.choice(POOL, int(rng.integers(1, 3)), replace=False))
        dele = frozenset(rng.choice(POOL, int(rng.integers(0, 2)), replace=False))
        out.append(AbstractService(f"s{i}", pre, add, dele))
    return out


def test_terms_match_oracle_randomized():
    rng = np.random.default_rng(21)
    for _ in range(40):
        svcs = _random_services(rng, int(rng.integers(2, 6)))
        wm = frozenset(rng.choice(POOL, int(rng.integers(0, 5)), replace=False))
        goals = frozenset(rng.choice(POOL, 2, replace=False))
        prot = frozenset(rng.choice(POOL, int(rng.integers(0, 2)), replace=False))
        prev = {s.id: float(rng.uniform(0, 40)) * (rng.random() < 0.8) for s in svcs}
        execs = frozenset(s.id for s in svcs if rng.random() < 0.5)
        params = GlobalParams.from_tuple(rng.integers(10, 50, size=5))
        got = spread_activation(svcs, wm, goals, prot, params, prev, executable=execs)
        want = activation_terms([(s.id, s.preconds, s.add, s.delete) for s in svcs],
                                wm, goals, prot, params.as_tuple(), prev, execs)
        for s in svcs:
            t = got[s.id]
            for a, b in zip((t.aw, t.ag, t.tg, t.bw, t.fw, t.total), want[s.id]):
                assert rel_close(a, b)


def test_hand_worked_example():
    x, y, g = Premise("x"), Premise("y"), Premise("g")
    a = AbstractService("a", frozenset({x}), frozenset({y}))
    b = AbstractService("b", frozenset({y}), frozenset({g}))
    p = GlobalParams(30, 20, 20, 20, 20)
    t = spread_activation([a, b], {x}, {g}, set(), p, {"a": 0.0, "b": 10.0})
    # a: AW = 20/1/1, BW from waiting b through y = 10/1/1
    assert t["a"].aw == 20 and t["a"].bw == 10 and t["a"].total == 30
    # b: AG = 20/1/1 plus its own 10
    assert t["b"].ag == 20 and t["b"].total == 30


def test_protected_goal_drains():
    g = Premise("g")
    a = AbstractService("a", frozenset(), frozenset({Premise("h")}), frozenset({g}))
    t = spread_activation([a], set(), set(), {g}, C1, {"a": 5.0})
    assert t["a"].tg == 20 and t["a"].total == 0.0


def test_links_and_fan_in():
    x, y = Premise("x"), Premise("y")
    a = AbstractService("a", frozenset({x}), frozenset({y}))
    b = AbstractService("b", frozenset({y}), frozenset(), frozenset({x}))
    links = NetworkLinks.of([a, b])
    assert ("a", "b", y) in links.successor and ("b", "a", y) in links.predecessor
    assert ("a", "b", x) in links.conflicter
    fan = FanIn.of([a, b])
    assert fan.pre == {x: 1, y: 1} and fan.add == {y: 1} and fan.delete == {x: 1}


def test_normalize_mean():
    out = normalize_activations({"a": 1.0, "b": 3.0}, 20)
    assert out == {"a": 10.0, "b": 30.0}
    assert normalize_activations({"a": 0.0}, 20) == {"a": 0.0}
    with pytest.raises(ValueError):
        normalize_activations({"a": 1.0}, 0)


@given(st.dictionaries(st.sampled_from("abcdefg"), st.one_of(st.just(0.0), st.floats(1e-6, 1e4)),
                       min_size=1),
       st.floats(1, 100))
def test_normalize_property(acts, pi):
    out = normalize_activations(acts, pi)
    if sum(acts.values()) > 0:
        assert np.isclose(np.mean(list(out.values())), pi)


@given(st.dictionaries(st.sampled_from("abcdef"), st.floats(0, 100), min_size=1),
       st.floats(0.1, 100), st.sets(st.sampled_from("abcdef")))
def test_select_is_thresholded_argmax(acts, theta, execs):
    chosen = select_service(acts, theta, execs)
    eligible = [s for s in execs if acts.get(s, 0.0) >= theta]
    if not eligible:
        assert chosen is None
    else:
        best = max(acts.get(s, 0.0) for s in eligible)
        assert chosen in eligible and acts[chosen] == best
        assert chosen == min(s for s in eligible if acts.get(s, 0.0) == best)


def test_tie_goes_to_smaller_id():
    assert select_service({"b": 40.0, "a": 40.0}, 30, {"a", "b"}) == "a"


def test_threshold_decays_and_resets():
    x, g = Premise("x"), Premise("g")
    a = AbstractService("a", frozenset({x}), frozenset({g}))
    idle = AbstractService("b", frozenset({Premise("never")}), frozenset({Premise("other")}))
    bn = BehaviorNetwork([a, idle], C1)
    assert bn.step(0, frozenset(), {g}, set(), []) is None
    assert bn.theta == pytest.approx(27.0)
    assert bn.step(1, frozenset({x}), {g}, set(), ["a"]) == "a"
    # a holds all the energy, so it normalises to twice the mean
    assert bn.theta == 30 and bn.activation["a"] == 0.0


def test_named_configs():
    assert C1.as_tuple() == (30, 20, 20, 20, 20)
    assert C2.as_tuple() == (22, 27, 42, 23, 18)
    with pytest.raises(ValueError):
        GlobalParams(0, 1, 1, 1, 1)


def test_trace_export(tmp_path):
    x, g = Premise("x"), Premise("g")
    bn = BehaviorNetwork([AbstractService("a", frozenset({x}), frozenset({g}))], C2)
    bn.record_trace = True
    bn.step(0, frozenset({x}), {g}, set(), ["a"])
    path = tmp_path / "bn.csv"
    bn.export_trace(path)
    rows = list(csv.DictReader(open(path)))
    assert rows[0]["service"] == "a" and rows[0]["selected"] == "1"


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_activation_never_negative(seed):
    rng = np.random.default_rng(seed)
    svcs = _random_services(rng, 5)
    bn = BehaviorNetwork(svcs, GlobalParams.from_tuple(rng.integers(10, 50, size=5)))
    for c in range(15):
        wm = frozenset(rng.choice(POOL, int(rng.integers(0, 5)), replace=False))
        execs = [s.id for s in svcs if s.preconds <= wm]
        bn.step(c, wm, set(POOL[:2]), set(POOL[6:7]), execs)
        assert all(v >= 0 for v in bn.activation.values())
