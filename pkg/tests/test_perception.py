import numpy as np
import pytest
from hypothesis import given, strategies as st

from cogcompose.domain import Premise
from cogcompose.errors import UnknownStimulusClass
from cogcompose.perception import (FeatureDetector, Perception, Stimulus, StimulusClass,
                                   decay_activation)

from oracles import percept_activation, rel_close


def test_decay_matches_oracle_randomized():
    rng = np.random.default_rng(11)
    for _ in range(50):
        sal = int(rng.integers(1, 11))
        cc = int(rng.integers(0, 500))
        assert rel_close(decay_activation(sal, cc), percept_activation(sal, cc))


def test_decay_fixed_values():
    assert decay_activation(9, 0) == 9.0
    assert decay_activation(9, 2) == 9.0
    assert decay_activation(8, 4) == 4.0
    assert decay_activation(6, 8) == 2.0


@given(st.integers(1, 10), st.integers(0, 2000), st.integers(0, 2000))
def test_decay_monotone(sal, a, b):
    lo, hi = sorted((a, b))
    assert decay_activation(sal, hi) <= decay_activation(sal, lo) <= sal


@given(st.integers(1, 10), st.integers(1, 10), st.integers(0, 1000))
def test_equal_age_keeps_salience_order(s1, s2, cc):
    if s1 < s2:
        assert decay_activation(s1, cc) < decay_activation(s2, cc)


def test_request_is_more_salient_than_network_glitch():
    p = Perception()
    out, _ = p.perceive([Stimulus(StimulusClass.EXTERNAL_REQUEST, "plan party"),
                         Stimulus(StimulusClass.PHYSICAL_CONTEXT, "temporary wifi disconnection")], 0)
    by_key = {pc.premise.key: pc for pc in out}
    assert by_key["goal"].premise == Premise("goal", "plan-party")
    assert by_key["goal"].salience == 9
    assert by_key["network"].salience == 2


def test_empty_stimuli():
    assert Perception().perceive([], 3) == ([], [])


def test_restimulation_refreshes():
    p = Perception()
    p.perceive([Stimulus(StimulusClass.USER_CONTEXT, "loc=home")], 0)
    p.decay(10)
    faded = p.percepts[Premise("loc", "home")].activation
    assert faded < 5
    out, _ = p.perceive([Stimulus(StimulusClass.USER_CONTEXT, "loc=home")], 10)
    assert out[0].last_stimulated == 10 and out[0].activation == 5.0
    assert out[0].birth_cycle == 0


def test_cull_below_tenth_of_salience():
    p = Perception()
    p.perceive([Stimulus(StimulusClass.USER_CONTEXT, "a=1")], 0)
    p.decay(1024)  # 5 / log2(1024) is exactly half a unit
    assert len(p) == 1
    p.decay(1025)
    assert len(p) == 0


def test_retraction():
    p = Perception()
    p.perceive([Stimulus(StimulusClass.INTERNAL_SIGNAL, "a=1")], 0)
    out, gone = p.perceive([Stimulus(StimulusClass.INTERNAL_SIGNAL, "a=1", retract=True)], 1)
    assert out == [] and gone == [Premise("a", "1")] and len(p) == 0


def test_unknown_class():
    p = Perception(detectors={})
    with pytest.raises(UnknownStimulusClass):
        p.perceive([Stimulus(StimulusClass.USER_CONTEXT, "x=1")], 0)


def test_custom_detector():
    p = Perception()
    p.register(FeatureDetector(StimulusClass.SERVICE_QOS, 4, extract=lambda s: Premise("lat", "high")))
    out, _ = p.perceive([Stimulus(StimulusClass.SERVICE_QOS, {"latency": 3.0})], 0)
    assert out[0].premise == Premise("lat", "high") and out[0].salience == 4


def test_deterministic():
    a, b = Perception(), Perception()
    s = [Stimulus(StimulusClass.USER_CONTEXT, "Walking fast")]
    assert a.perceive(s, 0)[0][0].premise == b.perceive(s, 0)[0][0].premise
