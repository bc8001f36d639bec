import pytest
from hypothesis import given, strategies as st

from cogcompose.domain import (AbstractService, Catalog, ConcreteService, Goal, Premise, QoSVector,
                               matches_preconditions, premises, register_abstract_service)
from cogcompose.errors import DuplicateId, IntersectionViolation


def test_premise_parse_roundtrip():
    p = Premise.parse("user-location=known")
    assert p == Premise("user-location", "known")
    assert str(p) == "user-location=known"
    assert Premise.parse("ready") == Premise("ready", "true")


def test_premise_needs_key():
    with pytest.raises(ValueError):
        Premise("")


@given(st.text(alphabet="abcxyz-", min_size=1, max_size=8), st.text(alphabet="abc0123", min_size=1, max_size=8))
def test_premise_str_parse_inverse(k, v):
    p = Premise(k, v)
    assert Premise.parse(str(p)) == p


def test_qos_lookup_and_direction():
    q = QoSVector.of(0.9, 0.3)
    assert q["accuracy"] == 0.9 and q.get("latency") == 0.3
    assert q.direction("accuracy") and not q.direction("latency")
    assert q.get("cost") is None
    with pytest.raises(KeyError):
        q["cost"]


def test_matches_preconditions():
    svc = AbstractService("a", premises("x=1", "y=2"), premises("z=3"))
    assert matches_preconditions(premises("x=1", "y=2", "w=0"), svc)
    assert not matches_preconditions(premises("x=1"), svc)
    assert matches_preconditions([Premise("x", "1"), Premise("y", "2")], svc)


def _cs(cid, pre, post):
    return ConcreteService(cid, premises(*pre), premises(*post), QoSVector.of(0.8, 0.2))


def test_register_checks_intersection():
    cat = Catalog()
    cat.add_concrete(_cs("a#0", ["x=1", "y=1"], ["z=1", "info=a"]))
    cat.add_concrete(_cs("a#1", ["x=1"], ["z=1"]))
    # shared conditions are x=1 / z=1
    register_abstract_service(AbstractService("a", premises("x=1"), premises("z=1"),
                                              realizers=("a#0", "a#1")), cat)
    assert "a" in cat.abstract
    with pytest.raises(IntersectionViolation):
        cat.register(AbstractService("b", premises("x=1", "y=1"), premises("z=1"),
                                     realizers=("a#0", "a#1")))


def test_duplicate_ids_rejected():
    cat = Catalog()
    cat.add_concrete(_cs("a#0", ["x=1"], ["z=1"]))
    with pytest.raises(DuplicateId):
        cat.add_concrete(_cs("a#0", ["x=1"], ["z=1"]))
    cat.register(AbstractService("a", premises("x=1"), premises("z=1"), realizers=("a#0",)))
    with pytest.raises(DuplicateId):
        cat.register(AbstractService("a", premises("x=1"), premises("z=1"), realizers=("a#0",)))


def test_goal_requires_targets():
    with pytest.raises(ValueError):
        Goal("g", frozenset())


def test_catalog_universe():
    cat = Catalog()
    cat.add_concrete(_cs("a#0", ["x=1"], ["z=1"]))
    cat.register(AbstractService("a", premises("x=1"), premises("z=1"), realizers=("a#0",)))
    assert cat.premise_universe() == premises("x=1", "z=1")
    assert [s.id for s in cat.services()] == ["a"]
    assert [c.id for c in cat.realizers_of("a")] == ["a#0"]
