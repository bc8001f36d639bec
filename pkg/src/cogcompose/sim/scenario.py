"""Scenario construction: generated service chains, the buy-food example, and file-defined catalogs."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from ..domain import AbstractService, Catalog, ConcreteService, Goal, Premise, QoSVector, premises
from ..errors import ConfigInvalid
from .config import SimConfig


def link(tag: str) -> Premise:
    return Premise("link", tag)


def context_premises(n: int) -> list[Premise]:
    return [Premise("ctx", f"c{j}") for j in range(n)]


@dataclass
class UserPlan:
    goal: Goal
    request: tuple[Premise, ...]
    context: tuple[Premise, ...] = ()
    switch_to: Goal | None = None


@dataclass
class Scenario:
    catalog: Catalog
    users: list[UserPlan]
    chain: tuple[str, ...] = ()
    replacement: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict)

    @property
    def concrete_ids(self) -> list[str]:
        return sorted(self.catalog.concrete)


def relevant_services(catalog: Catalog, targets: frozenset[Premise]) -> set[str]:
    """Services that can contribute, through add lists, to ``targets``."""
    need = set(targets)
    found: set[str] = set()
    changed = True
    while changed:
        changed = False
        for s in catalog.services():
            if s.id not in found and s.add & need:
                found.add(s.id)
                need |= s.preconds
                changed = True
    return found


def _realizers(abstract_id: str, pre, add, k: int, rng: np.random.Generator,
               latency: tuple[float, float]) -> list[ConcreteService]:
    out = []
    for j in range(k):
        acc, u = rng.random(2)
        qos = QoSVector.of(round(0.6 + 0.4 * acc, 6), round(latency[0] + u * (latency[1] - latency[0]), 6))
        out.append(ConcreteService(f"{abstract_id}#{j}", pre, add, qos))
    return out


def generate_scenario(config: SimConfig, rng: np.random.Generator) -> Scenario:
    """A linear chain of ``cl`` services per request, padded with distractors.

    Service ``k`` needs ``link=c{k-1}`` plus a random draw of context
    premises, and adds ``link=c{k}`` plus a few informational outputs. The
    request supplies ``link=c0``; the goal is ``link=c{cl}``. In adaptability
    mode, replacement services branch off before the last chain step and
    lead to the switched-to goal.
    """
    if config.services:
        return scenario_from_spec(config.services, config.goals, config, rng)
    n_rep = config.replacement_services if config.mode == "adaptability" else 0
    total = max(config.abstract_services, config.cl + n_rep)
    ids = [f"svc-{i:02d}" for i in rng.permutation(total)]
    ctx = context_premises(config.context_pool)

    def conds() -> int:
        return int(rng.integers(config.conds_min, config.conds_max + 1))

    def ctx_draw(n: int) -> frozenset[Premise]:
        n = min(n, len(ctx))
        return frozenset(ctx[i] for i in sorted(rng.choice(len(ctx), size=n, replace=False))) if n else frozenset()

    def outputs(tag: str) -> frozenset[Premise]:
        return frozenset(Premise("info", f"{tag}.{j}") for j in range(conds() - 1))

    specs: list[tuple[str, frozenset, frozenset]] = []
    chain, rep = [], []
    for k in range(1, config.cl + 1):
        sid = ids[k - 1]
        chain.append(sid)
        specs.append((sid, frozenset({link(f"c{k-1}")}) | ctx_draw(conds() - 1),
                      frozenset({link(f"c{k}")}) | outputs(f"c{k}")))
    for r in range(1, n_rep + 1):
        sid = ids[config.cl + r - 1]
        rep.append(sid)
        src = link(f"c{config.cl - 1}") if r == 1 else link(f"r{r-1}")
        specs.append((sid, frozenset({src}) | ctx_draw(conds() - 1),
                      frozenset({link(f"r{r}")}) | outputs(f"r{r}")))
    for d in range(total - config.cl - n_rep):
        sid = ids[config.cl + n_rep + d]
        specs.append((sid, frozenset({link(f"x{d}")}) | ctx_draw(conds() - 1),
                      frozenset({link(f"x{d+1}")}) | outputs(f"x{d}")))

    catalog = Catalog()
    for sid, pre, add in sorted(specs):
        reals = _realizers(sid, pre, add, config.concrete_per_abstract, rng, config.latency_range)
        for cs in reals:
            catalog.add_concrete(cs)
        catalog.register(AbstractService(sid, pre, add, realizers=tuple(c.id for c in reals)))

    goal = Goal("g1", frozenset({link(f"c{config.cl}")}))
    new_goal = Goal("g2", frozenset({link(f"r{n_rep}")})) if n_rep else None
    users = [UserPlan(goal, (link("c0"),), tuple(ctx), new_goal) for _ in range(config.users)]
    return Scenario(catalog, users, tuple(chain), tuple(rep))


BUY_FOOD = (
    ("get-location", ["request=buy-food"], ["user-location=known"]),
    ("find-place", ["user-location=known"], ["place-location=known"]),
    ("calculate-distance", ["user-location=known", "place-location=known"], ["distance=known"]),
    ("who-is-nearer", ["distance=known"], ["nearest-user=known"]),
    ("share-shopping-list", ["nearest-user=known"], ["shopping-list=shared"]),
    ("go-to-place", ["shopping-list=shared"], ["food=bought"]),
)
BUY_FOOD_ORDER = [s[0] for s in BUY_FOOD]


def buy_food_catalog(rng: np.random.Generator | None = None, realizers: int = 1) -> Catalog:
    rng = rng if rng is not None else np.random.default_rng(0)
    catalog = Catalog()
    for sid, pre, add in BUY_FOOD:
        reals = _realizers(sid, premises(*pre), premises(*add), realizers, rng, (0.1, 1.0))
        for cs in reals:
            catalog.add_concrete(cs)
        catalog.register(AbstractService(sid, premises(*pre), premises(*add),
                                         realizers=tuple(c.id for c in reals)))
    return catalog


def buy_food_goal() -> Goal:
    return Goal("buy-food", premises("food=bought"))


def _plist(items, where: str) -> frozenset[Premise]:
    if items is None:
        return frozenset()
    if not isinstance(items, (list, tuple)):
        raise ConfigInvalid(f"{where}: expected a list of premises")
    return frozenset(Premise.parse(str(x)) for x in items)


def scenario_from_spec(services: Sequence[Mapping[str, Any]], goals: Sequence[Mapping[str, Any]],
                       config: SimConfig, rng: np.random.Generator) -> Scenario:
    """Build a catalog from the ``services``/``goals`` sections of an experiment file."""
    catalog = Catalog()
    try:
        for s in services:
            sid = str(s["id"])
            pre, add = _plist(s.get("pre"), sid), _plist(s.get("add"), sid)
            delete = _plist(s.get("delete"), sid)
            reals = []
            for j, r in enumerate(s.get("realizers") or [{}]):
                qos = r.get("qos") or {}
                reals.append(ConcreteService(
                    str(r.get("id", f"{sid}#{j}")), pre | _plist(r.get("pre"), sid),
                    add | _plist(r.get("add"), sid),
                    QoSVector.of(float(qos.get("accuracy", 0.8)), float(qos.get("latency", 0.2)))))
            for cs in reals:
                catalog.add_concrete(cs)
            catalog.register(AbstractService(sid, pre, add, delete, tuple(c.id for c in reals)))
        users = []
        for g in goals:
            goal = Goal(str(g["id"]), _plist(g["targets"], str(g["id"])), int(g.get("priority", 1)))
            sw = g.get("switch_to")
            new = Goal(str(sw["id"]), _plist(sw["targets"], str(sw["id"]))) if sw else None
            users.append(UserPlan(goal, tuple(sorted(_plist(g.get("request"), goal.id))),
                                  tuple(sorted(_plist(g.get("context"), goal.id))), new))
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigInvalid(f"bad services/goals section: {e}") from None
    return Scenario(catalog, users)
