"""Selective attention as a spreading-activation behavior network.

Each abstract service is a node. Per cycle every node receives

* ``AW``: energy from active working-memory premises in its precondition list,
* ``AG``: energy from goals in its add list,
* ``TG``: energy removed for protected goals it would delete,
* ``BW``: energy spread backward from successors still waiting on it,
* ``FW``: energy spread forward from executable predecessors,

on top of its previous activation. The fan-in divisors ``M_j``, ``X_j`` and
``U_j`` count how many services share premise ``j`` in their precondition,
add and delete lists.
"""
from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .domain import AbstractService, Premise


@dataclass(frozen=True)
class GlobalParams:
    """``(theta, pi, phi, gamma, delta)``: threshold, mean level, WM, goal and protected-goal energy."""

    theta: float
    pi: float
    phi: float
    gamma: float
    delta: float

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if min(self.pi, self.phi, self.gamma, self.delta) < 0:
            raise ValueError("global parameters must be non-negative")

    @classmethod
    def from_tuple(cls, values: Sequence[float]) -> "GlobalParams":
        theta, pi, phi, gamma, delta = (float(v) for v in values)
        return cls(theta, pi, phi, gamma, delta)

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.theta, self.pi, self.phi, self.gamma, self.delta)

    def scaled(self, c: float) -> "GlobalParams":
        return GlobalParams(self.theta * c, self.pi, self.phi * c, self.gamma * c, self.delta * c)


C1 = GlobalParams(30, 20, 20, 20, 20)
C2 = GlobalParams(22, 27, 42, 23, 18)
NAMED_CONFIGS = {"C1": C1, "C2": C2}


@dataclass
class FanIn:
    pre: dict[Premise, int] = field(default_factory=dict)
    add: dict[Premise, int] = field(default_factory=dict)
    delete: dict[Premise, int] = field(default_factory=dict)

    @classmethod
    def of(cls, services: Iterable[AbstractService]) -> "FanIn":
        m, x, u = defaultdict(int), defaultdict(int), defaultdict(int)
        for s in services:
            for j in s.preconds:
                m[j] += 1
            for j in s.add:
                x[j] += 1
            for j in s.delete:
                u[j] += 1
        return cls(dict(m), dict(x), dict(u))


@dataclass
class NetworkLinks:
    successor: set[tuple[str, str, Premise]]
    predecessor: set[tuple[str, str, Premise]]
    conflicter: set[tuple[str, str, Premise]]

    @classmethod
    def of(cls, services: Sequence[AbstractService]) -> "NetworkLinks":
        succ, pred, conf = set(), set(), set()
        for a in services:
            for b in services:
                if a.id == b.id:
                    continue
                for w in a.add & b.preconds:
                    succ.add((a.id, b.id, w))
                    pred.add((b.id, a.id, w))
                for w in b.delete & a.preconds:
                    conf.add((a.id, b.id, w))
        return cls(succ, pred, conf)


@dataclass
class ActivationTerms:
    aw: float = 0.0
    ag: float = 0.0
    tg: float = 0.0
    bw: float = 0.0
    fw: float = 0.0
    previous: float = 0.0

    @property
    def total(self) -> float:
        return max(0.0, self.previous + self.aw + self.ag - self.tg + self.bw + self.fw)


def spread_activation(services: Sequence[AbstractService], wm_active: Iterable[Premise],
                      goals: Iterable[Premise], protected_goals: Iterable[Premise],
                      params: GlobalParams, previous: Mapping[str, float] | None = None,
                      fan_in: FanIn | None = None,
                      executable: Iterable[str] | None = None) -> dict[str, ActivationTerms]:
    """One round of spreading activation; returns the per-service terms.

    ``executable`` defaults to the services whose preconditions are all in
    ``wm_active``. Zero fan-in terms contribute nothing. Premises are summed
    in sorted order so results do not depend on set iteration order.
    """
    w = frozenset(wm_active)
    g = frozenset(goals)
    pg = frozenset(protected_goals)
    prev = previous or {}
    fan = fan_in or FanIn.of(services)
    execs = (frozenset(executable) if executable is not None
             else frozenset(s.id for s in services if s.preconds <= w))
    ratio = params.phi / params.gamma if params.gamma else 0.0

    out: dict[str, ActivationTerms] = {}
    for s in services:
        t = ActivationTerms(previous=prev.get(s.id, 0.0))
        npre, nadd, ndel = len(s.preconds), len(s.add), len(s.delete)
        for j in sorted(s.preconds & w):
            if fan.pre.get(j):
                t.aw += params.phi / fan.pre[j] / npre
        for j in sorted(s.add & g):
            if fan.add.get(j):
                t.ag += params.gamma / fan.add[j] / nadd
        for j in sorted(s.delete & pg):
            if fan.delete.get(j):
                t.tg += params.delta / fan.delete[j] / ndel
        if nadd:
            for other in services:
                if other.id == s.id:
                    continue
                a_other = prev.get(other.id, 0.0)
                if not a_other:
                    continue
                if other.id not in execs:
                    for j in sorted((s.add & other.preconds) - w):
                        t.bw += a_other / fan.add[j] / nadd
                else:
                    for j in sorted((other.add & s.preconds) - w):
                        t.fw += a_other * ratio / fan.add[j] / nadd
        out[s.id] = t
    return out


def normalize_activations(activations: Mapping[str, float], pi: float) -> dict[str, float]:
    """Rescale so the mean activation equals ``pi``; all-zero input is returned as is."""
    if pi <= 0:
        raise ValueError("pi must be positive")
    if not activations:
        return {}
    mean = sum(activations.values()) / len(activations)
    if mean == 0:
        return dict(activations)
    f = pi / mean
    return {k: v * f for k, v in activations.items()}


def select_service(activations: Mapping[str, float], theta: float,
                   executable: Iterable[str]) -> str | None:
    """Highest-activation executable service at or above ``theta``; ties go to the smaller id."""
    best = None
    for sid in sorted(executable):
        a = activations.get(sid, 0.0)
        if a >= theta and (best is None or a > activations[best]):
            best = sid
    return best


class BehaviorNetwork:
    """Stateful wrapper: carries activations and the adaptive threshold across cycles."""

    THETA_DECAY = 0.9

    def __init__(self, services: Sequence[AbstractService], params: GlobalParams,
                 normalize_every_cycle: bool = True):
        self.services = list(sorted(services, key=lambda s: s.id))
        self.params = params
        self.theta = params.theta
        self.normalize_every_cycle = normalize_every_cycle
        self.fan_in = FanIn.of(self.services)
        self.activation: dict[str, float] = {s.id: 0.0 for s in self.services}
        self.last_terms: dict[str, ActivationTerms] = {}
        self.trace: list[dict] = []
        self.record_trace = False

    def set_params(self, params: GlobalParams) -> None:
        self.params = params
        self.theta = params.theta

    def step(self, cycle: int, wm_active: frozenset[Premise], goals: Iterable[Premise],
             protected_goals: Iterable[Premise], executable: Iterable[str],
             selectable: Iterable[str] | None = None) -> str | None:
        """Spread, normalise and select; ``selectable`` defaults to ``executable``."""
        execs = frozenset(executable)
        terms = spread_activation(self.services, wm_active, goals, protected_goals,
                                  self.params, self.activation, self.fan_in, execs)
        self.last_terms = terms
        raw = {k: t.total for k, t in terms.items()}
        acts = normalize_activations(raw, self.params.pi) if self.normalize_every_cycle else raw
        chosen = select_service(acts, self.theta, execs if selectable is None else selectable)
        if self.record_trace:
            for sid, t in terms.items():
                self.trace.append({"cycle": cycle, "service": sid, "AW": t.aw, "AG": t.ag,
                                   "TG": t.tg, "BW": t.bw, "FW": t.fw, "raw": t.total,
                                   "total": acts[sid], "theta": self.theta,
                                   "selected": int(sid == chosen)})
        self.activation = acts
        if chosen is None:
            self.theta *= self.THETA_DECAY
        else:
            self.activation[chosen] = 0.0
            self.theta = self.params.theta
        return chosen

    def export_trace(self, path: str | Path) -> None:
        fields = ["cycle", "service", "AW", "AG", "TG", "BW", "FW", "raw", "total", "theta", "selected"]
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=fields)
            w.writeheader()
            for row in self.trace:
                w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()})
