"""Devices, proximity groups, CM election and the binary-star failover protocol."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .domain import Premise
from .errors import CrossSessionDenied, GroupOrphaned, NoCMCapableDevice

COMM_RANGE = 250.0
HEARTBEAT_TIMEOUT = 3

VARIANT_BY_LEVEL = {0: "minimal", 1: "lightweight", 2: "full", 3: "full"}


@dataclass
class Device:
    did: str
    level: int
    position: tuple[float, float] = (0.0, 0.0)
    hosted: tuple[str, ...] = ()
    owner: str | None = None
    gid: str | None = None
    sid: str | None = None
    alive: bool = True
    completed: int = 0
    attempted: int = 0
    mean_ct: float | None = None

    def __post_init__(self):
        if self.level not in (0, 1, 2, 3):
            raise ValueError(f"device level must be 0..3, got {self.level}")

    @property
    def variant(self) -> str:
        return VARIANT_BY_LEVEL[self.level]

    @property
    def cm_capable(self) -> bool:
        return self.level >= 1


def performance(dev: Device, ct_scale: float = 60.0) -> float:
    """``0.5 * completion rate + 0.5 * (1 - normalised composition time)``; 0.5 without history."""
    if dev.attempted == 0:
        return 0.5
    rate = dev.completed / dev.attempted
    ct = 0.0 if dev.mean_ct is None else min(dev.mean_ct / ct_scale, 1.0)
    return 0.5 * rate + 0.5 * (1.0 - ct)


def rank(dev: Device, per: float | None = None) -> float:
    return dev.level * (performance(dev) if per is None else per)


@dataclass
class Group:
    gid: str
    members: tuple[str, ...]
    active: str | None = None
    passive: str | None = None


@dataclass
class Session:
    sid: str
    owner: str
    groups: tuple[str, ...] = ()


def form_groups(devices: Sequence[Device], comm_range: float = COMM_RANGE) -> list[Group]:
    """Connected components of the proximity graph, ids assigned in member order."""
    live = [d for d in devices if d.alive]
    if not live:
        return []
    labels = components([d.position for d in live], comm_range)
    by_label: dict[int, list[str]] = {}
    for d, lab in zip(live, labels):
        by_label.setdefault(int(lab), []).append(d.did)
    groups = []
    for i, members in enumerate(sorted(by_label.values(), key=lambda m: min(m))):
        g = Group(f"g{i}", tuple(sorted(members)))
        groups.append(g)
    return groups


def components(positions, comm_range: float, alive=None) -> np.ndarray:
    """Component label per node; dead nodes relay nothing and end up alone."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    diff = pos[:, None, :] - pos[None, :, :]
    adj = (diff ** 2).sum(-1) <= comm_range ** 2
    if alive is not None:
        up = np.asarray(alive, dtype=bool)
        adj &= up[:, None] & up[None, :]
    _, labels = connected_components(csr_matrix(adj), directed=False)
    return labels


def elect_cms(members: Iterable[Device], per: Mapping[str, float] | None = None) -> tuple[str, str | None]:
    """Top two CM-capable devices by ``R = Pri * Per``; ties go to the smaller DID."""
    per = per or {}
    capable = [d for d in members if d.cm_capable and d.alive]
    if not capable:
        raise NoCMCapableDevice("no device of level >= 1 in group")
    order = sorted(capable, key=lambda d: (-rank(d, per.get(d.did)), d.did))
    return order[0].did, (order[1].did if len(order) > 1 else None)


class MsgKind(str, Enum):
    HEARTBEAT = "HEARTBEAT"
    PLAN_UPDATE = "PLAN_UPDATE"
    PROMOTE = "PROMOTE"
    JOIN_PASSIVE = "JOIN_PASSIVE"
    SUBGOAL_REQUEST = "SUBGOAL_REQUEST"
    PARTIAL_PLAN = "PARTIAL_PLAN"


@dataclass(frozen=True)
class Message:
    kind: MsgKind
    sender: str
    gid: str
    seq: int
    payload: object = None


class BinaryStar:
    """Active/passive CM pair for one group.

    The active sends a heartbeat every tick and piggybacks the latest plan
    snapshot. The passive counts silent ticks; after ``timeout`` of them it
    promotes itself and recruits the best remaining capable member.
    """

    def __init__(self, group: Group, devices: Mapping[str, Device], timeout: int = HEARTBEAT_TIMEOUT):
        self.group = group
        self.devices = devices
        self.timeout = timeout
        self.seq = itertools.count()
        self.epoch = 0
        self.missed = 0
        self.snapshot: object = None
        self.log: list[Message] = []
        self.group.active, self.group.passive = elect_cms(self._members())

    def _members(self) -> list[Device]:
        return [self.devices[m] for m in self.group.members]

    def _send(self, kind: MsgKind, sender: str, payload=None) -> Message:
        m = Message(kind, sender, self.group.gid, next(self.seq), payload)
        self.log.append(m)
        return m

    @property
    def active(self) -> str | None:
        return self.group.active

    @property
    def passive(self) -> str | None:
        return self.group.passive

    def replicate(self, snapshot: object) -> None:
        """PLAN_UPDATE from active to passive."""
        if self.group.active and self.devices[self.group.active].alive:
            self._send(MsgKind.PLAN_UPDATE, self.group.active)
            if self.group.passive and self.devices[self.group.passive].alive:
                self.snapshot = snapshot

    def tick(self) -> list[Message]:
        """Advance one heartbeat period; returns the protocol messages emitted."""
        out = []
        act = self.group.active
        if act is not None and self.devices[act].alive:
            out.append(self._send(MsgKind.HEARTBEAT, act))
            self.missed = 0
        else:
            self.missed += 1
        pas = self.group.passive
        if pas is not None and not self.devices[pas].alive:
            self.group.passive = None
            pas = None
        if act is not None and self.devices[act].alive and pas is None:
            out += self._recruit()
            return out
        if self.missed >= self.timeout or act is None:
            out += self._failover()
        return out

    def _recruit(self) -> list[Message]:
        rest = [d for d in self._members() if d.did != self.group.active]
        try:
            new, _ = elect_cms(rest)
        except NoCMCapableDevice:
            return []
        self.group.passive = new
        return [self._send(MsgKind.JOIN_PASSIVE, new)]

    def _failover(self) -> list[Message]:
        out = []
        pas = self.group.passive
        if pas is not None and self.devices[pas].alive:
            self.group.active, self.group.passive = pas, None
            out.append(self._send(MsgKind.PROMOTE, pas))
        else:
            try:
                self.group.active, _ = elect_cms(self._members())
            except NoCMCapableDevice:
                self.group.active = self.group.passive = None
                raise GroupOrphaned(self.group.gid) from None
            self.snapshot = None
            out.append(self._send(MsgKind.PROMOTE, self.group.active))
        self.epoch += 1
        self.missed = 0
        out += self._recruit()
        return out


@dataclass(frozen=True)
class PlanStep:
    service: str
    preconds: frozenset[Premise]
    add: frozenset[Premise]


@dataclass
class PartialPlan:
    gid: str
    steps: tuple[PlanStep, ...]
    goal: frozenset[Premise] = frozenset()

    def open_preconditions(self) -> frozenset[Premise]:
        have: set[Premise] = set()
        need: set[Premise] = set()
        for s in self.steps:
            need |= s.preconds - have
            have |= s.add
        return frozenset(need)


@dataclass
class CompositePlan:
    steps: tuple[PlanStep, ...]
    subgoals: tuple[Premise, ...] = ()
    sources: tuple[str, ...] = field(default_factory=tuple)


def merge_partial_plans(global_cm: Device, partials: Sequence[PartialPlan],
                        initial: Iterable[Premise] = ()) -> CompositePlan:
    """Stitch per-group fragments into one plan, first feasible order wins.

    A fragment is placed once every open precondition is available from the
    initial state or from fragments already placed. Steps shared between
    fragments appear once. Whatever cannot be resolved is returned as
    subgoals for the local CMs.
    """
    if global_cm.level != 3:
        raise CrossSessionDenied(f"{global_cm.did} is level {global_cm.level}")
    if len(partials) == 1:
        p = partials[0]
        return CompositePlan(p.steps, tuple(sorted(p.open_preconditions() - set(initial))), (p.gid,))
    have = set(initial)
    placed: list[PartialPlan] = []
    pending = list(partials)
    progress = True
    while pending and progress:
        progress = False
        for p in list(pending):
            if p.open_preconditions() <= have | _shared_effects(p, placed):
                placed.append(p)
                pending.remove(p)
                for s in p.steps:
                    have |= s.add
                progress = True
                break
    # leftovers go in anyway, in input order, with their gaps as subgoals
    placed += pending
    steps: list[PlanStep] = []
    seen = set()
    for p in placed:
        for s in p.steps:
            if s.service not in seen:
                seen.add(s.service)
                steps.append(s)
    have = set(initial)
    missing: set[Premise] = set()
    for s in steps:
        missing |= s.preconds - have
        have |= s.add
    return CompositePlan(tuple(steps), tuple(sorted(missing)), tuple(p.gid for p in placed))


def _shared_effects(p: PartialPlan, placed: list[PartialPlan]) -> set[Premise]:
    out: set[Premise] = set()
    done = {s.service for q in placed for s in q.steps}
    for s in p.steps:
        if s.service in done:
            out |= s.add
    return out
