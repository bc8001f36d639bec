"""The cognitive cycle tying perception, memory, attention and binding together.

One call to :meth:`CognitiveAgent.run_cycle` is one 50 ms model-time step:
perceive, write WM, cue declarative memory, write its output to WM, filter
WM to the active set, spread activation and select, bind a realizer,
schedule, then pop the top due action.
"""
from __future__ import annotations

import copy
import heapq
import itertools
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .attention import C1, BehaviorNetwork, GlobalParams
from .declarative import DeclarativeMemory, PremiseCodec
from .domain import AbstractService, Catalog, ConcreteService, Goal, Premise
from .errors import GoalNotSatisfied, NoReachableRealizer
from .perception import Perception, Stimulus, StimulusClass
from .procedural import (REWARD_FAILURE, REWARD_SUCCESS, ProceduralMemory, bind_concrete,
                         default_binding_heuristics)
from .working_memory import (DECLARATIVE, INTERNAL, PHYSICAL_CONTEXT, USER_CONTEXT,
                             WorkingMemory, WorkingMemoryConfig)

CYCLE_SECONDS = 0.05

# bytes charged to the memory ledger per live structure
UNIT_BYTES = 64
PERCEPT_BYTES = 48
NODE_BYTES = 16
STEP_BYTES = 32
PAGE_BYTES = 256

_VOLATILITY = {
    StimulusClass.EXTERNAL_REQUEST: USER_CONTEXT,
    StimulusClass.USER_CONTEXT: USER_CONTEXT,
    StimulusClass.PHYSICAL_CONTEXT: PHYSICAL_CONTEXT,
    StimulusClass.SERVICE_QOS: PHYSICAL_CONTEXT,
    StimulusClass.INTERNAL_SIGNAL: INTERNAL,
}

UNRELIABLE = Premise("status", "unreliable")


def provider_key(concrete_id: str) -> Premise:
    return Premise("realizer", concrete_id)


class ActionKind(str, Enum):
    SERVICE_EXECUTION = "service-execution"
    GOAL_SETTING = "goal-setting"
    EFFECTOR = "effector"
    DISCOVERY = "discovery"


@dataclass
class AgentAction:
    kind: ActionKind
    payload: object
    priority: int = 1
    scheduled_cycle: int = 0
    service: str | None = None  # abstract id for service executions

    def __post_init__(self):
        if self.kind is ActionKind.SERVICE_EXECUTION and not isinstance(self.payload, str):
            raise ValueError("service-execution actions carry a bound concrete service id")


class ActionScheduler:
    """Priority queue: higher priority first, FIFO within a priority, future actions held back."""

    def __init__(self):
        self._heap: list[tuple[int, int, AgentAction]] = []
        self._seq = itertools.count()

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, action: AgentAction) -> "ActionScheduler":
        heapq.heappush(self._heap, (-action.priority, next(self._seq), action))
        return self

    def next_action(self, cycle: int) -> AgentAction | None:
        held = []
        found = None
        while self._heap:
            item = heapq.heappop(self._heap)
            if item[2].scheduled_cycle <= cycle:
                found = item[2]
                break
            held.append(item)
        for item in held:
            heapq.heappush(self._heap, item)
        return found

    def clear(self) -> None:
        self._heap.clear()


@dataclass
class CycleState:
    """The per-cycle working sets, kept for inspection and the event log."""

    cycle: int = 0
    P: list = field(default_factory=list)
    W: frozenset = frozenset()
    D: set = field(default_factory=set)
    A: dict = field(default_factory=dict)
    C: str | None = None
    R: AgentAction | None = None
    G: int = 0


class CognitiveAgent:
    """A single composition agent.

    ``realizer_filter`` lets the host narrow the candidate realizers of a
    selected service to the ones it believes reachable; the agent further
    drops any realizer its provider memory recalls as unreliable.
    """

    def __init__(self, catalog: Catalog, goals: Iterable[Goal] = (), params: GlobalParams = C1,
                 name: str = "agent", rng: np.random.Generator | None = None,
                 wm_config: WorkingMemoryConfig | None = None,
                 perception: Perception | None = None,
                 declarative: DeclarativeMemory | None = None,
                 procedural: ProceduralMemory | None = None,
                 salience_gate: float = 1.0, fact_refresh: int = 10,
                 inhibit_cycles: int = 20,
                 realizer_filter: Callable[[AbstractService, list[ConcreteService]], list[ConcreteService]] | None = None,
                 time_sensitive: bool = False, audit: bool = False, log_events: bool = False):
        self.name = name
        self.catalog = catalog
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.perception = perception or Perception()
        self.wm = WorkingMemory(wm_config)
        self.dm = declarative or DeclarativeMemory(PremiseCodec(seed=0), rng=self.rng)
        self.pm = procedural or ProceduralMemory()
        if not self.pm.heuristics:
            for h in default_binding_heuristics():
                self.pm.add(h)
        self.bn = BehaviorNetwork(catalog.services(), params)
        self.scheduler = ActionScheduler()
        self.salience_gate = salience_gate
        self.fact_refresh = fact_refresh
        self.inhibit_cycles = inhibit_cycles
        self.realizer_filter = realizer_filter
        self.time_sensitive = time_sensitive
        self.audit = audit
        self.log_events = log_events

        self.cycle = 0
        self.goals: list[Goal] = []
        self.protected: list[Goal] = []
        self.facts: set[Premise] = set()
        self.done: dict[str, int] = {}
        self.reopened: dict[str, int] = {}
        self.in_flight: dict[str, str] = {}
        self.inhibited: dict[str, int] = {}
        self.executed: list[tuple[int, str, str]] = []
        self.tokens: list[tuple[str, int]] = []
        self.replans = 0
        self.audit_failures: list[str] = []
        self.events: list[dict] = []
        self.state = CycleState()
        self.peak_wm = 0
        self._pages = 0
        for g in goals:
            self.add_goal(g)

    # -- goals -------------------------------------------------------------

    def add_goal(self, goal: Goal) -> None:
        self.goals.append(goal)

    @property
    def remaining_goals(self) -> int:
        return len(self.goals)

    @property
    def finished(self) -> bool:
        return not self.goals

    def goal_premises(self) -> set[Premise]:
        out: set[Premise] = set()
        for g in self.goals:
            out |= g.targets
        return out

    def protected_premises(self) -> set[Premise]:
        out: set[Premise] = set()
        for g in self.protected:
            out |= g.targets
        return out

    def satisfy_goal(self, goal: Goal, w_active: frozenset[Premise] | None = None) -> None:
        if any(g.id == goal.id for g in self.protected):
            return
        active = self.wm.active(self.cycle) if w_active is None else w_active
        if not goal.targets <= active:
            raise GoalNotSatisfied(goal.id)
        self.goals = [g for g in self.goals if g.id != goal.id]
        self.protected.append(goal)
        self._log("goal-satisfied", goal=goal.id)

    def switch_goal(self, old_id: str | None, new_goal: Goal) -> None:
        """Swap a goal mid-composition; behavior-network activations are left untouched."""
        self.goals = [g for g in self.goals if g.id != old_id]
        self.protected = [g for g in self.protected if g.id != old_id]
        self.goals.append(new_goal)
        self._log("goal-switch", old=old_id, new=new_goal.id)

    # -- results from the outside world -------------------------------------

    def notify_executed(self, service_id: str, concrete_id: str, ok: bool = True) -> list[Stimulus]:
        """Record a finished execution; returns the stimuli carrying its effects."""
        self.in_flight.pop(service_id, None)
        if not ok:
            return self.notify_failed(service_id, concrete_id)
        svc = self.catalog.abstract[service_id]
        cs = self.catalog.concrete.get(concrete_id)
        effects = cs.postconds if cs is not None else svc.add
        self.done[service_id] = self.cycle
        self.executed.append((self.cycle, service_id, concrete_id))
        self.pm.reward_episode(REWARD_SUCCESS)
        out = []
        for p in sorted(svc.delete):
            self.facts.discard(p)
            out.append(Stimulus(StimulusClass.INTERNAL_SIGNAL, p, retract=True))
        for p in sorted(effects):
            self.facts.add(p)
            if self._relevant(p):
                out.append(Stimulus(StimulusClass.INTERNAL_SIGNAL, p))
        self._log("executed", service=service_id, realizer=concrete_id)
        return out

    def notify_failed(self, service_id: str, concrete_id: str) -> list[Stimulus]:
        """An execution failure: remember the realizer as unreliable and replan."""
        self.in_flight.pop(service_id, None)
        self.dm.remember("service-provider", provider_key(concrete_id), UNRELIABLE)
        self.pm.reward_episode(REWARD_FAILURE)
        self.replans += 1
        self._log("execution-failed", service=service_id, realizer=concrete_id)
        return []

    def is_unreliable(self, concrete_id: str) -> bool:
        return self.dm.recall("service-provider", provider_key(concrete_id)) == UNRELIABLE

    # -- the cycle -----------------------------------------------------------

    def run_cycle(self, stimuli: Sequence[Stimulus] = ()) -> AgentAction | None:
        if not self.goals:
            return None
        c = self.cycle
        st = CycleState(cycle=c)

        # 1. perception
        stimuli = list(stimuli) + self._fact_refresh(c)
        stimulated, retracted = self.perception.perceive(stimuli, c)
        for p in retracted:
            self.wm.remove(p)
            self.facts.discard(p)
            self._reopen_for(p)
        self.perception.decay(c)
        st.P = stimulated
        fresh = {p.premise for p in stimulated}

        # 2. percepts into WM
        written = []
        for pc in self.perception.salient(self.salience_gate):
            # rehearse units that faded but are still held; evicted units need fresh stimulation
            if pc.premise in fresh or (pc.premise in self.wm and not self.wm.is_active(pc.premise, c)):
                self.wm.write(pc.premise, _VOLATILITY[pc.kind], c)
                written.append(pc.premise)

        # 3-4. declarative cue, D into WM
        d = self.dm.cue(written, self.wm.units.keys()) if written or self.dm.slipnet.nodes else set()
        self._pages = self.dm.pages_touched()
        for p in sorted(d):
            self.wm.write(p, DECLARATIVE, c)
        st.D = d

        # 5. decay and filter
        w_active = self.wm.active(c)
        st.W = w_active
        self.peak_wm = max(self.peak_wm, len(self.wm))

        for g in list(self.protected):
            if not g.targets <= w_active and not g.targets <= self.facts:
                self.protected.remove(g)
                self.goals.append(g)
                self._log("goal-reopened", goal=g.id)
        for g in list(self.goals):
            if g.targets <= w_active:
                self.satisfy_goal(g, w_active)
        st.G = len(self.goals)
        if not self.goals:
            self._end_cycle(st, w_active)
            return None

        # 6. attention
        for sid, until in list(self.inhibited.items()):
            if until <= c:
                del self.inhibited[sid]
        executable = [s.id for s in self.bn.services
                      if s.preconds <= w_active and s.id not in self.done
                      and s.id not in self.in_flight and s.id not in self.inhibited]
        busy = bool(self.in_flight)
        theta = self.bn.theta
        chosen = self.bn.step(c, w_active, self.goal_premises(), self.protected_premises(),
                              executable, selectable=() if busy else None)
        if busy:
            self.bn.theta = theta
        st.A = dict(self.bn.activation)
        st.C = chosen

        # 7. bind
        if chosen is not None:
            try:
                cs = self._bind(self.catalog.abstract[chosen])
            except NoReachableRealizer:
                self.replans += 1
                self.inhibited[chosen] = c + self.inhibit_cycles
                self._log("replan", service=chosen, reason="no-reachable-realizer")
            else:
                prio = max((g.priority for g in self.goals), default=1)
                self.scheduler.schedule(AgentAction(ActionKind.SERVICE_EXECUTION, cs.id, prio, c, chosen))

        # 8-9. schedule and act
        action = self.scheduler.next_action(c)
        if action is not None and action.kind is ActionKind.SERVICE_EXECUTION:
            self.in_flight[action.service] = action.payload
            self.tokens.append((action.service, self.reopened.get(action.service, 0)))
            self._log("dispatch", service=action.service, realizer=action.payload)
        st.R = action
        self._end_cycle(st, w_active)
        return action

    def _end_cycle(self, st: CycleState, w_active: frozenset[Premise]) -> None:
        c = self.cycle
        if len(self.wm) > self.wm.config.capacity:
            self.audit_failures.append(f"cycle {c}: WM holds {len(self.wm)} units")
        t = self.wm.config.threshold
        for p in w_active:
            u = self.wm.units.get(p)
            if u is None or u.base_level(c) <= t:
                self.audit_failures.append(f"cycle {c}: inactive unit {p} fed attention")
        if self.audit and self.audit_failures:
            raise AssertionError(self.audit_failures[-1])
        self.state = st
        if self.log_events:
            self.events.append({
                "cycle": c, "step": "cycle", "chosen": st.C,
                "action": st.R.payload if st.R else None,
                "wm": sorted(map(str, st.W)),
                "activations": {k: round(v, 6) for k, v in sorted(st.A.items())},
            })
        self.cycle += 1

    def _fact_refresh(self, c: int) -> list[Stimulus]:
        if self.fact_refresh <= 0 or c % self.fact_refresh:
            return []
        return [Stimulus(StimulusClass.INTERNAL_SIGNAL, p) for p in sorted(self.facts)
                if not self.wm.is_active(p, c) and self._relevant(p)]

    def _relevant(self, p: Premise) -> bool:
        # facts no pending service consumes stay known but stop competing for WM slots
        if p in self.goal_premises() or p in self.protected_premises():
            return True
        return any(p in s.preconds for s in self.bn.services if s.id not in self.done)

    def _reopen_for(self, premise: Premise) -> None:
        for sid in list(self.done):
            if premise in self.catalog.abstract[sid].add:
                del self.done[sid]
                self.reopened[sid] = self.reopened.get(sid, 0) + 1

    def _bind(self, svc: AbstractService) -> ConcreteService:
        candidates = self.catalog.realizers_of(svc.id)
        if self.realizer_filter is not None:
            candidates = self.realizer_filter(svc, candidates)
        candidates = [cs for cs in candidates if not self.is_unreliable(cs.id)]
        h = self.pm.choose("qos-weighting", {"time_sensitive": self.time_sensitive})
        weights = h.payload if h is not None else None
        return bind_concrete(svc, candidates, weights=weights, time_sensitive=False)

    # -- bookkeeping ---------------------------------------------------------

    def duplicate_executions(self) -> int:
        return len(self.tokens) - len(set(self.tokens))

    def memory_bytes(self) -> int:
        """Model-level footprint charged to the host's memory ledger."""
        return (len(self.wm) * UNIT_BYTES + len(self.perception) * PERCEPT_BYTES
                + len(self.bn.activation) * NODE_BYTES
                + (len(self.done) + len(self.in_flight)) * STEP_BYTES
                + self._pages * PAGE_BYTES)

    def export_state(self) -> dict:
        """Volatile state for replication to a passive CM."""
        return copy.deepcopy({
            "cycle": self.cycle, "goals": self.goals, "protected": self.protected,
            "facts": self.facts, "done": self.done, "reopened": self.reopened,
            "in_flight": self.in_flight, "inhibited": self.inhibited,
            "executed": self.executed, "tokens": self.tokens,
            "activation": self.bn.activation, "theta": self.bn.theta,
            "wm": self.wm.units, "percepts": self.perception.percepts, "replans": self.replans,
        })

    def import_state(self, state: dict) -> None:
        s = copy.deepcopy(state)
        self.cycle = s["cycle"]
        self.goals, self.protected = s["goals"], s["protected"]
        self.facts, self.done, self.reopened = s["facts"], s["done"], s["reopened"]
        self.in_flight, self.inhibited = s["in_flight"], s["inhibited"]
        self.executed, self.tokens = s["executed"], s["tokens"]
        self.bn.activation, self.bn.theta = s["activation"], s["theta"]
        self.wm.units, self.perception.percepts = s["wm"], s["percepts"]
        self.replans = s["replans"]

    def _log(self, step: str, **kw) -> None:
        if self.log_events:
            self.events.append({"cycle": self.cycle, "step": step, **kw})

    def write_event_log(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for e in self.events:
                fh.write(json.dumps(e, sort_keys=True) + "\n")


class LocalExecutor:
    """Executes dispatched services on the agent's own node after a fixed delay."""

    def __init__(self, agent: CognitiveAgent, delay_cycles: int = 1, context_period: int = 10):
        self.agent = agent
        self.delay = delay_cycles
        self.context_period = context_period
        self.pending: list[tuple[int, str, str]] = []

    def run(self, max_cycles: int, stimuli: Sequence[Stimulus] = ()) -> list[str]:
        """Drive the agent until its goals are met or ``max_cycles`` pass; returns the executed order."""
        inbox = list(stimuli)
        # context keeps being sensed; one-off requests do not
        sensed = [s for s in stimuli if s.kind in (StimulusClass.USER_CONTEXT, StimulusClass.PHYSICAL_CONTEXT)]
        for _ in range(max_cycles):
            if self.agent.finished:
                break
            c = self.agent.cycle
            for item in [p for p in self.pending if p[0] <= c]:
                self.pending.remove(item)
                inbox += self.agent.notify_executed(item[1], item[2])
            if self.context_period and c and c % self.context_period == 0:
                inbox += sensed
            action = self.agent.run_cycle(inbox)
            inbox = []
            if action is not None and action.kind is ActionKind.SERVICE_EXECUTION:
                self.pending.append((c + self.delay, action.service, action.payload))
        return [sid for _, sid, _ in self.agent.executed]
