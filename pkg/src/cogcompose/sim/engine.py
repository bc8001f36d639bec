"""The per-run event loop.

Model time advances in 50 ms ticks. Each tick moves nodes (every
``move_step`` seconds), drains due events, runs the CM heartbeat protocol,
and gives every live session agent one cognitive cycle.

Discovery is per session: the active CM snapshots the services hosted on
nodes it can reach, when the request arrives and again after every replan
(execution failure, unreachable realizer, goal switch). Between those
points the directory can go stale, which is how mobility turns into
execution failures.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ..agent import ActionKind, CognitiveAgent
from ..domain import ConcreteService
from ..errors import GroupOrphaned, NoCMCapableDevice
from ..overlay import BinaryStar, Device, Group, components
from ..perception import Stimulus, StimulusClass
from .config import SimConfig
from .events import EventKind, EventQueue
from .metrics import MemoryLedger, MetricsRecord, rate
from .mobility import Walker
from .scenario import Scenario, UserPlan, generate_scenario, relevant_services

TICK_MS = 50
INVOKE_BYTES = 128

# independent random streams, keyed so that node i's draws do not depend on
# how many other nodes exist
_LAYOUT, _SCENARIO, _AGENT, _WALK, _USER, _FAIL, _CHURN = range(1, 8)


@dataclass
class Node:
    device: Device
    walker: Walker
    index: int

    @property
    def did(self) -> str:
        return self.device.did


@dataclass
class Session:
    user: int
    plan: UserPlan
    phone: str
    star: BinaryStar | None = None
    agent: CognitiveAgent | None = None
    agent_host: str | None = None
    directory: set[str] = field(default_factory=set)
    inbox: list[Stimulus] = field(default_factory=list)
    pending: list[tuple] = field(default_factory=list)
    status: str = "running"
    end_ms: int | None = None
    executions: int = 0
    exec_failures: int = 0
    last_progress: int = 0
    switch_pending: bool = False
    switched: bool = False
    switch_checks: list = field(default_factory=list)
    hosts_used: set[str] = field(default_factory=set)
    cm_hosts: set[str] = field(default_factory=set)
    replans: int = 0
    kill_after: int | None = None
    failover: dict = field(default_factory=dict)


class Simulation:
    def __init__(self, config: SimConfig, run_index: int = 0):
        self.config = config
        self.run_seed = config.seed + run_index
        c = config
        self.scenario: Scenario = generate_scenario(c, np.random.default_rng([self.run_seed, _SCENARIO]))
        self.catalog = self.scenario.catalog
        self.queue = EventQueue()
        self.ledger = MemoryLedger()
        self.nodes: list[Node] = []
        self.by_did: dict[str, Node] = {}
        self.host_of: dict[str, str] = {}
        self.exec_count: dict[tuple[int, str], int] = {}
        self.killed: set[str] = set()
        self._build_layout()
        self._schedule_churn()
        self.labels = self._components()
        self.sessions: list[Session] = []
        self.traces: dict[str, list] = {}
        for u, plan in enumerate(self.scenario.users):
            self.sessions.append(self._open_session(u, plan))

    # -- setup ------------------------------------------------------------

    def _build_layout(self) -> None:
        c = self.config
        concrete = self.scenario.concrete_ids
        cum = np.cumsum(c.level_weights)
        w, h = c.arena
        for i in range(c.density):
            rng = np.random.default_rng([self.run_seed, _LAYOUT, i])
            x, y, lv, hs = rng.random(4)
            level = int(np.searchsorted(cum, lv, side="right"))
            level = min(level, 3)
            if not concrete:
                hosted = ()
            elif c.hosting == "round-robin":
                hosted = (concrete[i % len(concrete)],)
            else:
                hosted = (concrete[int(hs * len(concrete))],)
            dev = Device(f"p{i:03d}", level, (x * w, y * h), hosted)
            walker = Walker(dev.position, np.random.default_rng([self.run_seed, _WALK, i]),
                            c.mobility, c.mobility_epoch)
            self._add(dev, walker)
            for cid in hosted:
                self.host_of.setdefault(cid, dev.did)
        for u in range(len(self.scenario.users)):
            rng = np.random.default_rng([self.run_seed, _USER, u])
            x, y = rng.random(2)
            walker = Walker((x * w, y * h), np.random.default_rng([self.run_seed, _WALK, 10_000 + u]),
                            c.mobility, c.mobility_epoch)
            self._add(Device(f"u{u}-phone", 2, walker.position, owner=f"user{u}"), walker)
            self._add(Device(f"u{u}-watch", 1, walker.position, owner=f"user{u}"), walker)

    def _schedule_churn(self) -> None:
        """Providers alternate exponential up and down periods; user devices stay up."""
        c = self.config
        if c.churn_uptime <= 0 or c.churn_downtime <= 0:
            return
        horizon = c.cycle_budget * TICK_MS
        for n in self.nodes:
            if n.device.owner is not None:
                continue
            rng = np.random.default_rng([self.run_seed, _CHURN, n.index])
            t = 0.0
            while True:
                t += rng.exponential(c.churn_uptime)
                if t * 1000 >= horizon:
                    break
                self.queue.push(int(t * 1000), EventKind.NODE_FAIL, did=n.did)
                t += rng.exponential(c.churn_downtime)
                if t * 1000 >= horizon:
                    break
                self.queue.push(int(t * 1000), EventKind.NODE_JOIN, did=n.did)

    def _add(self, dev: Device, walker: Walker) -> None:
        node = Node(dev, walker, len(self.nodes))
        self.nodes.append(node)
        self.by_did[dev.did] = node

    def _components(self) -> np.ndarray:
        return components([n.device.position for n in self.nodes], self.config.comm_range,
                          [n.device.alive for n in self.nodes])

    def connected(self, a: str | None, b: str | None) -> bool:
        if a is None or b is None:
            return False
        na, nb = self.by_did[a], self.by_did[b]
        if not (na.device.alive and nb.device.alive):
            return False
        return a == b or self.labels[na.index] == self.labels[nb.index]

    def _open_session(self, u: int, plan: UserPlan) -> Session:
        s = Session(u, plan, f"u{u}-phone")
        phone = self.by_did[s.phone]
        members = tuple(sorted(n.did for n in self.nodes
                               if n.device.alive and self.labels[n.index] == self.labels[phone.index]))
        devices = {n.did: n.device for n in self.nodes}
        s.star = BinaryStar(Group(f"s{u}", members), devices)
        self._start_agent(s, None)
        s.inbox.extend(Stimulus(StimulusClass.EXTERNAL_REQUEST, p) for p in plan.request)
        if self.config.fail_active_cm and u == 0:
            rng = np.random.default_rng([self.run_seed, _FAIL])
            s.kill_after = int(rng.integers(1, max(2, self.config.cl)))
            self._kill_offset = int(rng.integers(0, 10)) * TICK_MS
        return s

    def _start_agent(self, s: Session, state: dict | None) -> None:
        c = self.config
        host = s.star.active
        agent = CognitiveAgent(
            self.catalog, [] if state else [s.plan.goal], c.params, name=host,
            rng=np.random.default_rng([self.run_seed, _AGENT, s.user, s.star.epoch]),
            realizer_filter=lambda svc, cands, s=s: self._filter(s, cands),
            audit=c.audit, log_events=c.trace)
        agent.bn.record_trace = c.trace
        if state is not None:
            agent.import_state(state)
        s.agent, s.agent_host = agent, host
        s.cm_hosts.add(host)
        self.traces.setdefault(host, [])
        self._discover(s)

    def _filter(self, s: Session, cands: list[ConcreteService]) -> list[ConcreteService]:
        return [cs for cs in cands if cs.id in s.directory]

    def _discover(self, s: Session) -> None:
        cm = s.star.active
        s.directory = {cid for cid, host in self.host_of.items() if self.connected(cm, host)}

    # -- main loop --------------------------------------------------------

    def run(self) -> MetricsRecord:
        c = self.config
        move_every = max(1, round(c.move_step * 1000 / TICK_MS))
        stall_ms = int(c.stall_timeout * 1000)
        tick = 0
        for tick in range(c.cycle_budget):
            now = tick * TICK_MS
            if tick and tick % move_every == 0:
                dt = move_every * TICK_MS / 1000
                for n in self.nodes:
                    if n.device.alive:
                        n.device.position = n.walker.advance(now / 1000, dt, c.arena)
                self.labels = self._components()
            for ev in self.queue.pop_due(now):
                self._handle(ev, now)
            for s in self.sessions:
                if s.status == "running":
                    self._heartbeat(s)
            for s in self.sessions:
                if s.status == "running":
                    self._step(s, tick, now)
                    if s.status == "running" and now - s.last_progress > stall_ms:
                        self._close(s, "failed", now)
            if all(s.status != "running" for s in self.sessions):
                break
        cycles = tick + 1
        for s in self.sessions:
            if s.status == "running":
                self._close(s, "failed", cycles * TICK_MS)
        return self._record(cycles)

    def _heartbeat(self, s: Session) -> None:
        before = s.star.active
        try:
            s.star.tick()
        except GroupOrphaned:
            self._close(s, "failed", self.queue.now)
            return
        passive = s.star.passive
        if s.star.active != before and s.star.active is not None:
            state = s.star.snapshot
            s.failover.setdefault("promoted", []).append(s.star.active)
            self._start_agent(s, state)
            if state is None:
                s.agent.add_goal(s.plan.switch_to if s.switched else s.plan.goal)
                s.inbox.extend(Stimulus(StimulusClass.EXTERNAL_REQUEST, p) for p in s.plan.request)
            self._flush(s)
        if s.star.passive is not None and s.star.passive != passive:
            self._replicate(s)

    def _flush(self, s: Session) -> None:
        items, s.pending = s.pending, []
        for item in items:
            self._apply_result(s, *item)

    def _step(self, s: Session, tick: int, now: int) -> None:
        agent = s.agent
        if agent is None or not self.by_did[s.agent_host].device.alive:
            return
        if s.pending:
            self._flush(s)
        c = self.config
        stimuli, s.inbox = s.inbox, []
        if tick % c.context_period == 0 and self.connected(s.phone, s.agent_host):
            stimuli += [Stimulus(StimulusClass.USER_CONTEXT, p) for p in s.plan.context]
        pre = None
        if s.switch_pending:
            pre = dict(agent.bn.activation)
            agent.switch_goal(s.plan.goal.id, s.plan.switch_to)
            s.switch_pending, s.switched = False, True
            self._discover(s)
            self._replicate(s)
        replans = agent.replans
        action = agent.run_cycle(stimuli)
        if pre is not None:
            old = relevant_services(self.catalog, s.plan.goal.targets)
            new = relevant_services(self.catalog, s.plan.switch_to.targets)
            for sid in sorted(old & new):
                if sid in agent.done:
                    continue
                terms = agent.bn.last_terms.get(sid)
                s.switch_checks.append((sid, pre.get(sid, 0.0), terms.total if terms else 0.0,
                                        terms.previous if terms else 0.0))
        if agent.replans != replans:
            self._discover(s)
        if action is not None and action.kind is ActionKind.SERVICE_EXECUTION:
            self.queue.push(now + int(round(c.matchmaking_delay * 1000)), EventKind.INVOKE,
                            session=s.user, service=action.service, concrete=action.payload)
            self._replicate(s)
        self.ledger.set(s.agent_host, agent.memory_bytes())
        if c.audit and agent.audit_failures:
            raise AssertionError(agent.audit_failures[0])
        if agent.finished:
            self._close(s, "done", now + TICK_MS)

    def _replicate(self, s: Session) -> None:
        if s.star.passive is not None and s.agent is not None:
            s.star.replicate(s.agent.export_state())

    def _close(self, s: Session, status: str, end_ms: int) -> None:
        s.status, s.end_ms = status, end_ms
        if s.agent is not None:
            s.replans += s.agent.replans
            if self.config.trace:
                self.traces[s.agent_host] = s.agent.events + [
                    {"bn": row} for row in s.agent.bn.trace]

    # -- events -----------------------------------------------------------

    def _target(self, s: Session) -> str | None:
        """Where results go: the active CM, or the passive while the active is down."""
        for did in (s.star.active, s.star.passive):
            if did is not None and self.by_did[did].device.alive:
                return did
        return None

    def _handle(self, ev, now: int) -> None:
        p = ev.payload
        if ev.kind in (EventKind.NODE_FAIL, EventKind.NODE_JOIN):
            if p.get("permanent"):
                self.killed.add(p["did"])
            if p["did"] not in self.killed or ev.kind is EventKind.NODE_FAIL:
                self.by_did[p["did"]].device.alive = ev.kind is EventKind.NODE_JOIN
                self.labels = self._components()
            return
        s = self.sessions[p["session"]]
        if s.status != "running":
            return
        host = self.host_of.get(p["concrete"])
        if ev.kind is EventKind.INVOKE:
            if host is not None and self.connected(self._target(s), host):
                latency = self.catalog.concrete[p["concrete"]].qos["latency"]
                self.ledger.charge(host, INVOKE_BYTES)
                s.hosts_used.add(host)
                self.queue.push(now + int(math.ceil(latency * 1000)), EventKind.SERVICE_EXEC_DONE,
                                session=s.user, service=p["service"], concrete=p["concrete"], host=host)
            else:
                self._deliver(s, p["service"], p["concrete"], False)
        elif ev.kind is EventKind.SERVICE_EXEC_DONE:
            self.ledger.charge(p["host"], -INVOKE_BYTES)
            ok = self.connected(self._target(s), p["host"])
            self._deliver(s, p["service"], p["concrete"], ok)

    def _deliver(self, s: Session, sid: str, cid: str, ok: bool) -> None:
        if s.agent is None or not self.by_did[s.agent_host].device.alive:
            s.pending.append((sid, cid, ok))
            return
        self._apply_result(s, sid, cid, ok)

    def _apply_result(self, s: Session, sid: str, cid: str, ok: bool) -> None:
        now = self.queue.now
        agent = s.agent
        if ok:
            s.inbox += agent.notify_executed(sid, cid)
            s.executions += 1
            key = (s.user, sid)
            self.exec_count[key] = self.exec_count.get(key, 0) + 1
            s.last_progress = now
            if (self.config.mode == "adaptability" and s.plan.switch_to is not None
                    and not s.switched and s.executions == self.config.switch_after):
                s.switch_pending = True
            if s.kill_after is not None and s.executions == s.kill_after:
                victim = s.star.active
                s.failover["killed"] = victim
                s.failover["at_execution"] = s.executions
                self.queue.push(now + self._kill_offset, EventKind.NODE_FAIL, did=victim,
                                permanent=True)
                s.kill_after = None
        else:
            agent.notify_failed(sid, cid)
            s.exec_failures += 1
            self._discover(s)
        self._replicate(s)

    # -- metrics ----------------------------------------------------------

    def _record(self, cycles: int) -> MetricsRecord:
        c = self.config
        done = [s for s in self.sessions if s.status == "done"]
        failed = [s for s in self.sessions if s.status != "done"]
        efr = None
        ct = 0.0
        if done:
            efr = sum(s.exec_failures for s in done) / len(done)
            ct = sum(s.end_ms for s in done) / len(done) / 1000
        pfr = rate(len(failed), len(self.sessions), "PFR")
        participants: set[str] = set()
        for s in self.sessions:
            participants |= s.cm_hosts | s.hosts_used
        dups = sum(n - 1 for n in self.exec_count.values() if n > 1)
        audit = sum(len(s.agent.audit_failures) for s in self.sessions if s.agent)
        peak_wm = max((s.agent.peak_wm for s in self.sessions if s.agent), default=0)
        return MetricsRecord(
            seed=self.run_seed, mode=c.mode, mobility=c.mobility, density=c.density, cl=c.cl,
            config_id=c.config_id, pfr=pfr, efr=efr, ct_s=ct,
            mu_bytes=self.ledger.peak_mu(sorted(participants)), cycles=cycles,
            requests=len(self.sessions), completed=len(done),
            exec_failures=sum(s.exec_failures for s in self.sessions), duplicates=dups,
            audit_failures=audit, peak_wm=peak_wm,
            replans=sum(s.replans for s in self.sessions),
            switch_checks=[x for s in self.sessions for x in s.switch_checks],
            failover={k: v for s in self.sessions for k, v in s.failover.items()})


def run_once(config: SimConfig, run_index: int = 0) -> MetricsRecord:
    return Simulation(config, run_index).run()


def _run_star(args) -> MetricsRecord:
    return run_once(*args)


def run_scenario(config: SimConfig, runs: int | None = None, parallel: int = 1,
                 start: int = 0) -> list[MetricsRecord]:
    """``runs`` independent repetitions; run ``i`` uses seed ``config.seed + start + i``."""
    n = config.runs if runs is None else runs
    jobs = [(config, start + i) for i in range(n)]
    if parallel > 1 and n > 1:
        with ProcessPoolExecutor(parallel) as pool:
            return list(pool.map(_run_star, jobs))
    return [run_once(*j) for j in jobs]


def run_many(configs: Iterable[SimConfig], parallel: int = 1) -> list[MetricsRecord]:
    out = []
    for cfg in configs:
        out += run_scenario(cfg, parallel=parallel)
    return out
