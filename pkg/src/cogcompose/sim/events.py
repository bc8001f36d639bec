from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from enum import Enum


class EventKind(str, Enum):
    MOVE_STEP = "move-step"
    MESSAGE = "message"
    STIMULUS = "stimulus"
    SERVICE_EXEC_DONE = "service-exec-done"
    HEARTBEAT = "heartbeat"
    GOAL_SWITCH = "goal-switch"
    NODE_FAIL = "node-fail"
    NODE_JOIN = "node-join"
    INVOKE = "invoke"


@dataclass(order=True)
class SimEvent:
    timestamp: int  # milliseconds of model time
    seq: int
    kind: EventKind = field(compare=False)
    payload: dict = field(compare=False, default_factory=dict)


class EventQueue:
    """Min-heap on ``(timestamp, insertion sequence)``."""

    def __init__(self):
        self._heap: list[SimEvent] = []
        self._seq = itertools.count()
        self.now = 0

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, timestamp: int, kind: EventKind, **payload) -> SimEvent:
        if timestamp < self.now:
            raise ValueError(f"event at {timestamp} ms scheduled in the past (now {self.now})")
        ev = SimEvent(int(timestamp), next(self._seq), kind, payload)
        heapq.heappush(self._heap, ev)
        return ev

    def pop_due(self, now: int) -> list[SimEvent]:
        self.now = now
        out = []
        while self._heap and self._heap[0].timestamp <= now:
            out.append(heapq.heappop(self._heap))
        return out
