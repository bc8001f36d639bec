"""Feature detectors turning raw stimuli into decaying percepts."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Iterable

from .domain import Premise
from .errors import UnknownStimulusClass


class StimulusClass(str, Enum):
    EXTERNAL_REQUEST = "external-request"
    USER_CONTEXT = "user-context"
    PHYSICAL_CONTEXT = "physical-context"
    SERVICE_QOS = "service-qos"
    INTERNAL_SIGNAL = "internal-signal"


@dataclass(frozen=True)
class Stimulus:
    kind: StimulusClass
    payload: Any
    salience: int | None = None
    retract: bool = False


@dataclass
class Percept:
    premise: Premise
    salience: int
    birth_cycle: int
    last_stimulated: int
    kind: StimulusClass
    activation: float = 0.0

    def __post_init__(self):
        if not 1 <= self.salience <= 10:
            raise ValueError(f"salience must be in 1..10, got {self.salience}")
        if not self.activation:
            self.activation = float(self.salience)


def decay_activation(salience: float, cycles_since: int) -> float:
    """``salience / log2(cc)``, held at ``salience`` while ``cc <= 2``."""
    if cycles_since <= 2:
        return float(salience)
    return salience / math.log2(cycles_since)


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")


@dataclass(frozen=True)
class FeatureDetector:
    stimulus_class: StimulusClass
    default_salience: int
    extract: Callable[[Stimulus], Premise] | None = None

    def detect(self, stimulus: Stimulus) -> tuple[Premise, int]:
        if self.extract is not None:
            premise = self.extract(stimulus)
        elif isinstance(stimulus.payload, Premise):
            premise = stimulus.payload
        elif isinstance(stimulus.payload, str) and "=" in stimulus.payload:
            premise = Premise.parse(stimulus.payload)
        else:
            premise = Premise(_default_key(self.stimulus_class), _slug(str(stimulus.payload)))
        return premise, stimulus.salience or self.default_salience


def _default_key(kind: StimulusClass) -> str:
    return {
        StimulusClass.EXTERNAL_REQUEST: "goal",
        StimulusClass.USER_CONTEXT: "user",
        StimulusClass.PHYSICAL_CONTEXT: "network",
        StimulusClass.SERVICE_QOS: "qos",
        StimulusClass.INTERNAL_SIGNAL: "signal",
    }[kind]


# User requests must outlive transient network glitches.
DEFAULT_DETECTORS = {
    StimulusClass.EXTERNAL_REQUEST: FeatureDetector(StimulusClass.EXTERNAL_REQUEST, 9),
    StimulusClass.USER_CONTEXT: FeatureDetector(StimulusClass.USER_CONTEXT, 5),
    StimulusClass.PHYSICAL_CONTEXT: FeatureDetector(StimulusClass.PHYSICAL_CONTEXT, 2),
    StimulusClass.SERVICE_QOS: FeatureDetector(StimulusClass.SERVICE_QOS, 3),
    StimulusClass.INTERNAL_SIGNAL: FeatureDetector(StimulusClass.INTERNAL_SIGNAL, 6),
}


class Perception:
    """Percept store for one agent.

    ``cull_fraction`` removes a percept once its activation falls under that
    fraction of its salience.
    """

    def __init__(self, detectors: dict[StimulusClass, FeatureDetector] | None = None,
                 cull_fraction: float = 0.1):
        self.detectors = dict(DEFAULT_DETECTORS if detectors is None else detectors)
        self.cull_fraction = cull_fraction
        self.percepts: dict[Premise, Percept] = {}

    def register(self, detector: FeatureDetector) -> None:
        self.detectors[detector.stimulus_class] = detector

    def perceive(self, stimuli: Iterable[Stimulus], cycle: int) -> tuple[list[Percept], list[Premise]]:
        """Return ``(stimulated percepts, retracted premises)`` for this cycle."""
        stimulated: dict[Premise, Percept] = {}
        retracted: list[Premise] = []
        for s in stimuli:
            det = self.detectors.get(StimulusClass(s.kind)) if s.kind in set(StimulusClass) else None
            if det is None:
                raise UnknownStimulusClass(str(s.kind))
            premise, salience = det.detect(s)
            if s.retract:
                self.percepts.pop(premise, None)
                stimulated.pop(premise, None)
                retracted.append(premise)
                continue
            p = self.percepts.get(premise)
            if p is None:
                p = Percept(premise, salience, cycle, cycle, det.stimulus_class)
                self.percepts[premise] = p
            else:
                p.salience = max(p.salience, salience)
                p.last_stimulated = cycle
            p.activation = float(p.salience)
            stimulated[premise] = p
        return list(stimulated.values()), retracted

    def decay(self, cycle: int) -> None:
        dead = []
        for premise, p in self.percepts.items():
            p.activation = decay_activation(p.salience, cycle - p.last_stimulated)
            if p.activation < self.cull_fraction * p.salience:
                dead.append(premise)
        for premise in dead:
            del self.percepts[premise]

    def salient(self, gate: float) -> list[Percept]:
        return [p for p in self.percepts.values() if p.activation >= gate]

    def __len__(self) -> int:
        return len(self.percepts)
