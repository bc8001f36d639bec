"""Capacity-bounded working memory with base-level activation decay."""
from __future__ import annotations

from dataclasses import dataclass, field

from .domain import Premise

USER_CONTEXT = "user-context"
PHYSICAL_CONTEXT = "physical-context"
PREFERENCE = "preference"
INTERNAL = "internal"
DECLARATIVE = "declarative"


def _default_decay() -> dict[str, float]:
    return {USER_CONTEXT: 0.8, PHYSICAL_CONTEXT: 0.5, PREFERENCE: 0.2,
            INTERNAL: 0.5, DECLARATIVE: 0.5}


@dataclass
class WorkingMemoryConfig:
    capacity: int = 7
    threshold: float = 0.3
    initial_activation: float = 0.0
    decay: dict[str, float] = field(default_factory=_default_decay)

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("working memory capacity must be >= 1")
        if any(d <= 0 for d in self.decay.values()):
            raise ValueError("decay parameters must be positive")


@dataclass
class WorkingMemoryUnit:
    premise: Premise
    volatility: str
    decay: float
    initial_activation: float
    birth_cycle: int
    settings: list[int] = field(default_factory=list)

    def base_level(self, cycle: int) -> float:
        return base_level(self, cycle)


def base_level(unit: WorkingMemoryUnit, cycle: int) -> float:
    """``iB + sum(t_l ** -d)`` with each age ``t_l`` floored at one cycle."""
    total = unit.initial_activation
    for presented in unit.settings:
        total += max(cycle - presented, 1) ** -unit.decay
    return total


class WorkingMemory:
    def __init__(self, config: WorkingMemoryConfig | None = None):
        self.config = config or WorkingMemoryConfig()
        self.units: dict[Premise, WorkingMemoryUnit] = {}

    def __len__(self) -> int:
        return len(self.units)

    def __contains__(self, premise: Premise) -> bool:
        return premise in self.units

    def write(self, premise: Premise, volatility: str, cycle: int) -> list[Premise]:
        """Present ``premise`` at ``cycle``; returns the premises evicted to stay in capacity."""
        unit = self.units.get(premise)
        if unit is None:
            d = self.config.decay.get(volatility, self.config.decay[INTERNAL])
            unit = WorkingMemoryUnit(premise, volatility, d, self.config.initial_activation, cycle)
            self.units[premise] = unit
        unit.settings.append(cycle)
        evicted = []
        while len(self.units) > self.config.capacity:
            victim = min(self.units.values(),
                         key=lambda u: (u.base_level(cycle), u.birth_cycle, u.premise))
            del self.units[victim.premise]
            evicted.append(victim.premise)
        return evicted

    def remove(self, premise: Premise) -> bool:
        return self.units.pop(premise, None) is not None

    def activations(self, cycle: int) -> dict[Premise, float]:
        return {p: u.base_level(cycle) for p, u in self.units.items()}

    def is_active(self, premise: Premise, cycle: int) -> bool:
        u = self.units.get(premise)
        return u is not None and u.base_level(cycle) > self.config.threshold

    def active(self, cycle: int) -> frozenset[Premise]:
        """Premises whose base level is above the threshold; all attention ever sees."""
        t = self.config.threshold
        return frozenset(p for p, u in self.units.items() if u.base_level(cycle) > t)
