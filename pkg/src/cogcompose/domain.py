"""Service, goal and premise vocabulary shared by every other module.

Premises are flat ``key=value`` symbols. A concrete service is an executable
instance hosted on a device; an abstract service is the functionality
signature shared by its realizers and doubles as a behavior-network node.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Mapping

from .errors import DuplicateId, IntersectionViolation


@dataclass(frozen=True, order=True)
class Premise:
    key: str
    value: str = "true"

    def __post_init__(self):
        if not self.key:
            raise ValueError("premise key must be non-empty")

    @classmethod
    def parse(cls, text: str) -> "Premise":
        """Parse ``"key=value"`` (or a bare ``"key"``, meaning ``key=true``)."""
        key, sep, value = text.partition("=")
        return cls(key.strip(), value.strip() if sep else "true")

    def __str__(self) -> str:
        return f"{self.key}={self.value}"


def premises(*items: str | Premise) -> frozenset[Premise]:
    return frozenset(p if isinstance(p, Premise) else Premise.parse(p) for p in items)


@dataclass(frozen=True)
class QoSDimension:
    name: str
    value: float
    higher_is_better: bool = True


@dataclass(frozen=True)
class QoSVector:
    dimensions: tuple[QoSDimension, ...] = ()

    @classmethod
    def of(cls, accuracy: float, latency: float) -> "QoSVector":
        """The two-feature vector used throughout: accuracy up, latency (s) down."""
        return cls((QoSDimension("accuracy", accuracy, True),
                    QoSDimension("latency", latency, False)))

    @classmethod
    def from_mapping(cls, values: Mapping[str, float],
                     lower_is_better: Iterable[str] = ("latency",)) -> "QoSVector":
        lower = set(lower_is_better)
        return cls(tuple(QoSDimension(k, float(v), k not in lower)
                         for k, v in sorted(values.items())))

    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dimensions)

    def __getitem__(self, name: str) -> float:
        for d in self.dimensions:
            if d.name == name:
                return d.value
        raise KeyError(name)

    def get(self, name: str, default: float | None = None) -> float | None:
        try:
            return self[name]
        except KeyError:
            return default

    def direction(self, name: str) -> bool:
        for d in self.dimensions:
            if d.name == name:
                return d.higher_is_better
        raise KeyError(name)


@dataclass(frozen=True)
class ConcreteService:
    id: str
    preconds: frozenset[Premise]
    postconds: frozenset[Premise]
    qos: QoSVector = QoSVector()
    host: str | None = None
    inputs: frozenset[Premise] = frozenset()
    outputs: frozenset[Premise] = frozenset()
    context: frozenset[Premise] = frozenset()


@dataclass(frozen=True)
class AbstractService:
    """A behavior-network node: preconditions, add list, delete list, realizers.

    The node's activation lives in the behavior network, not here, so that
    catalog entries stay immutable and shareable.
    """

    id: str
    preconds: frozenset[Premise]
    add: frozenset[Premise]
    delete: frozenset[Premise] = frozenset()
    realizers: tuple[str, ...] = ()


@dataclass(frozen=True)
class Goal:
    id: str
    targets: frozenset[Premise]
    priority: int = 1
    subgoals: tuple["Goal", ...] = ()

    def __post_init__(self):
        if not self.targets:
            raise ValueError(f"goal {self.id!r} has no target premises")


def matches_preconditions(unit_set: Iterable[Premise], svc: AbstractService) -> bool:
    """True iff every precondition of ``svc`` is present in ``unit_set``."""
    units = unit_set if isinstance(unit_set, (set, frozenset)) else set(unit_set)
    return svc.preconds <= units


@dataclass
class Catalog:
    """Registry of concrete and abstract services, filled during setup."""

    concrete: dict[str, ConcreteService] = field(default_factory=dict)
    abstract: dict[str, AbstractService] = field(default_factory=dict)

    def add_concrete(self, cs: ConcreteService) -> None:
        if cs.id in self.concrete:
            raise DuplicateId(cs.id)
        self.concrete[cs.id] = cs

    def register(self, svc: AbstractService) -> None:
        register_abstract_service(svc, self)

    def services(self) -> list[AbstractService]:
        return [self.abstract[k] for k in sorted(self.abstract)]

    def realizers_of(self, service_id: str) -> list[ConcreteService]:
        return [self.concrete[c] for c in self.abstract[service_id].realizers]

    def premise_universe(self) -> frozenset[Premise]:
        out: set[Premise] = set()
        for a in self.abstract.values():
            out |= a.preconds | a.add | a.delete
        for c in self.concrete.values():
            out |= c.preconds | c.postconds
        return frozenset(out)


def register_abstract_service(svc: AbstractService, catalog: Catalog) -> Catalog:
    if svc.id in catalog.abstract:
        raise DuplicateId(svc.id)
    if svc.realizers:
        missing = [r for r in svc.realizers if r not in catalog.concrete]
        if missing:
            raise IntersectionViolation(f"{svc.id}: unknown realizers {missing}")
        reals = [catalog.concrete[r] for r in svc.realizers]
        pre = reduce(frozenset.intersection, (r.preconds for r in reals))
        post = reduce(frozenset.intersection, (r.postconds for r in reals))
        if pre != svc.preconds:
            raise IntersectionViolation(
                f"{svc.id}: preconds {sorted(map(str, svc.preconds))} != "
                f"realizer intersection {sorted(map(str, pre))}")
        if post != svc.add:
            raise IntersectionViolation(
                f"{svc.id}: add list {sorted(map(str, svc.add))} != "
                f"realizer postcondition intersection {sorted(map(str, post))}")
    catalog.abstract[svc.id] = svc
    return catalog
