"""Procedural heuristics: QoS-driven binding and behavior-network tuning under utility learning."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .attention import GlobalParams
from .domain import AbstractService, ConcreteService
from .errors import ConstraintViolation, NoReachableRealizer

DEFAULT_ALPHA = 0.2
DEFAULT_K = 0.35

REWARD_SUCCESS = 10.0
REWARD_FAILURE = -5.0


@dataclass(frozen=True)
class Heuristic:
    id: str
    action: str  # "qos-weighting" | "param-adjustment"
    payload: object = None
    guard: Callable[[Mapping], bool] | None = None
    usage: int = 0
    utility: float = 0.0
    rewards: tuple[float, ...] = ()

    def applies(self, context: Mapping) -> bool:
        return self.guard is None or bool(self.guard(context))


def exploration_term(n: int, k: float = DEFAULT_K) -> float:
    return 1.0 / math.exp(n / k)


def update_utility(h: Heuristic, reward: float, alpha: float = DEFAULT_ALPHA,
                   k: float = DEFAULT_K) -> Heuristic:
    """``U(n) = U(n-1) + alpha * (R(n) - U(n-1)) + 1/e^(n/k)``; ``n`` counts prior uses."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    u = h.utility + alpha * (reward - h.utility) + exploration_term(h.usage, k)
    return replace(h, utility=u, usage=h.usage + 1, rewards=h.rewards + (reward,))


def _qos_score(candidates: Sequence[ConcreteService], weights: Mapping[str, float]) -> list[float]:
    """Weighted sum of min-max normalised QoS values, oriented so larger is better."""
    scores = [0.0] * len(candidates)
    for dim, w in weights.items():
        vals = [c.qos.get(dim) for c in candidates]
        if any(v is None for v in vals):
            continue
        lo, hi = min(vals), max(vals)
        up = candidates[0].qos.direction(dim)
        for i, v in enumerate(vals):
            norm = 1.0 if hi == lo else (v - lo) / (hi - lo)
            scores[i] += w * (norm if up else 1.0 - norm)
    return scores


def bind_concrete(selected: AbstractService, candidates: Iterable[ConcreteService],
                  weights: Mapping[str, float] | None = None, time_sensitive: bool = False,
                  hard: Mapping[str, float] | None = None) -> ConcreteService:
    """Pick the realizer with the best weighted QoS.

    ``candidates`` are the realizers currently believed reachable. ``hard``
    maps a dimension to a bound that must hold (upper bound for lower-better
    dimensions, lower bound otherwise). The time-sensitive guard doubles the
    latency weight. Ties go to lower latency, then id.
    """
    pool = [c for c in candidates if c.id in set(selected.realizers)] if selected.realizers else list(candidates)
    if hard:
        def ok(c: ConcreteService) -> bool:
            for dim, bound in hard.items():
                v = c.qos.get(dim)
                if v is None:
                    return False
                if (c.qos.direction(dim) and v < bound) or (not c.qos.direction(dim) and v > bound):
                    return False
            return True
        pool = [c for c in pool if ok(c)]
    if not pool:
        raise NoReachableRealizer(selected.id)
    if len(pool) == 1:
        return pool[0]
    w = dict(weights) if weights else {d: 1.0 for d in pool[0].qos.names()}
    if time_sensitive and "latency" in w:
        w["latency"] *= 2.0
    scores = _qos_score(pool, w)
    order = sorted(range(len(pool)),
                   key=lambda i: (-scores[i], pool[i].qos.get("latency", 0.0) or 0.0, pool[i].id))
    return pool[order[0]]


class TuningMode(str, Enum):
    GOAL_ORIENTED = "goal-oriented"
    REACTIVE = "reactive"
    ADAPTIVE = "adaptive"
    CONFLICT_SENSITIVE = "conflict-sensitive"


def satisfies(params: GlobalParams, mode: TuningMode | str) -> bool:
    p = params
    mode = TuningMode(mode)
    if mode is TuningMode.GOAL_ORIENTED:
        return p.gamma > p.phi
    if mode is TuningMode.REACTIVE:
        return p.phi > p.gamma and p.phi > p.theta
    if mode is TuningMode.ADAPTIVE:
        return p.phi > p.pi > p.gamma
    return p.delta > p.gamma


def satisfied_modes(params: GlobalParams) -> list[TuningMode]:
    return [m for m in TuningMode if satisfies(params, m)]


def tune_parameters(params: GlobalParams, mode: TuningMode | str | None,
                    learned: GlobalParams) -> GlobalParams:
    """Replace ``params`` with ``learned``; ``mode=None`` applies it as a neutral default."""
    if mode is not None and not satisfies(learned, mode):
        raise ConstraintViolation(f"{learned.as_tuple()} violates the {TuningMode(mode).value} ordering")
    return learned


@dataclass
class ProceduralMemory:
    """Registered heuristics plus per-episode credit assignment."""

    heuristics: dict[str, Heuristic] = field(default_factory=dict)
    alpha: float = DEFAULT_ALPHA
    k: float = DEFAULT_K
    fired: list[str] = field(default_factory=list)

    def add(self, h: Heuristic) -> None:
        self.heuristics[h.id] = h

    def choose(self, action: str, context: Mapping) -> Heuristic | None:
        pool = [h for h in self.heuristics.values() if h.action == action and h.applies(context)]
        if not pool:
            return None
        best = max(pool, key=lambda h: (h.utility, [-ord(c) for c in h.id]))
        self.fired.append(best.id)
        return best

    def reward_episode(self, reward: float) -> None:
        """Every heuristic fired during the episode shares its reward."""
        for hid in dict.fromkeys(self.fired):
            self.heuristics[hid] = update_utility(self.heuristics[hid], reward, self.alpha, self.k)
        self.fired.clear()


def default_binding_heuristics() -> list[Heuristic]:
    return [
        Heuristic("balanced-qos", "qos-weighting", {"accuracy": 1.0, "latency": 1.0}),
        Heuristic("deadline-latency", "qos-weighting", {"accuracy": 1.0, "latency": 2.0},
                  guard=lambda ctx: bool(ctx.get("time_sensitive"))),
    ]


PARAM_BOUNDS = (10, 50)


def _neighbours(p: GlobalParams, step: int, lo: int, hi: int) -> list[GlobalParams]:
    base = [int(round(v)) for v in p.as_tuple()]
    out = []
    for i in range(5):
        for d in (-step, step):
            v = list(base)
            v[i] = min(hi, max(lo, v[i] + d))
            if v != base:
                out.append(GlobalParams.from_tuple(v))
    return out


def learn_parameters(evaluate: Callable[[GlobalParams, int], float], runs: int = 100,
                     start: GlobalParams | None = None, seed: int = 0, step: int = 4,
                     bounds: tuple[int, int] = PARAM_BOUNDS,
                     trial: int = 5) -> tuple[GlobalParams, list[dict]]:
    """Hill-climb integer configurations, scoring each with utility learning.

    Each configuration is a param-adjustment heuristic. A round spends
    ``2 * trial`` runs: the incumbent and a random neighbour are evaluated on
    the same run indices, each reward sequence is folded through
    :func:`update_utility` from a fresh heuristic, and the neighbour takes
    over if its utility ends higher. Equal run indices and equal update counts
    keep the comparison fair despite the exploration bonus.
    """
    rng = np.random.default_rng(seed)
    lo, hi = bounds
    best = start or GlobalParams(30, 20, 20, 20, 20)
    history: list[dict] = []

    def name(p: GlobalParams) -> str:
        return "cfg-" + "-".join(str(int(v)) for v in p.as_tuple())

    for rnd in range(max(1, runs // (2 * trial))):
        nbrs = _neighbours(best, step, lo, hi)
        cand = nbrs[int(rng.integers(len(nbrs)))]
        scored = {}
        for p in (best, cand):
            h = Heuristic(name(p), "param-adjustment", p)
            for i in range(trial):
                reward = float(evaluate(p, rnd * trial + i))
                h = update_utility(h, reward)
                history.append({"run": len(history), "config": p.as_tuple(), "reward": reward,
                                "utility": h.utility})
            scored[p] = h.utility
        if scored[cand] > scored[best]:
            best = cand
        for row in history[-2 * trial:]:
            row["best"] = best.as_tuple()
    return best, history
