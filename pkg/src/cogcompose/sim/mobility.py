"""Random-walk mobility with wall reflection."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import MOBILITY_CLASSES


def reflect(x: float, lo: float, hi: float) -> tuple[float, bool]:
    """Fold ``x`` back into ``[lo, hi]``; the flag says whether the direction flipped."""
    span = hi - lo
    if span <= 0:
        return lo, False
    y = (x - lo) % (2 * span)
    flipped = (x - lo) // span % 2 == 1
    return (lo + (2 * span - y) if y > span else lo + y), bool(flipped)


def step_mobility(position: tuple[float, float], heading: float, speed: float, dt: float,
                  arena: tuple[float, float]) -> tuple[tuple[float, float], float]:
    """Advance ``speed * dt`` along ``heading``; reflect off the arena walls."""
    if dt <= 0 or speed <= 0:
        return position, heading
    dx = math.cos(heading) * speed * dt
    dy = math.sin(heading) * speed * dt
    x, fx = reflect(position[0] + dx, 0.0, arena[0])
    y, fy = reflect(position[1] + dy, 0.0, arena[1])
    vx, vy = math.cos(heading) * (-1 if fx else 1), math.sin(heading) * (-1 if fy else 1)
    return (x, y), math.atan2(vy, vx)


@dataclass
class Walker:
    """One node's random walk; speed and heading are re-drawn every epoch.

    The walker draws a unit variate and maps it onto the speed class, so the
    same seed gives the same relative path shape in every mobility class.
    """

    position: tuple[float, float]
    rng: np.random.Generator
    mobility: str
    epoch: float = 2.0
    heading: float = 0.0
    speed: float = 0.0
    until: float = 0.0

    def advance(self, now: float, dt: float, arena: tuple[float, float]) -> tuple[float, float]:
        if now >= self.until:
            lo, hi = MOBILITY_CLASSES[self.mobility]
            u, h = self.rng.random(2)
            self.speed = lo + u * (hi - lo)
            self.heading = 2 * math.pi * h
            self.until = now + self.epoch
        self.position, self.heading = step_mobility(self.position, self.heading, self.speed, dt, arena)
        return self.position
