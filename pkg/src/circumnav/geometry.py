"""Planar vectors and the bearing constructions used by the controller.

Frame convention: x to the right, y up. A clockwise quarter turn maps
``[x, y]`` to ``[y, -x]``. Since the bearing points from the agent to the
target, moving along the clockwise-rotated bearing makes the agent orbit the
target counter-clockwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

ZERO_RANGE = 1e-9


class CoincidentPositions(ValueError):
    """Target and agent are closer than ``ZERO_RANGE``; no bearing exists."""


@dataclass(frozen=True, slots=True)
class Vec2:
    x: float
    y: float

    def __add__(self, other: Vec2) -> Vec2:
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: Vec2) -> Vec2:
        return Vec2(self.x - other.x, self.y - other.y)

    def __mul__(self, s: float) -> Vec2:
        return Vec2(self.x * s, self.y * s)

    __rmul__ = __mul__

    def __neg__(self) -> Vec2:
        return Vec2(-self.x, -self.y)

    def __truediv__(self, s: float) -> Vec2:
        return Vec2(self.x / s, self.y / s)

    def dot(self, other: Vec2) -> float:
        return self.x * other.x + self.y * other.y

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


ZERO = Vec2(0.0, 0.0)


@dataclass(frozen=True, slots=True)
class Bearing:
    """Unit direction. Construct through :func:`unit_bearing` or
    :func:`perpendicular_cw` so the unit-norm invariant holds."""

    dir: Vec2

    @property
    def x(self) -> float:
        return self.dir.x

    @property
    def y(self) -> float:
        return self.dir.y


def displacement(target_pos: Vec2, agent_pos: Vec2) -> Vec2:
    """Vector pointing from the agent to the target."""
    return target_pos - agent_pos


def unit_bearing(target_pos: Vec2, agent_pos: Vec2) -> Bearing:
    d = target_pos - agent_pos
    rng = d.norm()
    if rng <= ZERO_RANGE:
        raise CoincidentPositions(
            f"target {target_pos} and agent {agent_pos} are {rng:.3g} m apart"
        )
    return Bearing(Vec2(d.x / rng, d.y / rng))


def perpendicular_cw(b: Bearing) -> Bearing:
    return Bearing(Vec2(b.dir.y, -b.dir.x))
