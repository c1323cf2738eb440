"""Per-step estimator observations with optional Gaussian input noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from circumnav.dynamics import AgentState
from circumnav.geometry import ZERO, ZERO_RANGE, Vec2, unit_bearing


class DegenerateBearing(ValueError):
    """The noise cancelled the bearing almost exactly; it cannot be renormalised."""


@dataclass(frozen=True)
class NoiseModel:
    sigma: float = 0.0
    # feed the perturbed bearing to the estimator without renormalising it
    raw_bearing: bool = False

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"noise sigma must be >= 0, got {self.sigma}")


NOISELESS = NoiseModel()


@dataclass(frozen=True)
class Observation:
    bearing: Vec2
    agent_vel: Vec2
    # additive bearing perturbation that produced ``bearing``; the simulator
    # holds it over the control period when it refreshes the bearing
    bearing_noise: Vec2 = ZERO
    # what the estimator sees; differs from ``bearing`` only in raw-bearing mode
    model_bearing: Vec2 | None = None

    def as_array(self) -> np.ndarray:
        b = self.model_bearing if self.model_bearing is not None else self.bearing
        return np.array([b.x, b.y, self.agent_vel.x, self.agent_vel.y])


def perturb_bearing(bearing: Vec2, noise: Vec2) -> Vec2:
    noisy = bearing + noise
    n = noisy.norm()
    if n < ZERO_RANGE:
        raise DegenerateBearing(f"perturbed bearing {noisy} has norm {n:.3g}")
    return noisy / n


def observe(
    target_pos: Vec2,
    agent: AgentState,
    noise: NoiseModel = NOISELESS,
    rng: np.random.Generator | None = None,
) -> Observation:
    phi = unit_bearing(target_pos, agent.pos).dir
    if noise.sigma == 0:
        return Observation(phi, agent.vel)
    if rng is None:
        raise ValueError("a random generator is required when sigma > 0")
    n = rng.normal(0.0, noise.sigma, size=4)
    bearing_noise = Vec2(float(n[0]), float(n[1]))
    bearing = perturb_bearing(phi, bearing_noise)
    vel = Vec2(agent.vel.x + float(n[2]), agent.vel.y + float(n[3]))
    raw = phi + bearing_noise if noise.raw_bearing else None
    return Observation(bearing, vel, bearing_noise, raw)


def is_unit(v: Vec2, tol: float = 1e-9) -> bool:
    return abs(math.hypot(v.x, v.y) - 1.0) <= tol
