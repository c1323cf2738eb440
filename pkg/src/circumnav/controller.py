"""Two-phase circumnavigation control law.

Until ``window`` observations have been collected the agent only moves
tangentially. Afterwards the command adds a radial correction proportional
to the estimated range error and feeds forward the estimated target velocity::

    u = k_t * perp_cw(phi)                                       step < l
    u = k_t * perp_cw(phi) + k_r * (|d_hat| - d*) * phi + v_hat  step >= l
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from circumnav.geometry import Bearing, Vec2, perpendicular_cw
from circumnav.profiles import PAPER, Profile


class MissingEstimate(ValueError):
    pass


class NonFiniteEstimate(ValueError):
    pass


@dataclass(frozen=True)
class ControllerGains:
    k_t: float = PAPER.k_t
    k_r: float = PAPER.k_r
    d_star: float = PAPER.d_star
    window: int = PAPER.window

    def __post_init__(self):
        if not (self.k_t > 0 and self.k_r > 0 and self.d_star > 0):
            raise ValueError(f"gains must be positive: {self}")
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")

    @classmethod
    def from_profile(cls, p: Profile, window: int | None = None) -> ControllerGains:
        return cls(p.k_t, p.k_r, p.d_star, p.window if window is None else window)


@dataclass(frozen=True)
class TargetEstimate:
    d_hat: Vec2
    v_hat: Vec2

    def is_finite(self) -> bool:
        return self.d_hat.is_finite() and self.v_hat.is_finite()

    def as_array(self) -> np.ndarray:
        return np.array([self.d_hat.x, self.d_hat.y, self.v_hat.x, self.v_hat.y])

    @classmethod
    def from_array(cls, a) -> TargetEstimate:
        return cls(Vec2(float(a[0]), float(a[1])), Vec2(float(a[2]), float(a[3])))


def control(
    step: int,
    bearing: Bearing,
    estimate: TargetEstimate | None,
    gains: ControllerGains,
    max_speed: float | None = None,
) -> Vec2:
    """Velocity command for the agent. ``max_speed`` optionally saturates the
    command norm; it is off unless explicitly requested."""
    phi = bearing.dir
    tangent = perpendicular_cw(bearing).dir
    u = Vec2(gains.k_t * tangent.x, gains.k_t * tangent.y)
    if step >= gains.window:
        if estimate is None:
            raise MissingEstimate(f"step {step} >= window {gains.window} requires an estimate")
        if not estimate.is_finite():
            raise NonFiniteEstimate(f"estimate {estimate} is not finite")
        radial = gains.k_r * (estimate.d_hat.norm() - gains.d_star)
        u = Vec2(
            u.x + radial * phi.x + estimate.v_hat.x,
            u.y + radial * phi.y + estimate.v_hat.y,
        )
    if max_speed is not None:
        n = math.hypot(u.x, u.y)
        if n > max_speed:
            u = u * (max_speed / n)
    return u
