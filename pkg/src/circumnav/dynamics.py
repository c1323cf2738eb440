"""Target trajectory families and single-integrator agent kinematics.

Stepping functions are pure (state in, state out). The ``*Process`` classes
wrap them into stateful trajectories that the closed-loop simulation advances
one control period at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from circumnav.geometry import ZERO, Vec2

DEFAULT_FREQUENCY = 50.0
RESAMPLE_PERIOD = 75


class NonFiniteCommand(ValueError):
    pass


@dataclass(frozen=True)
class SimClock:
    step_index: int = 0
    dt: float = 1.0 / DEFAULT_FREQUENCY

    @classmethod
    def from_frequency(cls, frequency: float = DEFAULT_FREQUENCY) -> SimClock:
        return cls(0, 1.0 / frequency)

    @property
    def t(self) -> float:
        return self.step_index * self.dt

    def tick(self) -> SimClock:
        return SimClock(self.step_index + 1, self.dt)


# --- constant velocity -------------------------------------------------------


@dataclass(frozen=True)
class ConstantVelocityTarget:
    pos: Vec2
    v: float

    @property
    def vel(self) -> Vec2:
        return Vec2(self.v, 0.0)


def constant_velocity_step(state: ConstantVelocityTarget, dt: float) -> ConstantVelocityTarget:
    return ConstantVelocityTarget(Vec2(state.pos.x + state.v * dt, state.pos.y), state.v)


# --- circle ------------------------------------------------------------------


@dataclass(frozen=True)
class CircleTarget:
    r: float
    omega: float


def circle_position(t: float, r: float, omega: float) -> tuple[Vec2, Vec2]:
    """Position and analytic velocity on the circle of radius ``r`` centred at
    ``[0, r]``, passing through the origin at ``t = 0``."""
    if r <= 0:
        raise ValueError(f"circle radius must be positive, got {r}")
    phase = omega * t - math.pi / 2
    c, s = math.cos(phase), math.sin(phase)
    return Vec2(r * c, r * s + r), Vec2(-r * omega * s, r * omega * c)


# --- double-integrator nonholonomic ------------------------------------------


@dataclass(frozen=True)
class NonholonomicBounds:
    v_min: float = 0.0
    v_max: float = 20.0
    omega_min: float = -math.pi / 2
    omega_max: float = math.pi / 2
    a_min: float = -5.0
    a_max: float = 5.0
    alpha_min: float = -math.pi / 2
    alpha_max: float = math.pi / 2


@dataclass(frozen=True)
class NonholonomicTarget:
    pos: Vec2
    heading: float
    v: float
    omega: float
    a: float = 0.0
    alpha: float = 0.0
    resample_period: int = RESAMPLE_PERIOD
    bounds: NonholonomicBounds = field(default_factory=NonholonomicBounds)
    # constant-speed variant: a = alpha = 0 and omega itself is resampled
    fixed_speed: bool = False

    @property
    def vel(self) -> Vec2:
        return Vec2(self.v * math.cos(self.heading), self.v * math.sin(self.heading))


def _clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def nonholonomic_step(state: NonholonomicTarget, dt: float) -> NonholonomicTarget:
    b = state.bounds
    v = _clamp(state.v + state.a * dt, b.v_min, b.v_max)
    omega = _clamp(state.omega + state.alpha * dt, b.omega_min, b.omega_max)
    pos = Vec2(
        state.pos.x + v * math.cos(state.heading) * dt,
        state.pos.y + v * math.sin(state.heading) * dt,
    )
    return replace(state, pos=pos, v=v, omega=omega, heading=state.heading + omega * dt)


def resample_nonholonomic_inputs(
    state: NonholonomicTarget, rng: np.random.Generator
) -> NonholonomicTarget:
    b = state.bounds
    if state.fixed_speed:
        return replace(state, a=0.0, alpha=0.0, omega=float(rng.uniform(b.omega_min, b.omega_max)))
    a = float(rng.uniform(b.a_min, b.a_max))
    alpha = float(rng.uniform(b.alpha_min, b.alpha_max))
    return replace(state, a=a, alpha=alpha, omega=0.0)


# --- agent -------------------------------------------------------------------


@dataclass(frozen=True)
class AgentState:
    pos: Vec2
    vel: Vec2 = ZERO


def agent_step(state: AgentState, u: Vec2, dt: float) -> AgentState:
    if not u.is_finite():
        raise NonFiniteCommand(f"control command {u} is not finite")
    return AgentState(Vec2(state.pos.x + u.x * dt, state.pos.y + u.y * dt), u)


# --- stateful trajectories ---------------------------------------------------


class ConstantVelocityProcess:
    """Closed form ``x = x0 + v t`` so long runs accumulate no drift."""

    def __init__(self, v: float, dt: float, start: Vec2 = ZERO):
        self.v, self.dt, self.start = v, dt, start
        self.k = 0

    @property
    def pos(self) -> Vec2:
        return Vec2(self.start.x + self.v * self.k * self.dt, self.start.y)

    @property
    def vel(self) -> Vec2:
        return Vec2(self.v, 0.0)

    def advance(self) -> None:
        self.k += 1


class CircleProcess:
    def __init__(self, r: float, omega: float, dt: float):
        self.r, self.omega, self.dt = r, omega, dt
        self.k = 0
        self._update()

    def _update(self) -> None:
        self.pos, self.vel = circle_position(self.k * self.dt, self.r, self.omega)

    def advance(self) -> None:
        self.k += 1
        self._update()


class NonholonomicProcess:
    """Euler-integrated double integrator whose inputs are redrawn every
    ``resample_period`` steps (never at step 0; the caller supplies the
    initial draw)."""

    def __init__(self, state: NonholonomicTarget, dt: float, rng: np.random.Generator):
        self.state, self.dt, self.rng = state, dt, rng
        self.k = 0

    @property
    def pos(self) -> Vec2:
        return self.state.pos

    @property
    def vel(self) -> Vec2:
        return self.state.vel

    def advance(self) -> None:
        if self.k > 0 and self.k % self.state.resample_period == 0:
            self.state = resample_nonholonomic_inputs(self.state, self.rng)
        self.state = nonholonomic_step(self.state, self.dt)
        self.k += 1


def initial_nonholonomic(
    rng: np.random.Generator,
    speed: float | None = None,
    bounds: NonholonomicBounds = NonholonomicBounds(),
    start: Vec2 = ZERO,
) -> NonholonomicTarget:
    """Trial-start state: random heading and speed, inputs drawn from the same
    ranges as the in-trial resampling. Passing ``speed`` selects the
    constant-speed, random-yaw-rate variant."""
    heading = float(rng.uniform(-math.pi, math.pi))
    if speed is None:
        v = float(rng.uniform(bounds.v_min, bounds.v_max))
        state = NonholonomicTarget(start, heading, v, 0.0, bounds=bounds)
    else:
        wide = replace(bounds, v_min=min(bounds.v_min, speed), v_max=max(bounds.v_max, speed))
        state = NonholonomicTarget(start, heading, speed, 0.0, bounds=wide, fixed_speed=True)
    return resample_nonholonomic_inputs(state, rng)


# --- scenarios ---------------------------------------------------------------

FAMILIES = ("constant", "circle", "nonholonomic", "fast-nonholonomic")


@dataclass(frozen=True)
class Scenario:
    """A target trajectory family plus its defining parameter.

    ``param`` is the speed for ``constant`` and ``fast-nonholonomic`` and the
    angular rate for ``circle``; ``nonholonomic`` ignores it.
    """

    family: str
    param: float = 0.0
    radius: float = 20.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown trajectory family {self.family!r}; expected one of {FAMILIES}")

    @classmethod
    def parse(cls, text: str) -> Scenario:
        """``constant:9``, ``circle:0.4``, ``nonholonomic``, ``fast-nonholonomic:15``."""
        family, _, value = text.partition(":")
        family = family.strip()
        if family == "fast-constant":
            family = "constant"
        elif family == "fast-circle":
            family = "circle"
        if family in ("constant", "circle", "fast-nonholonomic") and not value:
            raise ValueError(f"scenario {text!r} needs a parameter, e.g. {family}:5")
        return cls(family, float(value) if value else 0.0)

    def nominal_speed(self) -> float:
        if self.family == "circle":
            return abs(self.radius * self.param)
        if self.family == "nonholonomic":
            return float("nan")
        return abs(self.param)

    def label(self) -> str:
        return self.family if self.family == "nonholonomic" else f"{self.family}:{self.param:g}"


def make_target(scenario: Scenario, dt: float, rng: np.random.Generator, start: Vec2 = ZERO):
    if scenario.family == "constant":
        return ConstantVelocityProcess(scenario.param, dt, start)
    if scenario.family == "circle":
        if start != ZERO:
            raise ValueError("circle trajectories always start at the origin")
        return CircleProcess(scenario.radius, scenario.param, dt)
    speed = scenario.param if scenario.family == "fast-nonholonomic" else None
    return NonholonomicProcess(initial_nonholonomic(rng, speed, start=start), dt, rng)
