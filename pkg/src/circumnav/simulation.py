"""Closed-loop stepping shared by data collection and evaluation.

Each control period (``dt``) the loop observes the target, asks an estimator
for ``[d_hat, v_hat]`` once the window is full, and then moves the agent in
``substeps`` equal sub-intervals. The estimate is held for the whole period;
the bearing direction used for the tangential and radial unit vectors is
refreshed at every sub-interval (keeping the observation's noise
perturbation). ``substeps=1`` is a plain zero-order-hold Euler step.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from circumnav.controller import ControllerGains, TargetEstimate, control
from circumnav.dynamics import AgentState, Scenario, agent_step, make_target
from circumnav.geometry import ZERO, Bearing, Vec2, unit_bearing
from circumnav.neural.lstm import LstmModel
from circumnav.sensing import NOISELESS, NoiseModel, observe, perturb_bearing


class Estimator(Protocol):
    def __call__(self, window: np.ndarray, agent_pos: Vec2, truth: TargetEstimate) -> TargetEstimate: ...


class OracleEstimator:
    """Returns the true displacement and target velocity."""

    name = "oracle"

    def __call__(self, window, agent_pos, truth):
        return truth


class StaticEstimator:
    """No-estimator ablation: the target is assumed to sit at the initial
    guess forever, with zero velocity."""

    name = "static"

    def __init__(self, p_hat: Vec2 = Vec2(5.0, 0.0)):
        self.p_hat = p_hat

    def __call__(self, window, agent_pos, truth):
        return TargetEstimate(self.p_hat - agent_pos, ZERO)


class LstmEstimator:
    name = "lstm"

    def __init__(self, model: LstmModel):
        self.model = model

    def __call__(self, window, agent_pos, truth):
        return self.model.estimate(window)


@dataclass(frozen=True)
class SimSettings:
    gains: ControllerGains = field(default_factory=ControllerGains)
    dt: float = 0.02
    substeps: int = 20
    noise: NoiseModel = NOISELESS
    window_plus_one: bool = False
    agent_start: Vec2 = Vec2(15.0, 0.0)
    initial_estimate: Vec2 = Vec2(5.0, 0.0)
    abort_radius: float = 500.0
    max_speed: float | None = None

    def __post_init__(self):
        if self.dt <= 0 or self.substeps < 1:
            raise ValueError(f"need dt > 0 and substeps >= 1, got {self.dt}, {self.substeps}")

    @property
    def observation_window(self) -> int:
        """Observations fed to the estimator: ``l``, or ``l + 1`` when the
        window includes both ends ``O(t - l) ... O(t)``."""
        return self.gains.window + (1 if self.window_plus_one else 0)


def streams(master_seed: int, *key: int, n: int = 4) -> list[np.random.Generator]:
    """Independent PCG64 generators for one trial or episode.

    The streams are children of ``SeedSequence(master_seed, spawn_key=key)``:
    by convention [target, noise, switching, misc].
    """
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return [np.random.Generator(np.random.PCG64(c)) for c in ss.spawn(n)]


@dataclass
class StepRecord:
    k: int
    p_T: Vec2
    p_A: Vec2
    v_T: Vec2
    u: Vec2
    phi: Vec2
    estimate: TargetEstimate
    gated: bool


class ClosedLoop:
    def __init__(self, target, settings: SimSettings, noise_rng: np.random.Generator | None = None,
                 agent_start: Vec2 | None = None):
        self.target = target
        self.s = settings
        self.noise_rng = noise_rng
        self.agent = AgentState(settings.agent_start if agent_start is None else agent_start)
        self.window: deque[np.ndarray] = deque(maxlen=settings.observation_window)
        self.k = 0
        self.diverged = False

    def window_array(self) -> np.ndarray:
        return np.stack(self.window)

    def truth(self) -> TargetEstimate:
        return TargetEstimate(self.target.pos - self.agent.pos, self.target.vel)

    def step(self, estimator: Callable) -> StepRecord:
        s = self.s
        gains = s.gains
        k = self.k
        p_T, v_T = self.target.pos, self.target.vel
        p_A = self.agent.pos
        obs = observe(p_T, self.agent, s.noise, self.noise_rng)
        self.window.append(obs.as_array())
        gated = k >= gains.window
        if gated:
            est = estimator(self.window_array(), p_A, TargetEstimate(p_T - p_A, v_T))
        else:
            est = TargetEstimate(s.initial_estimate - p_A, ZERO)

        self.target.advance()
        p_next = self.target.pos
        n = s.substeps
        h = s.dt / n
        noisy = s.noise.sigma > 0
        u0 = None
        for j in range(n):
            if j == 0:
                phi = obs.bearing
            else:
                frac = j / n
                pj = Vec2(p_T.x + (p_next.x - p_T.x) * frac, p_T.y + (p_next.y - p_T.y) * frac)
                phi = unit_bearing(pj, self.agent.pos).dir
                if noisy:
                    phi = perturb_bearing(phi, obs.bearing_noise)
            u = control(k, Bearing(phi), est if gated else None, gains, s.max_speed)
            if u0 is None:
                u0 = u
            self.agent = agent_step(self.agent, u, h)
        if not (math.isfinite(self.agent.pos.x) and math.isfinite(self.agent.pos.y)):
            self.diverged = True
        elif (p_next - self.agent.pos).norm() > s.abort_radius:
            self.diverged = True
        self.k += 1
        return StepRecord(k, p_T, p_A, v_T, u0, obs.bearing, est, gated)


def start_loop(
    scenario: Scenario,
    settings: SimSettings,
    target_rng: np.random.Generator,
    noise_rng: np.random.Generator | None,
    agent_start: Vec2 | None = None,
) -> ClosedLoop:
    target = make_target(scenario, settings.dt, target_rng)
    return ClosedLoop(target, settings, noise_rng, agent_start)
