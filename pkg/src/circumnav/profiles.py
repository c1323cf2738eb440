"""Named numeric profiles for the experiments.

Every experiment pulls its gains, initial conditions and training
hyperparameters from one of these frozen sets so that a value is defined in
exactly one place.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


class UnknownProfile(KeyError):
    pass


@dataclass(frozen=True)
class Profile:
    name: str
    k_t: float = 60.0
    k_r: float = 10.0
    d_star: float = 10.0
    frequency: float = 50.0
    window: int = 60
    target_start: tuple[float, float] = (0.0, 0.0)
    agent_start: tuple[float, float] = (15.0, 0.0)
    initial_estimate: tuple[float, float] = (5.0, 0.0)
    hidden: int = 512
    lr: float = 0.001
    iterations: int = 50
    epochs: int = 30
    batch_size: int = 64
    dataset_size: int = 100_000

    @property
    def dt(self) -> float:
        return 1.0 / self.frequency

    def canonical(self) -> str:
        """Stable text form, used to pin the values in tests."""
        return ";".join(f"{f.name}={getattr(self, f.name)!r}" for f in dataclasses.fields(self))


PAPER = Profile(name="paper")
FAST = dataclasses.replace(PAPER, name="fast", k_t=25.0, k_r=4.0)

_REGISTRY = {p.name: p for p in (PAPER, FAST)}


def profile(name: str) -> Profile:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownProfile(f"unknown profile {name!r}; known: {sorted(_REGISTRY)}") from None
