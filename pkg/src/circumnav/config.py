"""Run configuration: INI text with fixed sections, presets and profiles.

Grammar (standard ``configparser`` INI)::

    [section]
    key = value        ; booleans: true/false, pairs: "x, y", optional: none

Sections and keys are exactly the fields listed in ``FIELDS``; anything else
is rejected. Values are resolved in this order, later wins: built-in ``paper``
defaults, profile (gains), preset (problem size), config file, command-line
overrides. Every run writes the fully resolved file next to its outputs, and
feeding that file back reproduces the run.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field

from circumnav.controller import ControllerGains
from circumnav.geometry import Vec2
from circumnav.profiles import profile as get_profile
from circumnav.sensing import NoiseModel
from circumnav.simulation import SimSettings
from circumnav.training import TrainingConfig, TrajectoryMix


class ConfigError(ValueError):
    pass


PRESETS = ("paper", "desk")


def _f(section: str, default, **kw):
    return field(default=default, metadata={"section": section, **kw})


@dataclass
class RunConfig:
    # [run]
    profile: str = _f("run", "paper")
    preset: str = _f("run", "paper")
    seed: int = _f("run", 0)
    # [controller]
    k_t: float = _f("controller", 60.0)
    k_r: float = _f("controller", 10.0)
    d_star: float = _f("controller", 10.0)
    window: int = _f("controller", 60)
    max_speed: float | None = _f("controller", None)
    # [simulation]
    frequency: float = _f("simulation", 50.0)
    substeps: int = _f("simulation", 20)
    abort_radius: float = _f("simulation", 500.0)
    noise_sigma: float = _f("simulation", 0.0)
    raw_noisy_bearing: bool = _f("simulation", False)
    window_plus_one: bool = _f("simulation", False)
    agent_start: tuple[float, float] = _f("simulation", (15.0, 0.0))
    initial_estimate: tuple[float, float] = _f("simulation", (5.0, 0.0))
    # [training]
    iterations: int = _f("training", 50)
    samples_per_iteration: int = _f("training", 100_000)
    epochs: int = _f("training", 30)
    batch_size: int = _f("training", 64)
    lr: float = _f("training", 0.001)
    hidden: int = _f("training", 512)
    episode_steps: int = _f("training", 1000)
    grad_clip: float | None = _f("training", 5.0)
    scale_inputs: bool = _f("training", False)
    target_scale: float = _f("training", 1.0)
    families: tuple[str, ...] = _f("training", ("constant", "circle", "nonholonomic"))
    speed_range: tuple[float, float] = _f("training", (1.0, 15.0))
    omega_range: tuple[float, float] = _f("training", (0.05, 0.4))
    circle_radius: float = _f("training", 20.0)
    start_range: tuple[float, float] = _f("training", (10.0, 20.0))
    # [evaluation]
    trials: int = _f("evaluation", 1000)
    noise_trials: int = _f("evaluation", 500)
    exclude_diverged: bool = _f("evaluation", False)

    # --- derived objects ---------------------------------------------------

    def gains(self) -> ControllerGains:
        return ControllerGains(self.k_t, self.k_r, self.d_star, self.window)

    def sim_settings(self) -> SimSettings:
        return SimSettings(
            gains=self.gains(),
            dt=1.0 / self.frequency,
            substeps=self.substeps,
            noise=NoiseModel(self.noise_sigma, self.raw_noisy_bearing),
            window_plus_one=self.window_plus_one,
            agent_start=Vec2(*self.agent_start),
            initial_estimate=Vec2(*self.initial_estimate),
            abort_radius=self.abort_radius,
            max_speed=self.max_speed,
        )

    def training_config(self) -> TrainingConfig:
        return TrainingConfig(
            iterations=self.iterations,
            samples_per_iteration=self.samples_per_iteration,
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            hidden=self.hidden,
            master_seed=self.seed,
            episode_steps=self.episode_steps,
            grad_clip=self.grad_clip,
            input_velocity_scale=1.0 / self.k_t if self.scale_inputs else 1.0,
            target_scale=self.target_scale,
            sim=self.sim_settings(),
            mix=TrajectoryMix(
                families=self.families,
                speed_range=self.speed_range,
                omega_range=self.omega_range,
                circle_radius=self.circle_radius,
                start_range=self.start_range,
            ),
        )

    def validate(self) -> RunConfig:
        if self.profile not in ("paper", "fast"):
            raise ConfigError(f"[run] profile: unknown profile {self.profile!r}")
        if self.preset not in PRESETS:
            raise ConfigError(f"[run] preset: unknown preset {self.preset!r}; expected one of {PRESETS}")
        checks = [
            ("iterations", self.iterations >= 1, "must be >= 1"),
            ("samples_per_iteration", self.samples_per_iteration >= 1, "must be >= 1"),
            ("epochs", self.epochs >= 0, "must be >= 0"),
            ("batch_size", self.batch_size >= 1, "must be >= 1"),
            ("hidden", self.hidden >= 1, "must be >= 1"),
            ("window", self.window >= 1, "must be >= 1"),
            ("episode_steps", self.episode_steps > self.window, "must exceed window"),
            ("substeps", self.substeps >= 1, "must be >= 1"),
            ("frequency", self.frequency > 0, "must be > 0"),
            ("noise_sigma", self.noise_sigma >= 0, "must be >= 0"),
            ("lr", self.lr > 0, "must be > 0"),
            ("k_t", self.k_t > 0, "must be > 0"),
            ("k_r", self.k_r > 0, "must be > 0"),
            ("d_star", self.d_star > 0, "must be > 0"),
            ("trials", self.trials >= 1, "must be >= 1"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise ConfigError(f"[{FIELDS[name].metadata['section']}] {name} = {getattr(self, name)!r}: {msg}")
        for fam in self.families:
            if fam not in ("constant", "circle", "nonholonomic", "fast-nonholonomic"):
                raise ConfigError(f"[training] families: unknown family {fam!r}")
        return self

    # --- text form ---------------------------------------------------------

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        for f in dataclasses.fields(self):
            sec = f.metadata["section"]
            if not cp.has_section(sec):
                cp.add_section(sec)
            cp.set(sec, f.name, _format(getattr(self, f.name)))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _format(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_format(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(name: str, text: str):
    f = FIELDS[name]
    default = f.default
    text = text.strip()
    t = f.type
    try:
        if "None" in t and text.lower() == "none":
            return None
        if "bool" in t:
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"expected true/false, got {text!r}")
        if t.startswith("tuple[str"):
            return tuple(x.strip() for x in text.split(",") if x.strip())
        if t.startswith("tuple[float"):
            parts = tuple(float(x) for x in text.split(","))
            if len(parts) != len(default):
                raise ValueError(f"expected {len(default)} comma-separated numbers")
            return parts
        if t.startswith("int"):
            return int(text)
        if t.startswith("float"):
            return float(text)
        return text
    except ValueError as e:
        raise ConfigError(f"[{f.metadata['section']}] {name} = {text!r}: {e}") from None


def preset_values(preset: str, profile: str) -> dict:
    """Field overrides implied by a profile and a preset."""
    out: dict = {}
    p = get_profile(profile)
    out.update(k_t=p.k_t, k_r=p.k_r, d_star=p.d_star, frequency=p.frequency)
    if profile == "fast":
        out.update(
            families=("constant", "circle", "nonholonomic", "fast-nonholonomic"),
            speed_range=(1.0, 24.0),
            omega_range=(0.1, 1.2),
        )
    if preset == "desk":
        out.update(
            hidden=64,
            window=30,
            iterations=10,
            samples_per_iteration=10_000,
            epochs=5,
            scale_inputs=True,
            target_scale=0.1,
            trials=50,
            noise_trials=30,
        )
    elif preset != "paper":
        raise ConfigError(f"unknown preset {preset!r}; expected one of {PRESETS}")
    return out


def read_ini(text: str, source: str = "<config>") -> dict:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(str(e)) from None
    values = {}
    for sec in cp.sections():
        for key, raw in cp.items(sec):
            f = FIELDS.get(key)
            if f is None or f.metadata["section"] != sec:
                raise ConfigError(f"{source}: unknown key [{sec}] {key}")
            values[key] = _parse(key, raw)
    return values


def resolve(
    file_text: str | None = None,
    overrides: dict | None = None,
    source: str = "<config>",
) -> RunConfig:
    """Build a validated config. ``overrides`` hold already-typed values or
    strings (strings are parsed like file values)."""
    file_values = read_ini(file_text, source) if file_text else {}
    overrides = dict(overrides or {})
    for k, v in list(overrides.items()):
        if k not in FIELDS:
            raise ConfigError(f"unknown setting {k!r}")
        if isinstance(v, str) and FIELDS[k].type != "str":
            overrides[k] = _parse(k, v)
    profile = overrides.get("profile", file_values.get("profile", "paper"))
    preset = overrides.get("preset", file_values.get("preset", "paper"))
    if profile not in ("paper", "fast"):
        raise ConfigError(f"[run] profile: unknown profile {profile!r}")
    values = preset_values(preset, profile)
    values.update(file_values)
    values.update(overrides)
    values.update(profile=profile, preset=preset)
    return RunConfig(**values).validate()
