"""Iterative on-policy training of the LSTM estimator.

Every iteration simulates fresh closed-loop episodes. At each gated step the
controller is driven by the ground truth with probability ``max(0, min(1, s))``
where ``s = 1 - 2 i / I``, and by the current model otherwise; either way the
stored sample pairs the observation window with the ground truth. The model
is then fitted to that iteration's dataset with minibatch Adam on the MSE.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from circumnav.controller import TargetEstimate
from circumnav.dynamics import Scenario
from circumnav.geometry import Vec2
from circumnav.neural import (
    AdamState,
    LstmModel,
    LstmParams,
    adam_step,
    backward_batch,
    clip_global_norm,
    forward_batch,
    init_params,
    mse_loss,
    save_weights,
)
from circumnav.parallel import pmap
from circumnav.simulation import SimSettings, start_loop, streams

log = logging.getLogger(__name__)

# evaluation grids excluded from training draws: (family, grid, half-width)
HELD_OUT = (
    ("constant", np.linspace(1.0, 15.0, 15), 0.05),
    ("constant", np.linspace(1.0, 24.0, 15), 0.05),
    ("circle", np.linspace(0.05, 0.4, 15), 0.001),
    ("circle", np.linspace(0.1, 1.2, 15), 0.001),
    ("fast-nonholonomic", np.linspace(1.0, 24.0, 15), 0.05),
)


class EpisodeDivergence(RuntimeError):
    pass


class NonFiniteLoss(FloatingPointError):
    def __init__(self, msg: str, params: LstmParams, batch: int, epoch: int):
        super().__init__(msg)
        self.params = params
        self.batch = batch
        self.epoch = epoch


@dataclass(frozen=True)
class TrajectoryMix:
    """Family weights and parameter ranges for training episodes."""

    families: tuple[str, ...] = ("constant", "circle", "nonholonomic")
    weights: tuple[float, ...] | None = None
    speed_range: tuple[float, float] = (1.0, 15.0)
    omega_range: tuple[float, float] = (0.05, 0.4)
    circle_radius: float = 20.0
    # initial agent range from the target; bearing angle is uniform
    start_range: tuple[float, float] = (10.0, 20.0)
    exclude_test_grid: bool = True

    def _uniform_excluding(self, rng, family: str, lo: float, hi: float) -> float:
        for _ in range(1000):
            x = float(rng.uniform(lo, hi))
            if not self.exclude_test_grid:
                return x
            if not any(
                fam == family and np.any(np.abs(grid - x) <= w) for fam, grid, w in HELD_OUT
            ):
                return x
        raise RuntimeError(f"could not draw a {family} parameter outside the test grid in [{lo}, {hi}]")

    def draw(self, rng: np.random.Generator) -> tuple[Scenario, Vec2]:
        fams = self.families
        if self.weights is None:
            family = fams[int(rng.integers(len(fams)))]
        else:
            w = np.asarray(self.weights, dtype=float)
            family = fams[int(rng.choice(len(fams), p=w / w.sum()))]
        if family in ("constant", "fast-nonholonomic"):
            sc = Scenario(family, self._uniform_excluding(rng, family, *self.speed_range))
        elif family == "circle":
            sc = Scenario(family, self._uniform_excluding(rng, family, *self.omega_range), self.circle_radius)
        else:
            sc = Scenario(family)
        rho = float(rng.uniform(*self.start_range))
        beta = float(rng.uniform(-math.pi, math.pi))
        return sc, Vec2(rho * math.cos(beta), rho * math.sin(beta))


@dataclass(frozen=True)
class TrainingConfig:
    iterations: int = 50
    samples_per_iteration: int = 100_000
    epochs: int = 30
    batch_size: int = 64
    lr: float = 0.001
    hidden: int = 512
    master_seed: int = 0
    episode_steps: int = 1000
    grad_clip: float | None = 5.0
    input_velocity_scale: float = 1.0
    target_scale: float = 1.0
    sim: SimSettings = field(default_factory=SimSettings)
    mix: TrajectoryMix = field(default_factory=TrajectoryMix)
    max_attempts: int = 20

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.samples_per_iteration < 1 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("samples_per_iteration and batch_size must be >= 1, epochs >= 0")
        if self.episode_steps <= self.sim.gains.window:
            raise ValueError("episode_steps must exceed the window length")

    @property
    def window(self) -> int:
        return self.sim.observation_window

    @property
    def noise_sigma(self) -> float:
        return self.sim.noise.sigma

    def new_model(self) -> LstmModel:
        return LstmModel(
            init_params(self.hidden, self.master_seed),
            self.window,
            self.input_velocity_scale,
            self.target_scale,
        )


def switching_threshold(i: int, total: int) -> float:
    if total < 1 or not 0 <= i <= total:
        raise ValueError(f"need 0 <= i <= I and I >= 1, got i={i}, I={total}")
    return -(2.0 / total) * i + 1.0


@dataclass
class Dataset:
    X: np.ndarray  # (N, L, 4) observation windows, oldest first
    Y: np.ndarray  # (N, 4) true [d_x, d_y, vT_x, vT_y] at the window's last step
    used_truth: np.ndarray  # (N,) whether the controller consumed ground truth
    control_error: np.ndarray  # (N,) | |d| - d* | at the sample step

    def __len__(self) -> int:
        return len(self.Y)

    @property
    def gt_fraction(self) -> float:
        return float(self.used_truth.mean()) if len(self) else float("nan")


@dataclass
class _Episode:
    X: np.ndarray
    Y: np.ndarray
    used_truth: np.ndarray
    control_error: np.ndarray
    attempts: int


class ScheduledSampler:
    """Per-decision switch between ground truth and the model estimate."""

    def __init__(self, model: LstmModel, threshold: float, rng: np.random.Generator):
        self.model, self.s, self.rng = model, threshold, rng
        self.last_used_truth = True

    def __call__(self, window, agent_pos, truth: TargetEstimate) -> TargetEstimate:
        r = self.rng.random()
        self.last_used_truth = r < self.s
        if self.last_used_truth:
            return truth
        return self.model.estimate(window)


def simulate_episode(cfg: TrainingConfig, model: LstmModel, threshold: float, key: tuple[int, ...]) -> _Episode:
    """One closed-loop episode; divergent attempts are redrawn with the next
    attempt index as part of the stream key."""
    gains = cfg.sim.gains
    n = cfg.episode_steps - gains.window
    for attempt in range(cfg.max_attempts):
        target_rng, noise_rng, switch_rng, mix_rng = streams(cfg.master_seed, *key, attempt)
        scenario, start = cfg.mix.draw(mix_rng)
        loop = start_loop(scenario, cfg.sim, target_rng, noise_rng, start)
        sampler = ScheduledSampler(model, threshold, switch_rng)
        X = np.empty((n, cfg.window, 4))
        Y = np.empty((n, 4))
        used = np.empty(n, dtype=bool)
        err = np.empty(n)
        j = 0
        for _ in range(cfg.episode_steps):
            rec = loop.step(sampler)
            if rec.gated:
                X[j] = loop.window_array()
                d = rec.p_T - rec.p_A
                Y[j] = (d.x, d.y, rec.v_T.x, rec.v_T.y)
                used[j] = sampler.last_used_truth
                err[j] = abs(d.norm() - gains.d_star)
                j += 1
            if loop.diverged:
                break
        if not loop.diverged:
            return _Episode(X, Y, used, err, attempt + 1)
        log.debug("episode %s diverged on attempt %d; redrawing", key, attempt)
    raise EpisodeDivergence(f"episode {key} diverged {cfg.max_attempts} times in a row")


def _episode_task(shared, task):
    cfg, model = shared
    threshold, key = task
    return simulate_episode(cfg, model, threshold, key)


def collect_iteration_dataset(
    cfg: TrainingConfig, model: LstmModel, i: int, workers: int = 1
) -> Dataset:
    s = switching_threshold(i, cfg.iterations)
    per_episode = cfg.episode_steps - cfg.sim.gains.window
    n_episodes = math.ceil(cfg.samples_per_iteration / per_episode)
    tasks = [(s, (i, e)) for e in range(n_episodes)]
    episodes = pmap(_episode_task, tasks, workers, shared=(cfg, model))
    m = cfg.samples_per_iteration

    def cat(name):
        return np.concatenate([getattr(e, name) for e in episodes])[:m]

    return Dataset(cat("X"), cat("Y"), cat("used_truth"), cat("control_error"))


def train_iteration(
    model: LstmModel,
    data: Dataset,
    cfg: TrainingConfig,
    rng: np.random.Generator,
    opt: AdamState | None = None,
) -> tuple[LstmModel, AdamState, list[float]]:
    """``cfg.epochs`` passes of shuffled minibatch Adam on the MSE. Returns
    the updated model, optimiser state and the mean loss of each epoch."""
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    p = model.params
    opt = AdamState.fresh(p) if opt is None else opt
    Xs = model.scale_inputs(data.X)
    Ys = data.Y * model.target_scale
    N = len(data)
    losses = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(N)
        total = 0.0
        for b, start in enumerate(range(0, N, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            y, cache = forward_batch(Xs[idx], p, cache=True)
            loss, dy = mse_loss(y, Ys[idx])
            if not math.isfinite(loss):
                raise NonFiniteLoss(f"non-finite loss in epoch {epoch}, batch {b}", p.copy(), b, epoch)
            g = backward_batch(cache, dy, p)
            if cfg.grad_clip is not None:
                g, _ = clip_global_norm(g, cfg.grad_clip)
            p, opt = adam_step(p, g, opt, cfg.lr)
            total += loss * len(idx)
        losses.append(total / N)
    return model.replace(params=p), opt, losses


@dataclass
class IterationReport:
    iteration: int
    threshold: float
    gt_fraction: float
    mean_control_error: float
    epoch_losses: list[float]
    seconds: float


def run_training(
    cfg: TrainingConfig,
    out_dir: Path | None = None,
    workers: int = 1,
    record_wallclock: bool = False,
) -> tuple[LstmModel, list[IterationReport]]:
    """Full pipeline. With ``out_dir`` it writes ``checkpoints/iter_XXX.bin``
    after each iteration, ``weights.bin`` at the end and ``training.csv``.
    On failure the last good model is saved to ``checkpoints/last_good.bin``
    before the error propagates."""
    model = cfg.new_model()
    opt = None
    reports: list[IterationReport] = []
    ckpt_dir = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        ckpt_dir = out_dir / "checkpoints"
        ckpt_dir.mkdir(parents=True, exist_ok=True)
    try:
        for i in range(cfg.iterations):
            t_it = time.perf_counter()
            data = collect_iteration_dataset(cfg, model, i, workers)
            train_rng = streams(cfg.master_seed, 1_000_000 + i, n=1)[0]
            model, opt, losses = train_iteration(model, data, cfg, train_rng, opt)
            rep = IterationReport(
                i,
                switching_threshold(i, cfg.iterations),
                data.gt_fraction,
                float(data.control_error.mean()),
                losses,
                time.perf_counter() - t_it,
            )
            reports.append(rep)
            log.info(
                "iteration %d/%d: s=%.3f gt=%.3f ctrl_err=%.3f loss=%s (%.1fs)",
                i + 1, cfg.iterations, rep.threshold, rep.gt_fraction,
                rep.mean_control_error, f"{losses[-1]:.5g}" if losses else "-", rep.seconds,
            )
            if ckpt_dir is not None:
                save_weights(model, ckpt_dir / f"iter_{i:03d}.bin")
                write_training_csv(reports, out_dir / "training.csv", record_wallclock)
    except Exception:
        if ckpt_dir is not None:
            save_weights(model, ckpt_dir / "last_good.bin")
        raise
    if out_dir is not None:
        save_weights(model, out_dir / "weights.bin")
    return model, reports


def write_training_csv(reports: list[IterationReport], path: Path, wallclock: bool = False) -> None:
    """One row per (iteration, epoch). ``wallclock`` (seconds since start) is
    left blank unless timing was requested, so reruns stay byte-identical."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "epoch", "loss", "gt_fraction", "mean_control_error", "wallclock"])
        elapsed = 0.0
        for r in reports:
            elapsed += r.seconds
            wall = f"{elapsed:.3f}" if wallclock else ""
            rows = r.epoch_losses or [float("nan")]
            for e, loss in enumerate(rows):
                w.writerow([r.iteration, e, f"{loss:.10g}", f"{r.gt_fraction:.6f}", f"{r.mean_control_error:.6f}", wall])
