"""Trial runner, error metrics and the experiment sweeps."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from circumnav.dynamics import Scenario
from circumnav.geometry import Vec2
from circumnav.profiles import FAST
from circumnav.parallel import pmap
from circumnav.simulation import SimSettings, start_loop, streams


class TrialTooShort(ValueError):
    pass


class MissingModel(LookupError):
    pass


def control_error(d: Vec2, d_star: float) -> float:
    return abs(d.norm() - d_star)


def estimation_error(p_T: Vec2, p_hat_T: Vec2) -> float:
    return (p_T - p_hat_T).norm()


TRIAL_COLUMNS = (
    "t",
    "p_T_x", "p_T_y",
    "p_A_x", "p_A_y",
    "v_T_x", "v_T_y",
    "u_x", "u_y",
    "phi_x", "phi_y",
    "d_hat_x", "d_hat_y",
    "v_hat_x", "v_hat_y",
    "control_error",
    "estimation_error",
)


@dataclass
class TrialLog:
    """Per-step record; ``data`` has one column per ``TRIAL_COLUMNS`` entry."""

    data: np.ndarray
    dt: float
    scenario: Scenario
    diverged: bool = False

    def __len__(self) -> int:
        return len(self.data)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, TRIAL_COLUMNS.index(name)]

    @property
    def control_errors(self) -> np.ndarray:
        return self.column("control_error")

    @property
    def estimation_errors(self) -> np.ndarray:
        return self.column("estimation_error")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRIAL_COLUMNS)
            for row in self.data:
                w.writerow([f"{row[0]:.6f}"] + [f"{x:.17g}" for x in row[1:]])


def run_trial(
    scenario: Scenario,
    estimator,
    settings: SimSettings,
    steps: int,
    seed: int = 0,
    key: tuple[int, ...] = (),
) -> TrialLog:
    """Closed loop at ``1/settings.dt`` Hz from the configured initial
    conditions. Before the window fills, the logged estimate is the fixed
    initial guess ``settings.initial_estimate``. The trial keeps running
    after the range exceeds ``settings.abort_radius`` but is flagged."""
    target_rng, noise_rng, _, _ = streams(seed, *key)
    loop = start_loop(scenario, settings, target_rng, noise_rng)
    out = np.empty((steps, len(TRIAL_COLUMNS)))
    d_star = settings.gains.d_star
    diverged = False
    for k in range(steps):
        r = loop.step(estimator)
        d = r.p_T - r.p_A
        p_hat = r.p_A + r.estimate.d_hat
        out[k] = (
            k * settings.dt,
            r.p_T.x, r.p_T.y,
            r.p_A.x, r.p_A.y,
            r.v_T.x, r.v_T.y,
            r.u.x, r.u.y,
            r.phi.x, r.phi.y,
            r.estimate.d_hat.x, r.estimate.d_hat.y,
            r.estimate.v_hat.x, r.estimate.v_hat.y,
            control_error(d, d_star),
            estimation_error(r.p_T, p_hat),
        )
        diverged = diverged or loop.diverged
    return TrialLog(out, settings.dt, scenario, diverged)


def aggregate(log: TrialLog, settle_seconds: float | None) -> tuple[float, float]:
    """Mean control and estimation error over the final ``settle_seconds`` of
    the trial (the averaging window); ``None`` averages the whole trial."""
    if settle_seconds is None:
        n = len(log)
    else:
        n = int(round(settle_seconds / log.dt))
        if n < 1 or n >= len(log):
            raise TrialTooShort(
                f"trial of {len(log)} steps cannot provide a {settle_seconds} s averaging window "
                "after a settling period"
            )
    return float(log.control_errors[-n:].mean()), float(log.estimation_errors[-n:].mean())


# --- sweeps ------------------------------------------------------------------


@dataclass(frozen=True)
class TrialSpec:
    index: int
    scenario: Scenario
    steps: int
    settings: SimSettings
    key: tuple[int, ...]


@dataclass
class TrialSummary:
    index: int
    label: str
    param: float
    speed_ratio: float
    mean_ctrl: float
    mean_est: float
    diverged: bool


@dataclass
class SweepResult:
    name: str
    trials: list[TrialSummary]
    logs: list[TrialLog] = field(default_factory=list, repr=False)
    include_diverged: bool = True

    def _values(self, attr: str) -> np.ndarray:
        rows = [t for t in self.trials if self.include_diverged or not t.diverged]
        return np.array([getattr(t, attr) for t in rows])

    @property
    def n_diverged(self) -> int:
        return sum(t.diverged for t in self.trials)

    def mean_std(self, attr: str = "mean_ctrl") -> tuple[float, float]:
        v = self._values(attr)
        if len(v) == 0:
            return float("nan"), float("nan")
        return float(v.mean()), float(v.std())

    def write_summary_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["trial", "scenario", "param", "speed_ratio", "mean_ctrl", "mean_est", "diverged"])
            for t in self.trials:
                w.writerow([t.index, t.label, f"{t.param:.10g}", f"{t.speed_ratio:.10g}",
                            f"{t.mean_ctrl:.10g}", f"{t.mean_est:.10g}", int(t.diverged)])

    def long_rows(self):
        for t in self.trials:
            for metric, value in (("control_error", t.mean_ctrl), ("estimation_error", t.mean_est)):
                yield [self.name, t.index, t.label, f"{t.param:.10g}", f"{t.speed_ratio:.10g}",
                       metric, f"{value:.10g}", int(t.diverged)]


def write_long_csv(results: list[SweepResult], path) -> None:
    """Histogram-ready long format: one row per (trial, metric)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep", "trial", "scenario", "param", "speed_ratio", "metric", "value", "diverged"])
        for r in results:
            w.writerows(r.long_rows())


def _run_spec(estimator, args):
    spec, seed, average_seconds, keep_log = args
    log = run_trial(spec.scenario, estimator, spec.settings, spec.steps, seed, spec.key)
    ctrl, est = aggregate(log, average_seconds)
    sc = spec.scenario
    summary = TrialSummary(
        spec.index,
        sc.label(),
        sc.param,
        sc.nominal_speed() / spec.settings.gains.k_t,
        ctrl,
        est,
        log.diverged,
    )
    return summary, (log if keep_log else None)


def run_sweep(
    name: str,
    specs: list[TrialSpec],
    estimator,
    seed: int = 0,
    average_seconds: float | None = 5.0,
    workers: int = 1,
    keep_logs: bool = True,
) -> SweepResult:
    tasks = [(s, seed, average_seconds, keep_logs) for s in specs]
    out = pmap(_run_spec, tasks, workers, shared=estimator)
    logs = [lg for _, lg in out if lg is not None]
    return SweepResult(name, [s for s, _ in out], logs)


def _grid_specs(family, values, steps, settings, sweep_id):
    return [
        TrialSpec(j, Scenario(family, float(v)), steps, settings, (sweep_id, j))
        for j, v in enumerate(values)
    ]


CONSTANT_SPEEDS = np.linspace(1.0, 15.0, 15)
CIRCLE_RATES = np.linspace(0.05, 0.4, 15)
FAST_SPEEDS = np.linspace(1.0, 24.0, 15)
FAST_RATES = np.linspace(0.1, 1.2, 15)
NOISE_SIGMAS = (0.0, 0.1, 0.2, 0.3)

# stream-key prefixes keep every sweep's randomness disjoint
_CV, _CIRCLE, _NH, _NOISE, _FAST_CV, _FAST_CIRCLE, _FAST_NH = range(7)


def sweep_constant_velocity(estimator, settings: SimSettings = SimSettings(), seed: int = 0,
                            workers: int = 1, steps: int = 1000, keep_logs: bool = True) -> SweepResult:
    specs = _grid_specs("constant", CONSTANT_SPEEDS, steps, settings, _CV)
    return run_sweep("constant-velocity", specs, estimator, seed, 5.0, workers, keep_logs)


def sweep_circle(estimator, settings: SimSettings = SimSettings(), seed: int = 0,
                 workers: int = 1, steps: int = 750, keep_logs: bool = True) -> SweepResult:
    specs = _grid_specs("circle", CIRCLE_RATES, steps, settings, _CIRCLE)
    return run_sweep("circle", specs, estimator, seed, 5.0, workers, keep_logs)


def sweep_nonholonomic(estimator, settings: SimSettings = SimSettings(), n_trials: int = 1000,
                       seed: int = 0, workers: int = 1, steps: int = 1000,
                       average_seconds: float | None = None, keep_logs: bool = True) -> SweepResult:
    specs = [TrialSpec(j, Scenario("nonholonomic"), steps, settings, (_NH, j)) for j in range(n_trials)]
    return run_sweep("nonholonomic", specs, estimator, seed, average_seconds, workers, keep_logs)


def sweep_noise(estimators: dict[float, object], settings: SimSettings = SimSettings(),
                sigmas=NOISE_SIGMAS, n_trials: int = 500, steps: int = 500, seed: int = 0,
                workers: int = 1, keep_logs: bool = True) -> dict[float, SweepResult]:
    """One sweep per noise level. Every level reuses the same stream keys, so
    the target trajectories are identical; only the observation noise and the
    estimator differ."""
    missing = [s for s in sigmas if s not in estimators]
    if missing:
        raise MissingModel(
            f"noise sweep needs one model per sigma {list(sigmas)}; missing {missing}"
        )
    out = {}
    for sigma in sigmas:
        st = replace(settings, noise=replace(settings.noise, sigma=float(sigma)))
        specs = [TrialSpec(j, Scenario("nonholonomic"), steps, st, (_NOISE, j)) for j in range(n_trials)]
        out[sigma] = run_sweep(f"noise-{sigma:g}", specs, estimators[sigma], seed, None, workers, keep_logs)
    return out


def fast_settings(settings: SimSettings = SimSettings()) -> SimSettings:
    return replace(settings, gains=replace(settings.gains, k_t=FAST.k_t, k_r=FAST.k_r))


def sweep_fast_target(estimator, settings: SimSettings | None = None, seed: int = 0,
                      workers: int = 1, steps: int = 500, keep_logs: bool = True) -> dict[str, SweepResult]:
    """Constant velocity, circle and constant-speed nonholonomic targets with
    speeds approaching the tangential gain. ``settings`` defaults to the
    fast profile gains."""
    st = fast_settings() if settings is None else settings
    groups = {
        "fast-constant": _grid_specs("constant", FAST_SPEEDS, steps, st, _FAST_CV),
        "fast-circle": _grid_specs("circle", FAST_RATES, steps, st, _FAST_CIRCLE),
        "fast-nonholonomic": _grid_specs("fast-nonholonomic", FAST_SPEEDS, steps, st, _FAST_NH),
    }
    return {
        name: run_sweep(name, specs, estimator, seed, 5.0, workers, keep_logs)
        for name, specs in groups.items()
    }
