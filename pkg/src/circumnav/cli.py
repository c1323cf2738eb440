"""Command-line entry point: ``circumnav {train,simulate,sweep,inspect-weights}``.

Exit codes: 0 success, 1 validation/usage error, 2 runtime error,
3 run completed but some trials diverged.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

from circumnav import evaluation as ev
from circumnav.config import ConfigError, RunConfig, resolve
from circumnav.dynamics import Scenario
from circumnav.geometry import Vec2
from circumnav.neural import load_weights, read_header
from circumnav.simulation import LstmEstimator, OracleEstimator, StaticEstimator
from circumnav.training import run_training

log = logging.getLogger("circumnav")

OUTPUT_ROOT_ENV = "CIRCUMNAV_OUTPUT_ROOT"
EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_DIVERGED = 0, 1, 2, 3
SWEEPS = ("constant-velocity", "circle", "nonholonomic", "noise", "fast")


class UsageError(ValueError):
    pass


def _out_dir(args, command: str) -> Path:
    if args.out:
        path = Path(args.out)
    else:
        root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
        path = root / f"{command}-{time.strftime('%Y%m%d-%H%M%S')}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _config(args, **extra) -> RunConfig:
    text = None
    source = "<config>"
    if args.config:
        source = args.config
        try:
            text = Path(args.config).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from None
    overrides = {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        overrides[key.strip().split(".")[-1]] = value
    for name in ("profile", "preset", "seed", "noise_sigma", "iterations", "samples_per_iteration",
                 "epochs", "hidden", "window", "substeps", "trials"):
        v = getattr(args, name, None)
        if v is not None:
            overrides[name] = v
    for flag in ("raw_noisy_bearing", "window_plus_one", "scale_inputs"):
        if getattr(args, flag, False):
            overrides[flag] = True
    for k, v in extra.items():
        overrides.setdefault(k, v)
    return resolve(text, overrides, source)


def _write_config(cfg: RunConfig, out: Path) -> None:
    (out / "config.ini").write_text(cfg.to_ini())


def _model_settings(cfg: RunConfig, model):
    """Simulation settings whose gate matches the model's window length."""
    gate = model.window - (1 if cfg.window_plus_one else 0)
    if gate < 1:
        raise ConfigError(f"model window {model.window} is incompatible with window_plus_one")
    if gate != cfg.window:
        log.info("using the model's window length l=%d (config had %d)", gate, cfg.window)
        cfg.window = gate
    return cfg.sim_settings()


def _estimator(args, cfg: RunConfig):
    if getattr(args, "oracle", False):
        return OracleEstimator(), cfg.sim_settings()
    if getattr(args, "static", False):
        return StaticEstimator(Vec2(*cfg.initial_estimate)), cfg.sim_settings()
    if not args.weights:
        raise UsageError("a weights file is required unless --oracle or --static is given")
    model = load_weights(args.weights)
    return LstmEstimator(model), _model_settings(cfg, model)


# --- commands ----------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = _config(args)
    tcfg = cfg.training_config()
    out = _out_dir(args, "train")
    _write_config(cfg, out)
    run_training(tcfg, out, workers=args.workers, record_wallclock=args.wallclock)
    print(f"weights written to {out / 'weights.bin'}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    try:
        scenario = Scenario.parse(args.scenario)
    except ValueError as e:
        raise UsageError(str(e)) from None
    estimator, settings = _estimator(args, cfg)
    out = _out_dir(args, "simulate")
    _write_config(cfg, out)
    steps = args.steps or 1000
    trial = ev.run_trial(scenario, estimator, settings, steps, cfg.seed, (args.trial_key,))
    trial.write_csv(out / "trial.csv")
    ctrl, est = ev.aggregate(trial, None)
    print(f"{scenario.label()}: {steps} steps, mean control error {ctrl:.4f} m, "
          f"mean estimation error {est:.4f} m, final control error {trial.control_errors[-1]:.4f} m")
    return EXIT_DIVERGED if trial.diverged else EXIT_OK


def _noise_models(args, sigmas):
    models = {}
    for item in args.noise_weights or []:
        sigma, sep, path = item.partition("=")
        if not sep:
            raise UsageError(f"--noise-weights expects SIGMA=PATH, got {item!r}")
        models[float(sigma)] = load_weights(path)
    missing = [s for s in sigmas if s not in models]
    if missing:
        raise ev.MissingModel(
            "noise sweep needs one weight file per sigma "
            f"{list(sigmas)} (pass --noise-weights SIGMA=PATH); missing {missing}"
        )
    return models


def cmd_sweep(args) -> int:
    name = args.name
    extra = {"profile": "fast"} if name == "fast" and args.profile is None else {}
    cfg = _config(args, **extra)
    keep = not args.no_trial_logs
    if name == "noise":
        sigmas = tuple(args.sigmas) if args.sigmas else ev.NOISE_SIGMAS
        models = _noise_models(args, sigmas)
        settings = _model_settings(cfg, next(iter(models.values())))
        if len({m.window for m in models.values()}) != 1:
            raise UsageError("all noise models must share one window length")
        estimators = {s: LstmEstimator(m) for s, m in models.items()}
        results = list(ev.sweep_noise(estimators, settings, sigmas, n_trials=cfg.noise_trials,
                                      steps=args.steps or 500, seed=cfg.seed, workers=args.workers,
                                      keep_logs=keep).values())
    else:
        estimator, settings = _estimator(args, cfg)
        common = dict(seed=cfg.seed, workers=args.workers, keep_logs=keep)
        if args.steps:
            common["steps"] = args.steps
        if name == "constant-velocity":
            results = [ev.sweep_constant_velocity(estimator, settings, **common)]
        elif name == "circle":
            results = [ev.sweep_circle(estimator, settings, **common)]
        elif name == "nonholonomic":
            results = [ev.sweep_nonholonomic(estimator, settings, n_trials=cfg.trials, **common)]
        else:
            results = list(ev.sweep_fast_target(estimator, settings, **common).values())
    out = _out_dir(args, f"sweep-{name}")
    _write_config(cfg, out)
    diverged = 0
    for r in results:
        r.include_diverged = not cfg.exclude_diverged
        summary = out / ("summary.csv" if len(results) == 1 else f"summary_{r.name}.csv")
        r.write_summary_csv(summary)
        if keep:
            tdir = out / "trials" / r.name
            tdir.mkdir(parents=True, exist_ok=True)
            for t, lg in zip(r.trials, r.logs):
                lg.write_csv(tdir / f"trial_{t.index:04d}.csv")
        (c_mean, c_std), (e_mean, e_std) = r.mean_std("mean_ctrl"), r.mean_std("mean_est")
        print(f"{r.name}: {len(r.trials)} trials, control {c_mean:.3f} ± {c_std:.3f} m, "
              f"estimation {e_mean:.3f} ± {e_std:.3f} m, diverged {r.n_diverged}")
        diverged += r.n_diverged
    ev.write_long_csv(results, out / "long.csv")
    return EXIT_DIVERGED if diverged else EXIT_OK


def cmd_inspect(args) -> int:
    hdr = read_header(args.weights)
    for k, v in hdr.items():
        print(f"{k}: {v}")
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def _verbose(p: argparse.ArgumentParser) -> None:
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)


def _common(p: argparse.ArgumentParser) -> None:
    _verbose(p)
    p.add_argument("--config", help="INI config file (a resolved config.ini reproduces a run)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    p.add_argument("--profile", choices=("paper", "fast"))
    p.add_argument("--preset", choices=("paper", "desk"))
    p.add_argument("--seed", type=int)
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    p.add_argument("--raw-noisy-bearing", dest="raw_noisy_bearing", action="store_true")
    p.add_argument("--window-plus-one", dest="window_plus_one", action="store_true")
    p.add_argument("--substeps", type=int)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", help=f"output directory (default: ${OUTPUT_ROOT_ENV}/<command>-<timestamp>)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="circumnav", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the iterative on-policy training pipeline")
    _common(p)
    p.add_argument("--iterations", type=int)
    p.add_argument("--samples", dest="samples_per_iteration", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--scale-inputs", dest="scale_inputs", action="store_true")
    p.add_argument("--wallclock", action="store_true", help="record elapsed seconds in training.csv")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("simulate", help="run one closed-loop trial and write its CSV log")
    _common(p)
    p.add_argument("--weights")
    p.add_argument("--oracle", action="store_true", help="use ground-truth estimates")
    p.add_argument("--static", action="store_true", help="no-estimator ablation")
    p.add_argument("--scenario", required=True, help="constant:V, circle:OMEGA, nonholonomic, fast-nonholonomic:V")
    p.add_argument("--steps", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--trial-key", dest="trial_key", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run one of the evaluation sweeps")
    _common(p)
    p.add_argument("name", choices=SWEEPS)
    p.add_argument("--weights")
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--static", action="store_true")
    p.add_argument("--trials", type=int, help="number of nonholonomic trials")
    p.add_argument("--steps", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--noise-weights", dest="noise_weights", action="append", metavar="SIGMA=PATH")
    p.add_argument("--sigmas", type=float, nargs="+")
    p.add_argument("--no-trial-logs", dest="no_trial_logs", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("inspect-weights", help="print a weight file header")
    p.add_argument("weights")
    _verbose(p)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_VALIDATION if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError, ev.MissingModel) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
