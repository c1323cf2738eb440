import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from circumnav import evaluation as ev
from circumnav.controller import ControllerGains
from circumnav.dynamics import Scenario
from circumnav.geometry import Vec2
from circumnav.sensing import NoiseModel
from circumnav.simulation import OracleEstimator, SimSettings, StaticEstimator

ORACLE = OracleEstimator()
coord = st.floats(-100, 100)
angle = st.floats(-math.pi, math.pi)


def test_control_error_examples():
    assert ev.control_error(Vec2(12, 0), 10) == 2
    assert ev.control_error(Vec2(0, 10), 10) == 0
    assert ev.control_error(Vec2(-6, -8), 10) == 0


def test_estimation_error_examples():
    assert ev.estimation_error(Vec2(1, 1), Vec2(1, 1)) == 0
    assert ev.estimation_error(Vec2(0, 0), Vec2(5, 0)) == 5
    assert ev.estimation_error(Vec2(3, 4), Vec2(0, 0)) == 5


@given(coord, coord, coord, coord, coord, coord, angle)
def test_metrics_rigid_invariance(tx, ty, ax, ay, sx, sy, th):
    c, s = math.cos(th), math.sin(th)

    def move(v):
        return Vec2(c * v.x - s * v.y + sx, s * v.x + c * v.y + sy)

    p_T, p_A, p_hat = Vec2(tx, ty), Vec2(ax, ay), Vec2(ax + 1, ay - 2)
    assert ev.control_error(move(p_T) - move(p_A), 10) == pytest.approx(ev.control_error(p_T - p_A, 10), abs=1e-9)
    assert ev.estimation_error(move(p_T), move(p_hat)) == pytest.approx(ev.estimation_error(p_T, p_hat), abs=1e-9)


def fake_log(ctrl, est=None, dt=0.02):
    data = np.zeros((len(ctrl), len(ev.TRIAL_COLUMNS)))
    data[:, -2] = ctrl
    data[:, -1] = ctrl if est is None else est
    return ev.TrialLog(data, dt, Scenario("constant", 1.0))


def test_aggregate_examples():
    assert ev.aggregate(fake_log(np.full(1000, 2.0)), 5.0) == (2.0, 2.0)
    e = np.concatenate([np.full(750, 10.0), np.zeros(250)])
    assert ev.aggregate(fake_log(e), 5.0) == (0.0, 0.0)
    e = np.arange(1000.0)
    assert ev.aggregate(fake_log(e), 5.0)[0] == pytest.approx(np.arange(750, 1000).mean())
    assert ev.aggregate(fake_log(e), None)[0] == pytest.approx(e.mean())
    with pytest.raises(ev.TrialTooShort):
        ev.aggregate(fake_log(np.zeros(200)), 5.0)


@given(st.lists(st.floats(0, 100), min_size=1, max_size=50))
def test_aggregate_ignores_transient(prefix):
    tail = np.linspace(0, 1, 250)
    a = ev.aggregate(fake_log(np.concatenate([prefix, tail])), 5.0)
    b = ev.aggregate(fake_log(np.concatenate([np.zeros(len(prefix)), tail])), 5.0)
    assert a == b


def test_oracle_constant_velocity_converges():
    log = ev.run_trial(Scenario("constant", 9.0), ORACLE, SimSettings(), 1000)
    assert len(log) == 1000 and not log.diverged
    assert log.control_errors[-1] < 0.05
    assert np.all(log.control_errors >= 0) and np.all(log.estimation_errors >= 0)


def test_oracle_stationary_target_orbits_radius_10():
    log = ev.run_trial(Scenario("constant", 0.0), ORACLE, SimSettings(), 1000)
    p_A = log.data[-1, 3:5]
    assert abs(np.hypot(*p_A) - 10) <= 0.05


def test_agent_orbits_counter_clockwise():
    log = ev.run_trial(Scenario("constant", 0.0), ORACLE, SimSettings(), 200)
    ang = np.unwrap(np.arctan2(log.column("p_A_y"), log.column("p_A_x")))
    assert ang[-1] > ang[0]


def test_phase_one_logs_initial_estimate():
    log = ev.run_trial(Scenario("constant", 0.0), ORACLE, SimSettings(), 80)
    l = 60
    p_hat = log.data[:l, 3:5] + log.data[:l, 11:13]
    assert np.allclose(p_hat, [5, 0])
    assert log.estimation_errors[0] == 5
    assert np.allclose(log.data[:l, 13:15], 0)
    # the oracle takes over at the gate
    assert np.allclose(log.estimation_errors[l:], 0, atol=1e-12)


def test_trial_log_csv(tmp_path):
    log = ev.run_trial(Scenario("circle", 0.4), ORACLE, SimSettings(), 750)
    log.write_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].split(",") == list(ev.TRIAL_COLUMNS)
    assert len(lines) == 751
    assert lines[2].split(",")[0] == "0.020000"
    back = np.loadtxt(tmp_path / "t.csv", delimiter=",", skiprows=1)
    assert np.array_equal(back[:, 1:], log.data[:, 1:])


def test_static_ablation_does_not_track():
    log = ev.run_trial(Scenario("constant", 9.0), StaticEstimator(), SimSettings(), 1000)
    assert ev.aggregate(log, 5.0)[0] > 1.5


def test_divergence_flagged():
    st_ = SimSettings(abort_radius=20.0)
    log = ev.run_trial(Scenario("constant", 15.0), StaticEstimator(), st_, 1000)
    assert log.diverged


def test_trials_deterministic_with_noise():
    st_ = SimSettings(noise=NoiseModel(0.2))
    a = ev.run_trial(Scenario("nonholonomic"), ORACLE, st_, 300, seed=3, key=(1,))
    b = ev.run_trial(Scenario("nonholonomic"), ORACLE, st_, 300, seed=3, key=(1,))
    c = ev.run_trial(Scenario("nonholonomic"), ORACLE, st_, 300, seed=3, key=(2,))
    assert np.array_equal(a.data, b.data) and not np.array_equal(a.data, c.data)


def test_substeps_one_is_plain_euler():
    st_ = SimSettings(substeps=1)
    log = ev.run_trial(Scenario("constant", 0.0), ORACLE, st_, 2)
    # one Euler step of the phase-one command from [15, 0]
    assert log.data[1, 3:5] == pytest.approx([15, 1.2])


# --- sweeps ------------------------------------------------------------------


def test_sweep_constant_velocity_oracle():
    r = ev.sweep_constant_velocity(ORACLE, keep_logs=False)
    assert len(r.trials) == 15
    assert [t.param for t in r.trials] == pytest.approx(np.linspace(1, 15, 15))
    assert all(t.mean_ctrl < 0.05 for t in r.trials)
    assert r.n_diverged == 0


def test_sweep_circle_geometry_and_ratio():
    r = ev.sweep_circle(ORACLE)
    assert len(r.trials) == 15 and all(len(lg) == 750 for lg in r.logs)
    assert r.trials[-1].param == pytest.approx(0.4)
    assert r.trials[-1].speed_ratio == pytest.approx(8 / 60)
    for lg in r.logs:
        d = np.hypot(lg.column("p_T_x"), lg.column("p_T_y") - 20)
        assert np.all(np.abs(d - 20) <= 1e-9)


def test_sweep_nonholonomic_count_and_determinism(tmp_path):
    a = ev.sweep_nonholonomic(ORACLE, n_trials=4, steps=200, keep_logs=False)
    b = ev.sweep_nonholonomic(ORACLE, n_trials=4, steps=200, keep_logs=False, workers=2)
    a.write_summary_csv(tmp_path / "a.csv")
    b.write_summary_csv(tmp_path / "b.csv")
    assert len(a.trials) == 4
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_sweep_noise_shares_trajectories():
    est = {s: ORACLE for s in (0.0, 0.3)}
    out = ev.sweep_noise(est, sigmas=(0.0, 0.3), n_trials=3, steps=120)
    for a, b in zip(out[0.0].logs, out[0.3].logs):
        assert np.array_equal(a.data[:, 1:3], b.data[:, 1:3])
        assert np.array_equal(a.data[:, 5:7], b.data[:, 5:7])
        assert not np.array_equal(a.data[:, 3:5], b.data[:, 3:5])


def test_sweep_noise_requires_every_model():
    with pytest.raises(ev.MissingModel, match="0.1"):
        ev.sweep_noise({0.0: ORACLE}, sigmas=(0.0, 0.1))


def test_fast_sweep_groups():
    out = ev.sweep_fast_target(ORACLE, steps=300, keep_logs=False)
    assert set(out) == {"fast-constant", "fast-circle", "fast-nonholonomic"}
    assert all(len(r.trials) == 15 for r in out.values())
    assert out["fast-constant"].trials[-1].speed_ratio == pytest.approx(24 / 25)
    assert out["fast-circle"].trials[-1].speed_ratio == pytest.approx(20 * 1.2 / 25)


def test_summary_and_long_csv(tmp_path):
    r = ev.sweep_nonholonomic(ORACLE, n_trials=3, steps=100, keep_logs=False)
    r.trials[1].diverged = True
    r.write_summary_csv(tmp_path / "s.csv")
    ev.write_long_csv([r], tmp_path / "l.csv")
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 4
    assert len((tmp_path / "l.csv").read_text().splitlines()) == 7
    assert r.n_diverged == 1
    all_mean = r.mean_std()[0]
    r.include_diverged = False
    assert r.mean_std()[0] == pytest.approx(np.mean([r.trials[0].mean_ctrl, r.trials[2].mean_ctrl]))
    assert all_mean == pytest.approx(np.mean([t.mean_ctrl for t in r.trials]))
