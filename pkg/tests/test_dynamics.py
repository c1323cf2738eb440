import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from circumnav.dynamics import (
    AgentState,
    CircleProcess,
    ConstantVelocityProcess,
    ConstantVelocityTarget,
    NonFiniteCommand,
    NonholonomicProcess,
    NonholonomicTarget,
    Scenario,
    SimClock,
    agent_step,
    circle_position,
    constant_velocity_step,
    initial_nonholonomic,
    make_target,
    nonholonomic_step,
    resample_nonholonomic_inputs,
)
from circumnav.geometry import Vec2

DT = 0.02


def test_clock():
    c = SimClock.from_frequency(50)
    assert c.dt == 0.02
    assert c.tick().tick().t == pytest.approx(0.04)


def test_constant_velocity_step():
    s = constant_velocity_step(ConstantVelocityTarget(Vec2(0, 0), 9), DT)
    assert s.pos.as_tuple() == pytest.approx((0.18, 0))
    assert s.vel.as_tuple() == (9, 0)
    s = constant_velocity_step(ConstantVelocityTarget(Vec2(0, 0), 0), DT)
    assert s.pos.as_tuple() == (0, 0)


def test_constant_velocity_1000_steps():
    p = ConstantVelocityProcess(9, DT)
    for _ in range(1000):
        p.advance()
    assert p.pos.x == pytest.approx(180, abs=1e-9) and p.pos.y == 0


def test_circle_examples():
    pos, vel = circle_position(0, 20, 0.4)
    assert pos.x == pytest.approx(0, abs=1e-12) and pos.y == pytest.approx(0, abs=1e-12)
    assert vel.as_tuple() == pytest.approx((8, 0))
    pos, _ = circle_position(math.pi / 0.4, 20, 0.4)
    assert pos.as_tuple() == pytest.approx((0, 40), abs=1e-9)


@given(st.floats(0, 1e3), st.floats(0.1, 100), st.floats(-2, 2))
def test_circle_invariants(t, r, omega):
    pos, vel = circle_position(t, r, omega)
    assert abs((pos - Vec2(0, r)).norm() - r) <= 1e-9
    assert abs(vel.norm() - r * abs(omega)) <= 1e-9


def test_circle_velocity_is_derivative():
    h = 1e-6
    for t in (0.0, 1.3, 7.9):
        p1, _ = circle_position(t - h, 20, 0.4)
        p2, _ = circle_position(t + h, 20, 0.4)
        _, v = circle_position(t, 20, 0.4)
        fd = (p2 - p1) / (2 * h)
        assert (fd - v).norm() < 1e-6


def test_circle_process_geometry():
    c = CircleProcess(20, 0.4, DT)
    for _ in range(750):
        c.advance()
        assert abs((c.pos - Vec2(0, 20)).norm() - 20) <= 1e-9


def test_nonholonomic_examples():
    s = NonholonomicTarget(Vec2(0, 0), 0.0, 0.0, 0.0, a=5.0, alpha=0.0)
    s = nonholonomic_step(s, DT)
    assert s.v == pytest.approx(0.1)
    assert s.pos.as_tuple() == pytest.approx((0.002, 0))

    s = nonholonomic_step(NonholonomicTarget(Vec2(0, 0), 0.0, 20.0, 0.0, a=5.0), DT)
    assert s.v == 20.0

    s = NonholonomicTarget(Vec2(0, 0), 0.0, 10.0, math.pi / 2)
    for _ in range(100):
        s = nonholonomic_step(s, DT)
    assert s.heading == pytest.approx(math.pi, abs=1e-9)


def test_resample_examples():
    rng = np.random.default_rng(3)
    s = NonholonomicTarget(Vec2(1, 2), 0.3, 7.0, 1.2, a=1.0, alpha=0.1)
    for _ in range(200):
        r = resample_nonholonomic_inputs(s, rng)
        assert -5 <= r.a <= 5 and -math.pi / 2 <= r.alpha <= math.pi / 2
        assert r.omega == 0.0
        assert (r.v, r.heading, r.pos) == (7.0, 0.3, Vec2(1, 2))


def test_fixed_speed_resample_draws_yaw_rate():
    rng = np.random.default_rng(4)
    s = NonholonomicTarget(Vec2(0, 0), 0.0, 22.0, 0.0, fixed_speed=True)
    omegas = [resample_nonholonomic_inputs(s, rng).omega for _ in range(500)]
    assert min(omegas) >= -math.pi / 2 and max(omegas) <= math.pi / 2
    assert np.std(omegas) > 0.5
    r = resample_nonholonomic_inputs(s, rng)
    assert (r.a, r.alpha, r.v) == (0.0, 0.0, 22.0)


@given(st.integers(0, 2**32 - 1))
def test_nonholonomic_bounds_hold(seed):
    rng = np.random.default_rng(seed)
    p = NonholonomicProcess(initial_nonholonomic(rng), DT, rng)
    for _ in range(400):
        p.advance()
        assert 0 <= p.state.v <= 20
        assert -math.pi / 2 <= p.state.omega <= math.pi / 2


def test_resampling_happens_every_75_steps():
    rng = np.random.default_rng(0)
    p = NonholonomicProcess(initial_nonholonomic(rng), DT, rng)
    inputs = []
    for _ in range(300):
        inputs.append((p.state.a, p.state.alpha))
        p.advance()
    changes = [k for k in range(1, 300) if inputs[k] != inputs[k - 1]]
    assert changes == [76, 151, 226]  # recorded after the resample at k = 75, 150, 225


def test_fixed_speed_process_keeps_speed():
    rng = np.random.default_rng(1)
    p = make_target(Scenario("fast-nonholonomic", 24.0), DT, rng)
    for _ in range(500):
        p.advance()
        assert p.state.v == 24.0


@given(st.floats(0, 20), st.floats(-math.pi, math.pi), st.integers(1, 1000))
def test_straight_line_motion(v, heading, n):
    s0 = NonholonomicTarget(Vec2(3, -4), heading, v, 0.0)
    s = s0
    for _ in range(n):
        s = nonholonomic_step(s, DT)
    assert abs((s.pos - s0.pos).norm() - v * n * DT) <= 1e-9


def test_agent_step_examples():
    s = agent_step(AgentState(Vec2(15, 0)), Vec2(0, 60), DT)
    assert s.pos.as_tuple() == pytest.approx((15, 1.2)) and s.vel == Vec2(0, 60)
    s = agent_step(AgentState(Vec2(0, 0)), Vec2(0, 0), DT)
    assert s.pos == Vec2(0, 0)
    with pytest.raises(NonFiniteCommand):
        agent_step(AgentState(Vec2(1, 1)), Vec2(math.nan, 0), DT)


@given(st.floats(-60, 60), st.floats(-60, 60))
def test_agent_constant_command(ux, uy):
    u = Vec2(ux, uy)
    s = AgentState(Vec2(15, 0))
    for _ in range(1000):
        s = agent_step(s, u, DT)
    assert abs(s.pos.x - (15 + 1000 * DT * ux)) <= 1e-9
    assert abs(s.pos.y - 1000 * DT * uy) <= 1e-9


def test_trajectories_are_deterministic():
    def run(seed):
        rng = np.random.default_rng(seed)
        p = make_target(Scenario("nonholonomic"), DT, rng)
        out = []
        for _ in range(500):
            p.advance()
            out.append(p.pos.as_tuple())
        return out

    assert run(5) == run(5)
    assert run(5) != run(6)


def test_scenario_parse():
    assert Scenario.parse("constant:9") == Scenario("constant", 9.0)
    assert Scenario.parse("circle:0.4").nominal_speed() == pytest.approx(8.0)
    assert Scenario.parse("nonholonomic").family == "nonholonomic"
    with pytest.raises(ValueError):
        Scenario.parse("constant")
    with pytest.raises(ValueError):
        Scenario.parse("zigzag:3")
