import math

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from circumnav.geometry import (
    Bearing,
    CoincidentPositions,
    Vec2,
    displacement,
    perpendicular_cw,
    unit_bearing,
)

coord = st.floats(-1e4, 1e4, allow_nan=False)
vec = st.builds(Vec2, coord, coord)
angle = st.floats(-math.pi, math.pi)


def close(a: Vec2, b, tol=1e-12):
    return abs(a.x - b[0]) <= tol and abs(a.y - b[1]) <= tol


@pytest.mark.parametrize(
    "target, agent, expected",
    [((0, 0), (15, 0), (-1, 0)), ((3, 4), (0, 0), (0.6, 0.8))],
)
def test_unit_bearing_examples(target, agent, expected):
    assert close(unit_bearing(Vec2(*target), Vec2(*agent)).dir, expected)


def test_unit_bearing_rejects_zero_range():
    with pytest.raises(CoincidentPositions):
        unit_bearing(Vec2(1, 1), Vec2(1, 1))
    with pytest.raises(CoincidentPositions):
        unit_bearing(Vec2(1 + 5e-10, 1), Vec2(1, 1))


@pytest.mark.parametrize(
    "b, expected", [((1, 0), (0, -1)), ((0, 1), (1, 0)), ((0.6, 0.8), (0.8, -0.6))]
)
def test_perpendicular_cw_examples(b, expected):
    assert close(perpendicular_cw(Bearing(Vec2(*b))).dir, expected)


@pytest.mark.parametrize(
    "t, a, expected", [((0, 0), (15, 0), (-15, 0)), ((5, 5), (5, 5), (0, 0)), ((10, -2), (4, 1), (6, -3))]
)
def test_displacement_examples(t, a, expected):
    assert displacement(Vec2(*t), Vec2(*a)).as_tuple() == expected


@given(vec, vec)
def test_bearing_is_unit_and_antisymmetric(a, b):
    assume((a - b).norm() > 1e-6)
    ab = unit_bearing(a, b).dir
    ba = unit_bearing(b, a).dir
    assert abs(ab.norm() - 1) <= 1e-9
    assert close(ab, (-ba.x, -ba.y))


@given(angle)
def test_perpendicular_is_isometry_and_orthogonal(th):
    b = Bearing(Vec2(math.cos(th), math.sin(th)))
    p = perpendicular_cw(b)
    assert abs(p.dir.norm() - b.dir.norm()) <= 1e-12
    assert abs(p.dir.dot(b.dir)) <= 1e-12
    q = p
    for _ in range(3):
        q = perpendicular_cw(q)
    assert close(q.dir, b.dir.as_tuple())


@given(angle)
def test_perpendicular_turns_clockwise(th):
    b = Vec2(math.cos(th), math.sin(th))
    p = perpendicular_cw(Bearing(b)).dir
    # z component of b x p is -1 for a clockwise quarter turn
    assert abs(b.x * p.y - b.y * p.x + 1) <= 1e-12


def test_vec2_arithmetic():
    a, b = Vec2(1, 2), Vec2(3, -4)
    assert (a + b).as_tuple() == (4, -2)
    assert (a - b).as_tuple() == (-2, 6)
    assert (2 * a).as_tuple() == (2, 4)
    assert (-a).as_tuple() == (-1, -2)
    assert (b / 2).as_tuple() == (1.5, -2)
    assert a.dot(b) == -5
    assert b.norm() == 5
    assert not Vec2(math.nan, 0).is_finite()
