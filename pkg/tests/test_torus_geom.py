import math

import pytest

from torcanard.errors import DomainError
from torcanard.torus_geom import (Direction, OrientedArc, TorusPoint, arc_contains,
                                  circular_signed_gap, wrap_angle)

PI = math.pi


@pytest.mark.parametrize("t, expected", [(0.0, 0.0), (3 * PI, -PI), (-PI, -PI), (PI, -PI)])
def test_wrap_angle_examples(t, expected):
    assert wrap_angle(t) == pytest.approx(expected, abs=1e-15)


def test_wrap_angle_range_and_periodicity():
    for k in range(-50, 51):
        t = 0.37 * k
        w = wrap_angle(t)
        assert -PI <= w < PI
        assert math.isclose(math.remainder(t - w, 2 * PI), 0.0, abs_tol=1e-12)


def test_wrap_angle_rejects_nan():
    with pytest.raises(DomainError):
        wrap_angle(float("nan"))


def test_arc_contains():
    assert arc_contains(OrientedArc(0.0, PI), PI / 2)
    assert not arc_contains(OrientedArc(0.0, PI), -PI / 2)
    assert arc_contains(OrientedArc(PI / 2, -PI / 2), PI)


def test_reversed_arc_same_points():
    arc = OrientedArc(0.2, 1.5)
    rev = arc.reversed()
    assert rev.direction is Direction.REVERSED
    for t in (0.1, 0.5, 1.4, 2.0):
        assert arc_contains(arc, t) == arc_contains(rev, t)
    assert 0.0 <= arc.length < 2 * PI


def test_circular_signed_gap():
    assert circular_signed_gap(0.3, 0.1) == pytest.approx(0.2)
    assert circular_signed_gap(-PI + 0.1, PI - 0.1) == pytest.approx(0.2)
    assert circular_signed_gap(1.234, 1.234) == 0.0


def test_torus_point_canonical():
    p = TorusPoint(3 * PI, 2 * PI + 0.5)
    assert p.x == pytest.approx(-PI)
    assert p.y == pytest.approx(0.5)
