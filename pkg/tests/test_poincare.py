import math

import numpy as np
import pytest

from torcanard.errors import DomainError, UndefinedMapError
from torcanard.family_builder import FastField
from torcanard.flow import FlowConfig, TorusFlow
from torcanard.poincare import (ShootingSetup, circle_map, find_cycles, log_add, rotation_number,
                                rotation_number_shooting)

GAP_EPS = 0.11547


def test_log_add():
    s, l = log_add(1.0, math.log(3.0), -1.0, math.log(1.0))
    assert s == 1.0 and l == pytest.approx(math.log(2.0))
    s, l = log_add(-1.0, math.log(2.0), 1.0, math.log(5.0))
    assert s == 1.0 and l == pytest.approx(math.log(3.0))
    assert log_add(1.0, 0.5, -1.0, 0.5) == (0.0, -math.inf)
    assert log_add(0.0, -math.inf, -1.0, 2.0) == (-1.0, 2.0)


@pytest.mark.parametrize("y", [-0.5, -0.2, 0.3, 0.5])
def test_half_map_close_to_release_map(window_setup, rmap, y):
    r = window_setup.half_map_minus(y)
    assert abs(r.y_out - rmap.beta(y)) < 0.1
    assert r.residual <= 1e-9
    assert r.multiplier < 0


@pytest.mark.parametrize("y", [-0.5, 0.4])
def test_full_map_close_to_beta_beta(window_setup, rmap, y):
    q = window_setup.full_map(y)
    assert abs(q.y_out - rmap.beta_beta(y)) < 0.1
    assert q.multiplier > 0
    assert q.residual <= 1e-9


def test_outside_interval(window_setup):
    with pytest.raises(DomainError):
        window_setup.half_map_minus(0.995)


@pytest.fixture(scope="module")
def tight_setup(family):
    # difference quotients at h = 1e-6 need y_out reproducible far below 1e-12
    from conftest import WINDOW_EPS
    return ShootingSetup(family, FlowConfig(WINDOW_EPS, rtol=1e-14, atol=1e-16), window_tau=0.0)


@pytest.mark.parametrize("y", [0.02, 0.03, 0.04])
def test_multiplier_finite_difference(tight_setup, y):
    h = 1e-6
    fd = (tight_setup.full_map(y + h).y_out - tight_setup.full_map(y - h).y_out) / (2 * h)
    assert tight_setup.full_map(y).multiplier == pytest.approx(fd, rel=1e-4)


def test_half_map_multiplier_finite_difference(tight_setup):
    y, h = 0.03, 1e-6
    up = tight_setup.half_map_minus(y + h).y_out
    dn = tight_setup.half_map_minus(y - h).y_out
    assert tight_setup.half_map_minus(y).multiplier == pytest.approx((up - dn) / (2 * h), rel=1e-4)


def test_full_map_monotone(window_setup):
    ys = np.linspace(-0.7, 0.7, 15)
    out = [window_setup.full_map(float(y)).y_out for y in ys]
    assert np.all(np.diff(out) > 0)


def test_cycles_in_window(window_setup, prediction):
    search = find_cycles(window_setup, grid=48)
    canards = [c for c in search.cycles if c.canard]
    assert len(canards) == 3
    for c in canards:
        p = prediction.by_label(c.segment_label)
        assert p.segment[0] < c.y_fixed < p.segment[1]
        assert c.stability == p.stability
        assert c.multiplier > 0


def test_gap_has_no_cycles_from_shooting(family):
    setup = ShootingSetup(family, FlowConfig(GAP_EPS))
    with pytest.raises(UndefinedMapError):
        setup.full_map(0.0)
    search = find_cycles(setup, grid=16)
    assert not search.cycles
    assert search.undefined


@pytest.mark.parametrize("c,eps", [(1.0, 0.5), (2.0, 0.25)])
def test_circle_map_constant_field(c, eps):
    flow = TorusFlow(FastField.constant(c), FlowConfig(eps))
    _, d = circle_map(flow, 0.3)
    assert d == pytest.approx(2 * math.pi * c / eps, abs=1e-8)
    rho, err = rotation_number(flow, 0.3, N=20)
    assert rho == pytest.approx(c / eps, abs=err)


def test_circle_map_monotone(family):
    flow = TorusFlow(family.field, FlowConfig(0.1))
    xs = np.linspace(-3.0, 3.0, 13)
    lifts = [float(x) + circle_map(flow, float(x))[1] for x in xs]
    # the map contracts the circle to a near point; allow integration noise
    assert np.all(np.diff(lifts) > -1e-8)
    assert lifts[-1] - lifts[0] < 2 * math.pi


def test_rotation_number_needs_iterations(family, window_setup):
    flow = TorusFlow(family.field, FlowConfig(0.1))
    with pytest.raises(DomainError):
        rotation_number(flow, 0.0, N=5)
    with pytest.raises(DomainError):
        rotation_number_shooting(window_setup, 0.0, N=4)


def test_rotation_number_in_window_is_half_integer(window_setup):
    rho, err = rotation_number_shooting(window_setup, 0.0, N=200)
    assert abs(rho - (math.floor(rho) + 0.5)) <= 2 * err
