import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from torcanard.errors import DomainError
from torcanard.family_builder import FastField
from torcanard.flow import FlowConfig, IntervalTrack, RelState, TorusFlow


def _oracle(field, eps, x0, y0, y1):
    rhs = lambda y, s: [field.f(s[0], y) / eps, field.fx(s[0], y) / eps]  # noqa: E731
    sol = solve_ivp(rhs, (y0, y1), [x0, 0.0], method="DOP853", rtol=1e-12, atol=1e-13)
    return sol.y[0, -1], sol.y[1, -1]


def test_constant_field_is_linear():
    flow = TorusFlow(FastField.constant(1.0), FlowConfig(0.5))
    r = flow.advance(0.0, 0.0, 1.0)
    assert r.x_lift == pytest.approx(2.0, abs=1e-10)
    assert r.L == pytest.approx(0.0, abs=1e-14)
    assert r.x == pytest.approx(2.0, abs=1e-10)


def test_constant_field_section_events():
    flow = TorusFlow(FastField.constant(2.0), FlowConfig(0.5))
    r = flow.advance(0.1, 0.0, 2.0)
    # x runs from 0.1 to 8.1 and crosses pi then 2pi
    ys = [e.y for e in r.events]
    expect = [(k * math.pi - 0.1) / 4.0 for k in (1, 2)]
    assert ys == pytest.approx(expect, abs=1e-9)
    assert [e.section for e in r.events] == ["x=pi", "x=0"]
    assert all(e.direction == 1 for e in r.events)


def test_against_solve_ivp(family):
    eps = 0.1
    flow = TorusFlow(family.field, FlowConfig(eps))
    for x0, y0, y1 in [(0.3, -2.0, -1.0), (2.5, 1.2, 2.0), (-1.0, -0.5, 0.2)]:
        r = flow.advance(x0, y0, y1, events=False)
        xo, Lo = _oracle(family.field, eps, x0, y0, y1)
        assert r.x_lift == pytest.approx(xo, abs=1e-7)
        assert r.L == pytest.approx(Lo, abs=1e-6 * max(1.0, abs(Lo)))


def test_attracted_to_stable_branch(family):
    flow = TorusFlow(family.field, FlowConfig(0.08))
    r = flow.advance(0.0, -0.9, 0.0, events=False)
    assert abs(r.x - family.model.branch(-1, 0.0)) < 0.1
    assert r.L < -5.0


def test_backward_lands_near_repelling_branch(family):
    flow = TorusFlow(family.field, FlowConfig(0.08))
    r = flow.advance_backward(math.pi, 0.5, -0.5, events=False)
    assert abs(r.x - family.model.branch(1, -0.5)) < 0.1


def test_forward_backward_consistency(family):
    flow = TorusFlow(family.field, FlowConfig(0.1))
    fwd = flow.advance(1.0, -2.5, -1.5, events=False)
    back = flow.advance_backward(fwd.x_lift, -1.5, -2.5, events=False)
    assert back.x_lift == pytest.approx(1.0, abs=1e-7)
    assert back.L == pytest.approx(-fwd.L, abs=1e-7)


def test_preconditions(family):
    flow = TorusFlow(family.field, FlowConfig(0.1))
    with pytest.raises(DomainError):
        flow.advance(0.0, 1.0, 0.5)
    with pytest.raises(DomainError):
        flow.advance_backward(0.0, 0.5, 1.0)
    with pytest.raises(DomainError):
        flow.advance(0.0, 0.0, 5 * math.pi)
    with pytest.raises(DomainError):
        flow.advance_rel(RelState(0.0, 0.0, -3.0, 0.0), 1.0)


@pytest.mark.parametrize("kw", [dict(eps=0.0), dict(eps=-1.0), dict(eps=float("nan")),
                                dict(eps=0.1, rtol=0.0), dict(eps=0.1, tier="quad"),
                                dict(eps=0.02, tier="standard")])
def test_config_errors(kw):
    with pytest.raises(DomainError):
        FlowConfig(**kw)


def test_tier_selection():
    assert FlowConfig(0.1).tier == "standard"
    assert FlowConfig(0.02).tier == "extended"
    assert FlowConfig(0.1).with_eps(0.01).tier == "extended"


def test_transport_interval(family):
    flow = TorusFlow(family.field, FlowConfig(0.1))
    tr = IntervalTrack(-0.9, family.model.branch(-1, -0.9), math.log(1e-3))
    out = flow.transport_interval(tr, 0.0)
    r = flow.advance(tr.center, -0.9, 0.0, events=False)
    assert out.center == pytest.approx(r.x_lift)
    assert out.log_halfwidth == pytest.approx(math.log(1e-3) + r.L)
    with pytest.raises(DomainError):
        flow.transport_interval(IntervalTrack(0.0, 0.0, math.log(0.5)), 1.0)


def test_transport_saturates(family):
    flow = TorusFlow(family.field, FlowConfig(0.1))
    tr = IntervalTrack(-0.99, family.model.branch(-1, -0.99), -(1e6 - 1.0))
    out = flow.transport_interval(tr, 0.9)
    assert out.saturated and out.log_halfwidth == -1e6


def test_rel_mode_matches_difference(family):
    flow = TorusFlow(family.field, FlowConfig(0.1))
    x0, d = 0.4, 1e-6
    s = flow.advance_rel(RelState(-1.0, x0, math.log(d), 1.0), -0.3)
    a = flow.advance(x0, -1.0, -0.3, events=False).x_lift
    b = flow.advance(x0 + d, -1.0, -0.3, events=False).x_lift
    assert s.delta == pytest.approx(b - a, rel=1e-4)


def test_eps_sensitivity(family):
    eps, h = 0.1, 1e-6
    x, L, dx = TorusFlow(family.field, FlowConfig(eps)).advance_eps(0.4, -1.0, 0.5)
    xp = TorusFlow(family.field, FlowConfig(eps + h)).advance_lift(0.4, -1.0, 0.5)[0]
    xm = TorusFlow(family.field, FlowConfig(eps - h)).advance_lift(0.4, -1.0, 0.5)[0]
    assert dx == pytest.approx((xp - xm) / (2 * h), rel=1e-4)


def test_orbit_csv(family):
    r = TorusFlow(family.field, FlowConfig(0.1)).advance(0.0, 0.0, 0.5, record=True)
    lines = r.path_csv().splitlines()
    assert lines[0] == "y,x,L" and len(lines) == r.path.shape[0] + 1
    assert np.all(np.diff(r.path[:, 0]) > 0)
