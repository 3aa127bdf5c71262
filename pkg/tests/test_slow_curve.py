import math

import numpy as np
import pytest

from torcanard.errors import DomainError, ValidationError
from torcanard.family_builder import FastField
from torcanard.slow_curve import SectionSet, SlowCurveModel, validate_nondegenerate


def test_profile_properties():
    m = SlowCurveModel(0.5, 0.2)
    assert m.a(1.0) == pytest.approx(1.0, abs=1e-15)
    assert m.a(-1.0) == pytest.approx(1.0, abs=1e-15)
    inner = np.linspace(-0.999, 0.999, 501)
    outer = np.concatenate([np.linspace(1.001, math.pi, 200), -np.linspace(1.001, math.pi, 200)])
    assert np.all(m.a(inner) < 1.0)
    assert np.all(m.a(outer) > 1.0)
    assert np.all(m.a(np.linspace(-math.pi, math.pi, 2001)) > -1.0)


def test_amplitude_bound():
    with pytest.raises(DomainError):
        SlowCurveModel(2.0 / (1.0 - math.cos(1.0)))


def test_branch_values():
    m = SlowCurveModel(0.5)
    assert m.branch(-1, 0.0) == pytest.approx(math.acos(1 - 0.5 * (1 - math.cos(1.0))), abs=1e-15)
    assert m.branch(1, 0.0) == -m.branch(-1, 0.0)
    assert 0.0 < m.branch(-1, 1 - 1e-12) < 1e-5
    assert 0.0 < m.branch(-1, -1 + 1e-12) < 1e-5
    with pytest.raises(DomainError):
        m.branch(-1, 1.0)


def test_jump_points():
    for c in (0.3, 0.5, 1.0):
        g_minus, g_plus = SlowCurveModel(c).jump_points()
        assert (g_minus.x, g_minus.y) == (0.0, 1.0)
        assert (g_plus.x, g_plus.y) == (0.0, -1.0)
        assert g_minus.y - g_plus.y == 2.0


def test_sections():
    s = SectionSet(0.02)
    assert s.interval == (-0.98, 0.98)
    assert s.delta_plus < s.delta and s.delta_minus < s.delta
    assert -1 < s.alpha_minus < s.alpha_plus < 1
    m = SlowCurveModel(0.5)
    s.validate(m)
    with pytest.raises(ValidationError):
        SectionSet(0.02, j_halfwidth=0.5).validate(m)
    with pytest.raises(DomainError):
        SectionSet(0.02, delta_plus=0.03)


def test_validator_on_fixture(family):
    rep = validate_nondegenerate(family.field, family.model)
    assert rep.ok, rep.failures()


def test_validator_flags_degenerate_field(family):
    class Flat:
        """The fixture field with f multiplied by zero near G-."""

        def __init__(self, f):
            self.f = f

        def _near(self, y):
            return abs(y - 1.0) < 0.05

        def fx(self, x, y):
            return 0.0 if self._near(y) else self.f.fx(x, y)

        def fxx(self, x, y):
            return 0.0 if self._near(y) else self.f.fxx(x, y)

        def fy(self, x, y):
            return 0.0 if self._near(y) else self.f.fy(x, y)

    rep = validate_nondegenerate(Flat(family.field), family.model, raise_on_failure=False)
    failed = {c["check"] for c in rep.failures()}
    assert "fy_at_G-" in failed
    with pytest.raises(ValidationError):
        validate_nondegenerate(Flat(family.field), family.model)


def test_validator_grid_argument(family):
    with pytest.raises(DomainError):
        validate_nondegenerate(family.field, family.model, grid=0)


def test_constant_field_is_degenerate():
    rep = validate_nondegenerate(FastField.constant(1.0), SlowCurveModel(), raise_on_failure=False)
    assert not rep.ok
