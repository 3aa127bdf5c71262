import json
import math

import numpy as np
import pytest
from scipy.integrate import quad

from torcanard.errors import DomainError, ValidationError
from torcanard.family_builder import (Family, LambdaProfile, SegmentLadder, assemble_field,
                                      baseline_profiles, build_family, check_inequalities,
                                      fixture_ladder, inequality_system)
from torcanard.slow_curve import SlowCurveModel

N1 = dict(n=1, a=(-0.8, -0.6, -0.45, -0.1), b=(0.9, 0.8, 0.7, 0.6, 0.45))


def test_fixture_ladder_segments():
    lad = fixture_ladder(1)
    labels = [s["label"] for s in lad.segments()]
    assert labels == ["a1", "a2", "b1"]
    segs = sorted((s["lo"], s["hi"]) for s in lad.segments())
    assert all(h1 < l2 for (_, h1), (l2, _) in zip(segs, segs[1:]))


def test_ladder_order_violation_names_relation():
    a = list(fixture_ladder(1).a)
    a[3] = a[2]
    with pytest.raises(DomainError, match="a_2 < a_3"):
        SegmentLadder(1, a, fixture_ladder(1).b)


def test_ladder_wrong_length():
    with pytest.raises(DomainError):
        SegmentLadder(1, (-0.5, 0.0), (0.9, 0.8, 0.7, 0.6, 0.5))


def test_ladder_roundtrip():
    lad = fixture_ladder(2)
    assert SegmentLadder.from_dict(lad.to_dict()) == lad


def test_bump_example():
    p = LambdaProfile(1, 2.0).bump(0.2, 0.4, 10.0, 0.1)
    (pl,) = p.plateaus
    assert pl.value == pytest.approx(55.0)
    assert 2 * pl.shoulder == pytest.approx(0.2 * 0.1 / 11.0)
    # independent quadrature of the bumped profile over the segment
    val, _ = quad(p, 0.2, 0.4, epsabs=1e-12)
    assert abs(val) > 10.0
    assert p(0.3) == pytest.approx(55.0)


def test_bump_unit_plateau():
    q = LambdaProfile(-1, 2.0).bump(-0.5, 0.5, 0.5, 0.1, gamma=0.5)
    assert q.plateaus[0].value == pytest.approx(1.0)
    assert q(0.0) == pytest.approx(-1.0)


def test_bump_argument_checks():
    p = LambdaProfile(1)
    with pytest.raises(DomainError):
        p.bump(0.4, 0.2, 1.0, 0.1)
    with pytest.raises(DomainError):
        p.bump(0.2, 0.4, -1.0, 0.1)


def test_profiles_constant_on_segments_and_signed(family):
    lm, lp = family.lam_minus, family.lam_plus
    for seg in family.ladder.segments():
        ys = np.linspace(seg["lo"], seg["hi"], 25)
        for prof in (lm, lp):
            v = prof(ys)
            assert np.ptp(v) <= 1e-12 * np.max(np.abs(v))
    ys = np.linspace(-0.99, 0.99, 801)
    assert np.all(lm(ys) < 0) and np.all(lp(ys) > 0)


def test_profile_is_c2(family):
    lm = family.lam_minus
    h = 2e-6

    def max_jump(step):
        ys = np.arange(-0.95, 0.95, step)
        d2 = (lm(ys + h) - 2 * lm(ys) + lm(ys - h)) / h**2
        return np.max(np.abs(np.diff(d2)))

    # a continuous second derivative makes sampled jumps shrink with the step
    j1, j2 = max_jump(4e-5), max_jump(1e-5)
    assert j2 < 0.35 * j1


def test_field_signs(family):
    F = family.field
    assert F.f(0.0, 0.0) > 0
    for y in np.linspace(-math.pi, math.pi, 61):
        assert F.f(math.pi, y) < 0


def test_field_periodic_and_zero_on_curve(family):
    F, m = family.field, family.model
    for x, y in [(0.3, 0.2), (-1.0, 2.5), (2.0, -0.7)]:
        assert F.f(x + 2 * math.pi, y) == pytest.approx(F.f(x, y), abs=1e-12)
        assert F.f(x, y - 2 * math.pi) == pytest.approx(F.f(x, y), abs=1e-12)
    for y in np.linspace(-0.95, 0.95, 21):
        for s in (-1, 1):
            assert abs(F.f(m.branch(s, y), y)) < 1e-12


def test_fx_on_branches_reproduces_profiles(family):
    F, m = family.field, family.model
    core = family.core
    for y in np.linspace(core.lo, core.hi, 41):
        assert F.fx(m.branch(-1, y), y) == pytest.approx(family.lam_minus(y), rel=1e-9)
        assert F.fx(m.branch(1, y), y) == pytest.approx(family.lam_plus(y), rel=1e-9)


def test_constant_profiles_give_symmetric_field():
    model = SlowCurveModel(0.5)
    lad = fixture_ladder(1)
    lm, lp = baseline_profiles(lad, model)
    F = assemble_field(model, lm, lp)
    assert F.fx(model.branch(-1, 0.0), 0.0) == pytest.approx(-2.0, abs=1e-8)
    assert F.fx(model.branch(1, 0.0), 0.0) == pytest.approx(2.0, abs=1e-8)


def test_inequalities_after_build(family):
    rep = check_inequalities(family.lam_minus, family.lam_plus, family.ladder)
    assert rep.ok and rep.min_margin > 0


def test_baseline_profiles_violate_inequalities(family):
    lm, lp = baseline_profiles(family.ladder, family.model)
    rep = check_inequalities(lm, lp, family.ladder)
    assert not rep.ok


def test_n0_single_cycle_family():
    lad = SegmentLadder(0, (-0.1, 0.1), (0.9, 0.8, 0.7))
    rows, skipped = inequality_system(lad)
    assert skipped
    fam = build_family(lad, SlowCurveModel(0.5, 0.2))
    rep = check_inequalities(fam.lam_minus, fam.lam_plus, lad)
    assert rep.ok


@pytest.mark.parametrize("n", [2, 3])
def test_larger_ladders_build(n):
    fam = build_family(fixture_ladder(n), SlowCurveModel(0.5, 0.2))
    assert check_inequalities(fam.lam_minus, fam.lam_plus, fam.ladder).ok


def test_family_json_roundtrip(family, tmp_path):
    path = tmp_path / "fam.json"
    family.save(path)
    again = Family.load(path)
    assert again.to_json() == family.to_json()
    for x, y in [(0.1, 0.2), (-2.0, 0.9), (3.0, -3.0)]:
        assert again.field.f(x, y) == family.field.f(x, y)


def test_family_malformed(family):
    with pytest.raises(ValidationError):
        Family.from_json("[1, 2]")
    with pytest.raises(ValidationError):
        Family.from_json("{")
    d = json.loads(family.to_json())
    del d["profiles"]
    with pytest.raises(ValidationError):
        Family.from_dict(d)
