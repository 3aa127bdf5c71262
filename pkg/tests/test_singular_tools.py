import numpy as np
import pytest

from torcanard.errors import DomainError, UndefinedMapError, ValidationError
from torcanard.family_builder import LambdaProfile, baseline_profiles
from torcanard.singular_tools import (ReleaseMap, beta_beta_fixed_points, check_inclusions, phi,
                                      predict)
from torcanard.slow_curve import SectionSet

# independent oracle: scipy quad + brentq on the profile callables
BETA_ORACLE = {
    -0.525: 0.506945765632364,
    0.0: 0.45391432984717706,
    0.2: -0.5179717864314491,
    0.525: -0.5408492596818569,
}
FIXED_ORACLE = [-0.5396011789617052, 0.03109433727295475, 0.5072696226279235]


def _const(m, p):
    return ReleaseMap(LambdaProfile.constant(m), LambdaProfile.constant(p), SectionSet())


def test_phi_constant():
    assert phi(LambdaProfile.constant(-2.0), -0.5, 0.5) == pytest.approx(-2.0, abs=1e-13)


@pytest.mark.parametrize("y", [-0.9, -0.3, 0.0, 0.41, 0.97])
def test_symmetric_constants_give_reflection(y):
    rm = _const(-2.0, 2.0)
    assert rm.beta(y) == pytest.approx(-y, abs=1e-12)
    assert rm.beta_derivative(y) == pytest.approx(-1.0, abs=1e-12)


def test_unequal_constants():
    rm = _const(-2.0, 4.0)
    assert rm.beta(0.0) == pytest.approx(-0.5, abs=1e-12)
    assert rm.beta_derivative(0.3) == pytest.approx(-0.5, abs=1e-12)
    assert rm.beta(0.4) == pytest.approx(-0.7, abs=1e-12)


def test_undefined_when_plus_side_too_weak():
    rm = _const(-4.0, 2.0)
    with pytest.raises(UndefinedMapError):
        rm.beta(-0.5)


def test_outside_interval(rmap):
    with pytest.raises(DomainError):
        rmap.beta(0.995)
    with pytest.raises(DomainError):
        rmap.beta(float("nan"))


@pytest.mark.parametrize("y,expected", sorted(BETA_ORACLE.items()))
def test_beta_against_oracle(rmap, y, expected):
    assert rmap.beta(y) == pytest.approx(expected, abs=1e-9)
    assert abs(rmap.residual(y, rmap.beta(y))) < 1e-10


def test_derivative_finite_difference(rmap):
    h = 1e-5
    fd = (rmap.beta(0.2 + h) - rmap.beta(0.2 - h)) / (2 * h)
    assert rmap.beta_derivative(0.2) == pytest.approx(fd, rel=1e-6)


def test_beta_is_decreasing(rmap):
    tab = rmap.tabulate(101)
    ok = np.isfinite(tab[:, 1])
    assert ok.sum() > 50
    assert np.all(np.diff(tab[ok, 1]) <= 0)
    assert np.all(tab[ok, 2] < 0)


def test_tabulation_csv_header(rmap):
    lines = rmap.tabulation_csv(5).splitlines()
    assert lines[0] == "y,beta,beta_prime" and len(lines) == 6


def test_inclusions_hold_for_fixture(family, rmap):
    rep = check_inclusions(rmap, family.ladder)
    assert rep.ok
    assert len(rep.rows) == 4 * (family.ladder.n + 1)


def test_baseline_profiles_refuse_prediction(family):
    lm, lp = baseline_profiles(family.ladder, family.model)
    rm = ReleaseMap(lm, lp, family.sections)
    with pytest.raises(ValidationError):
        predict(rm, family.ladder)


def test_prediction_matches_oracle(prediction):
    assert prediction.l == 3
    ys = [c.y_star for c in prediction.cycles]
    assert sorted(ys) == pytest.approx(FIXED_ORACLE, abs=1e-8)
    stab = {c.label: c.stability for c in prediction.cycles}
    assert stab == {"a1": "attracting", "a2": "repelling", "b1": "attracting"}
    for c in prediction.cycles:
        assert c.segment[0] < c.y_star < c.segment[1]


def test_degenerate_scan():
    scan = beta_beta_fixed_points(_const(-2.0, 2.0), (-0.9, 0.9), grid=50)
    assert scan.degenerate and not scan.points


def test_fixture_scan_finds_three(rmap):
    scan = beta_beta_fixed_points(rmap, (-0.98, 0.98), grid=400)
    ys = sorted(p["y_star"] for p in scan.points)
    for y in FIXED_ORACLE:
        assert min(abs(y - v) for v in ys) < 1e-8


def test_wrong_signs_rejected():
    with pytest.raises(ValidationError):
        ReleaseMap(LambdaProfile.constant(2.0), LambdaProfile.constant(2.0))
