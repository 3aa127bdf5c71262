import csv
import io
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from conftest import WINDOW_EPS
from torcanard.canard_hunter import (NO_GRAND_CANARD, census, cycles_csv, locate, phase_gap,
                                     scan_windows, staircase, staircase_csv, tracks, windows_csv)
from torcanard.errors import DomainError
from torcanard.flow import FlowConfig
from torcanard.singular_tools import phi


@pytest.fixture(scope="module")
def local_windows(family):
    return scan_windows(family, 0.095, 0.105, grid=16)


def _solve(field, eps, x0, y0, y1):
    rhs = lambda y, s: [field.f(s[0], y) / eps]  # noqa: E731
    return solve_ivp(rhs, (y0, y1), [x0], method="DOP853", rtol=1e-12, atol=1e-12).y[0, -1]


def test_phase_gap_against_solve_ivp(family):
    sec, model = family.sections, family.model
    xm, ym = sec.j_minus(model)
    xp, yp = sec.j_plus(model)
    theta = (_solve(family.field, WINDOW_EPS, xm, ym, math.pi)
             - _solve(family.field, WINDOW_EPS, xp, yp, -math.pi))
    assert theta == pytest.approx(-84 * math.pi, abs=1e-5)
    assert phase_gap(family, FlowConfig(WINDOW_EPS)).theta == pytest.approx(theta, abs=1e-5)


@pytest.mark.parametrize("eps", [0.08, 0.06])
def test_track_widths_follow_contraction_integrals(family, eps):
    d_plus, d_minus = tracks(family, FlowConfig(eps))
    lh0 = math.log(family.sections.j_halfwidth)
    em = eps * (d_minus.log_halfwidth - lh0)
    ep = eps * (d_plus.log_halfwidth - lh0)
    assert em == pytest.approx(phi(family.lam_minus, -0.99, 1.0), rel=0.03)
    assert ep == pytest.approx(-phi(family.lam_plus, -1.0, 0.99), rel=0.03)
    assert d_minus.log_halfwidth < 0 and d_plus.log_halfwidth < 0


def test_track_centres_move_apart(family):
    grid = np.linspace(0.0801, 0.0799, 5)
    plus, minus = zip(*[tracks(family, FlowConfig(float(e))) for e in grid])
    assert np.all(np.diff([t.center for t in minus]) < 0)
    assert np.all(np.diff([t.center for t in plus]) > 0)


def test_tracks_config_error(family):
    with pytest.raises(DomainError):
        tracks(family, FlowConfig(0.0))


def test_local_scan(local_windows):
    ws = local_windows
    assert [w.n for w in ws] == [41, 42, 43, 44]
    assert any(w.eps_mid == pytest.approx(WINDOW_EPS, rel=1e-12) for w in ws)
    widths = [w.log10_width for w in ws]
    assert all(b < a for a, b in zip(widths, widths[1:]))
    for w in ws:
        assert w.eps_lo < w.eps_hi and w.width > 0
        assert abs(w.gap_mid) < 1e-7


def test_scan_arguments(family):
    with pytest.raises(DomainError):
        scan_windows(family, 0.1, 0.1)
    with pytest.raises(DomainError):
        scan_windows(family, 0.1, 0.05)


def test_windows_csv(local_windows):
    rows = list(csv.reader(io.StringIO(windows_csv(local_windows))))
    assert rows[0][:5] == ["n", "eps_lo", "eps_hi", "width", "gap_mid"]
    assert len(rows) == len(local_windows) + 1


def test_locate(family):
    m, resid, centre = locate(family, FlowConfig(WINDOW_EPS))
    assert m == -42 and centre and abs(resid) < 1e-7
    m, resid, centre = locate(family, FlowConfig(0.1))
    assert not centre


def test_staircase_empty(family):
    assert staircase(family, []) == []
    assert staircase_csv([]).splitlines() == ["eps,rho,iterations,plateau_id,status"]


def test_staircase_monotone(family):
    rows = staircase(family, [0.1, 0.098, 0.096], N=50)
    rho = [r.rho for r in sorted(rows, key=lambda r: -r.eps)]
    # |rho| grows as eps decreases
    assert all(abs(b) >= abs(a) - 2 / 50 for a, b in zip(rho, rho[1:]))
    assert all(r.status == "ok" for r in rows)


def test_census_at_gap(family, prediction, rmap, local_windows):
    eps = 0.5 * (local_windows[0].eps_mid + local_windows[1].eps_mid)
    res = census(family, FlowConfig(eps), prediction, None, rmap=rmap)
    assert res.verdict == NO_GRAND_CANARD
    assert res.canards == []
    assert len(res.non_canard) >= 1
    assert cycles_csv(res.canards).splitlines()[0].startswith("eps,y_fixed,multiplier")
