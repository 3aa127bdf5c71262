"""Grand-canard windows, in-window censuses and rotation-number sweeps.

A window is an eps interval on which the images D- (of J-, carried forward)
and D+ (of J+, carried backward) overlap at the cut.  Their centres
separate by theta(eps), which sweeps through many turns as eps decreases,
while the half-widths are of order exp(-C/eps).  Windows therefore sit at
the roots of theta(eps) = 2 pi m, and their width is the half-width sum
divided by |theta'(eps)|.  Widths are far below double resolution of eps
itself, so they are carried as logarithms and as high-precision decimals.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from decimal import Decimal, localcontext
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NumericalError, UndefinedMapError
from .flow import FlowConfig, IntervalTrack, TorusFlow
from .poincare import (CircleCycle, CycleRecord, ShootingSetup, attracting_circle_cycles,
                       find_cycles, log_add, rotation_number, rotation_number_shooting)
from .singular_tools import ReleaseMap, check_inclusions
from .torus_geom import TWO_PI

PI = math.pi
LN10 = math.log(10.0)


class ScanError(NumericalError):
    """The eps grid could not be refined enough to follow the phase gap."""


def _config(config: Optional[FlowConfig], eps: float) -> FlowConfig:
    return FlowConfig(eps) if config is None else config.with_eps(eps)


# --------------------------------------------------------------------------
# tracks and the phase gap


def tracks(family, config: FlowConfig) -> Tuple[IntervalTrack, IntervalTrack]:
    """(D+, D-) at the cut: J+ carried backward to y = -pi, J- forward to y = pi."""
    sec, model = family.sections, family.model
    flow = TorusFlow(family.field, config)
    lh = math.log(sec.j_halfwidth)
    xp, yp = sec.j_plus(model)
    xm, ym = sec.j_minus(model)
    d_plus = flow.transport_interval(IntervalTrack(yp, xp, lh), -PI)
    d_minus = flow.transport_interval(IntervalTrack(ym, xm, lh), PI)
    return d_plus, d_minus


@dataclass(frozen=True)
class PhaseGap:
    eps: float
    theta: float  # centre of D- minus centre of D+ (lifts)
    dtheta: float  # d theta / d eps
    log_halfwidth_sum: float


def phase_gap(family, config: FlowConfig) -> PhaseGap:
    sec, model = family.sections, family.model
    flow = TorusFlow(family.field, config)
    xm, ym = sec.j_minus(model)
    xp, yp = sec.j_plus(model)
    xf, Lf, df = flow.advance_eps(xm, ym, PI)
    xb, Lb, db = flow.advance_eps(xp, yp, -PI)
    lh = math.log(sec.j_halfwidth)
    _, ls = log_add(1.0, lh + Lf, 1.0, lh + Lb)
    return PhaseGap(config.eps, xf - xb, df - db, ls)


# --------------------------------------------------------------------------
# windows


@dataclass
class WindowRecord:
    n: int  # number of turns of the phase gap, |m|
    m: int  # theta = 2 pi m at the centre
    eps_mid: float
    log_halfwidth: float  # natural log of the eps half-width
    gap_mid: float  # theta(eps_mid) - 2 pi m, the residual of the root
    edge: bool = False

    @property
    def log10_width(self) -> float:
        return (self.log_halfwidth + math.log(2.0)) / LN10

    def _decimal(self):
        # enough digits to separate the endpoints from the midpoint
        prec = max(34, int(-self.log_halfwidth / LN10) + 25)
        with localcontext() as ctx:
            ctx.prec = prec
            half = Decimal(self.log_halfwidth).exp()
            mid = Decimal(self.eps_mid)
            return mid - half, mid + half, 2 * half

    @property
    def eps_lo(self) -> Decimal:
        return self._decimal()[0]

    @property
    def eps_hi(self) -> Decimal:
        return self._decimal()[1]

    @property
    def width(self) -> Decimal:
        return self._decimal()[2]

    def to_dict(self) -> dict:
        lo, hi, w = self._decimal()
        return {"n": self.n, "m": self.m, "eps_mid": self.eps_mid, "eps_lo": str(lo),
                "eps_hi": str(hi), "width": f"{w:.6e}", "log10_width": self.log10_width,
                "gap_mid": self.gap_mid, "edge": self.edge}


def _solve_window(family, config, m, a, b, ga, gb) -> float:
    """Root of theta(eps) - 2 pi m in [a, b]; safeguarded Newton."""
    target = TWO_PI * m
    fa, fb = ga - target, gb - target
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    x = a + (b - a) * fa / (fa - fb)
    for _ in range(60):
        pg = phase_gap(family, _config(config, x))
        fx = pg.theta - target
        if fx == 0.0:
            return x
        if (fx < 0.0) == (fa < 0.0):
            a, fa = x, fx
        else:
            b, fb = x, fx
        step = fx / pg.dtheta if pg.dtheta != 0.0 else math.inf
        xn = x - step
        if not a < xn < b:
            xn = 0.5 * (a + b)
        if abs(xn - x) <= 4e-16 * abs(x):
            return xn
        x = xn
    raise NumericalError(f"window root for m={m} did not converge")


def scan_windows(family, eps_lo: float, eps_hi: float, grid: int = 64,
                 config: Optional[FlowConfig] = None, max_refine: int = 12) -> List[WindowRecord]:
    """All windows in [eps_lo, eps_hi], ordered by increasing n (decreasing eps).

    The grid is bisected wherever the phase gap moves by pi or more between
    neighbours, so that no turn is skipped.
    """
    if not (0.0 < eps_lo < eps_hi):
        raise DomainError("scan needs 0 < eps_lo < eps_hi")
    if grid < 1:
        raise DomainError("grid must be positive")
    nodes = [float(e) for e in np.linspace(eps_lo, eps_hi, grid + 1)]
    vals = {e: phase_gap(family, _config(config, e)) for e in nodes}
    for _ in range(max_refine + 1):
        nodes.sort()
        coarse = [(a, b) for a, b in zip(nodes, nodes[1:])
                  if abs(vals[b].theta - vals[a].theta) >= PI]
        if not coarse:
            break
        for a, b in coarse:
            mid = 0.5 * (a + b)
            vals[mid] = phase_gap(family, _config(config, mid))
            nodes.append(mid)
    else:
        raise ScanError("phase gap still advances by more than pi between grid nodes")

    found: Dict[int, WindowRecord] = {}
    for a, b in zip(nodes, nodes[1:]):
        ta, tb = vals[a].theta, vals[b].theta
        lo_m = math.ceil(min(ta, tb) / TWO_PI)
        hi_m = math.floor(max(ta, tb) / TWO_PI)
        for m in range(lo_m, hi_m + 1):
            if m in found:
                continue
            e = _solve_window(family, config, m, a, b, ta, tb)
            pg = phase_gap(family, _config(config, e))
            log_hw = pg.log_halfwidth_sum - math.log(abs(pg.dtheta))
            half = math.exp(log_hw)
            edge = (e - half <= eps_lo) or (e + half >= eps_hi)
            found[m] = WindowRecord(abs(m), m, float(e), log_hw, pg.theta - TWO_PI * m, edge)
    return sorted(found.values(), key=lambda w: (w.n, -w.eps_mid))


SNAP_TOL = 1e-7


def locate(family, config: FlowConfig) -> Tuple[int, float, bool]:
    """(m, theta - 2 pi m, at a window centre) for the nearest turn count m.

    A window is far narrower than the resolution of eps, so eps counts as a
    window centre when the phase gap matches 2 pi m to ``SNAP_TOL``.
    """
    pg = phase_gap(family, config)
    m = round(pg.theta / TWO_PI)
    r = pg.theta - TWO_PI * m
    return m, r, abs(r) <= SNAP_TOL


def windows_csv(records: Sequence[WindowRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "eps_lo", "eps_hi", "width", "gap_mid", "eps_mid", "log10_width", "edge"])
    for r in records:
        d = r.to_dict()
        w.writerow([r.n, d["eps_lo"], d["eps_hi"], d["width"], repr(r.gap_mid), repr(r.eps_mid),
                    repr(r.log10_width), int(r.edge)])
    return buf.getvalue()


# --------------------------------------------------------------------------
# census


PASS, FAIL, UNDEFINED, NO_GRAND_CANARD = "PASS", "FAIL", "UNDEFINED", "NO-GRAND-CANARD"


@dataclass
class CensusResult:
    eps: float
    window_tau: Optional[float]
    verdict: str
    canards: List[CycleRecord]
    non_canard: List[CircleCycle]
    expected: Dict[str, str]  # label -> predicted stability
    undefined_fraction: Dict[str, float]
    q_error: Optional[float]  # sup over predicted segments of |Q - beta o beta|
    q_error_graph: Optional[float]  # sup of the distance between the two graphs
    multiplier_errors: Dict[str, float]  # |multiplier - singular constant| per label
    max_residual: float
    messages: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "window_tau": self.window_tau,
            "verdict": self.verdict,
            "canard_count": len(self.canards),
            "canards": [c.to_dict() for c in self.canards],
            "non_canard": [c.to_dict() for c in self.non_canard],
            "expected": self.expected,
            "undefined_fraction": self.undefined_fraction,
            "q_error": self.q_error,
            "q_error_graph": self.q_error_graph,
            "multiplier_errors": self.multiplier_errors,
            "max_residual": self.max_residual,
            "messages": self.messages,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def cycles_csv(records: Sequence[CycleRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eps", "y_fixed", "multiplier", "stability", "canard", "passes", "segment_label"])
    for c in records:
        w.writerow([repr(c.eps), repr(c.y_fixed), repr(c.multiplier), c.stability,
                    int(c.canard), c.passes, c.segment_label])
    return buf.getvalue()


def _segment_samples(seg: dict, k: int) -> np.ndarray:
    return np.linspace(seg["lo"], seg["hi"], k + 2)[1:-1]


def _horizontal_distance(rmap: ReleaseMap, y: float, target: float, seg: dict,
                         pad: float = 0.05) -> float:
    """|y - y'| for the y' near ``seg`` with beta(beta(y')) = target, or inf."""
    lo, hi = rmap.sections.interval
    a, b = max(lo, seg["lo"] - pad), min(hi, seg["hi"] + pad)
    ys = np.linspace(a, b, 65)
    vals = []
    for t in ys:
        try:
            vals.append(rmap.beta_beta(float(t)) - target)
        except (UndefinedMapError, DomainError):
            vals.append(math.nan)
    best = math.inf
    for j in range(ys.size - 1):
        u, v = vals[j], vals[j + 1]
        if math.isnan(u) or math.isnan(v) or u * v > 0.0:
            continue
        r = float(ys[j]) if u == 0.0 else brentq(
            lambda t: rmap.beta_beta(t) - target, ys[j], ys[j + 1], xtol=1e-12)
        best = min(best, abs(r - y))
    return best


def census(family, config: FlowConfig, prediction, window_tau: Optional[float] = 0.0,
           grid: int = 96, segment_samples: int = 9, circle_starts: int = 8,
           rmap: Optional[ReleaseMap] = None) -> CensusResult:
    """Count canard cycles at ``config.eps`` and compare with ``prediction``.

    ``window_tau`` places eps inside a window (0 is the centre); pass None to
    use the gap the references actually produce, e.g. between windows.
    Outside windows the circle map is also iterated from ``circle_starts``
    points to report attracting non-canard cycles.
    """
    setup = ShootingSetup(family, config, window_tau=window_tau)
    rmap = rmap or ReleaseMap(family.lam_minus, family.lam_plus, family.sections)
    expected = {c.label: c.stability for c in prediction.cycles}
    search = find_cycles(setup, grid=grid)
    canards = [c for c in search.cycles if c.canard]
    msgs: List[str] = []

    segs = family.ladder.segments()
    undefined: Dict[str, float] = {}
    q_err = q_graph = 0.0
    max_res = 0.0
    for seg in segs:
        bad = 0
        ys = _segment_samples(seg, segment_samples)
        for y in ys:
            try:
                q = setup.full_map(float(y))
            except UndefinedMapError:
                bad += 1
                continue
            max_res = max(max_res, q.residual)
            try:
                d = abs(q.y_out - rmap.beta_beta(float(y)))
                q_err = max(q_err, d)
                q_graph = max(q_graph, min(d, _horizontal_distance(rmap, float(y), q.y_out, seg)))
            except (UndefinedMapError, DomainError):
                msgs.append(f"beta o beta undefined at y={y:.6g}")
        undefined[seg["label"]] = bad / len(ys)

    # The singular constant is (beta o beta)' at the singular fixed point.  At
    # the computed y* it would be ill-conditioned on repelling segments.
    singular = {c.label: c.multiplier for c in prediction.cycles}
    mult_err: Dict[str, float] = {}
    for c in canards:
        if c.segment_label in singular:
            mult_err[c.segment_label] = abs(c.multiplier - singular[c.segment_label])

    non_canard: List[CircleCycle] = []
    if window_tau is None and circle_starts > 0:
        flow = TorusFlow(family.field, config)
        starts = np.linspace(-PI, PI, circle_starts, endpoint=False)
        non_canard = [c for c in attracting_circle_cycles(flow, family.sections, starts)
                      if not c.canard]

    all_undefined = all(v == 1.0 for v in undefined.values())
    if not canards and all_undefined and window_tau is None:
        verdict = NO_GRAND_CANARD
    elif any(v > 0.5 for v in undefined.values()):
        verdict = UNDEFINED
        msgs.append("Q undefined on more than half of a predicted segment")
    else:
        got = {}
        for c in canards:
            got.setdefault(c.segment_label, []).append(c.stability)
        ok = len(canards) == len(expected) and all(
            got.get(lbl) == [st] for lbl, st in expected.items())
        verdict = PASS if ok else FAIL
        if not ok:
            msgs.append(f"found {sorted((k, v) for k, v in got.items())}, "
                        f"expected {sorted(expected.items())}")
    return CensusResult(config.eps, window_tau, verdict, canards, non_canard, expected,
                        undefined, None if all_undefined else q_err,
                        None if all_undefined else q_graph, mult_err, max_res, msgs)


def window_converged(window: WindowRecord, result: CensusResult, prediction,
                     rmap: ReleaseMap, family) -> bool:
    """Operational convergence of a window census.

    The window must lie inside the scan, every shooting residual must be at
    most 1e-9, Q must be defined on more than half of every segment, and Q
    must stay closer to beta o beta than half the smallest inclusion margin.
    The distance between the graphs is used, so that a steep (repelling)
    segment is judged by how far its transition has moved in y.
    """
    if window.edge or result.q_error_graph is None:
        return False
    if result.max_residual > 1e-9:
        return False
    if any(v > 0.5 for v in result.undefined_fraction.values()):
        return False
    margin = min(r["margin"] for r in check_inclusions(rmap, family.ladder).rows)
    return result.q_error_graph < 0.5 * margin


# --------------------------------------------------------------------------
# staircase


@dataclass
class StaircaseRow:
    eps: float
    rho: float
    iterations: int
    plateau_id: int
    status: str  # "ok", "window" (shooting inside a window) or an error message


def staircase(family, eps_grid: Sequence[float], N: int = 200, config: Optional[FlowConfig] = None,
              windows: Sequence[WindowRecord] = (), x0: float = 0.0,
              y0: Optional[float] = None) -> List[StaircaseRow]:
    """Rotation numbers on ``eps_grid`` plus the centres of ``windows``.

    Grid nodes use the forward circle map.  Window centres use shooting half
    maps, since their eps is not resolvable on any grid.  Rows are sorted by
    eps; a new plateau starts wherever rho changes by more than 2/N.
    """
    rows: List[Tuple[float, float, str]] = []
    for e in eps_grid:
        try:
            flow = TorusFlow(family.field, _config(config, float(e)))
            rho, _ = rotation_number(flow, x0, N)
            rows.append((float(e), rho, "ok"))
        except (NumericalError, DomainError, UndefinedMapError) as exc:
            rows.append((float(e), math.nan, f"error: {exc}"))
    lo, hi = family.sections.interval
    ys = 0.5 * (lo + hi) if y0 is None else y0
    for w in windows:
        try:
            setup = ShootingSetup(family, _config(config, w.eps_mid), window_tau=0.0)
            rho, _ = rotation_number_shooting(setup, ys, N)
            rows.append((w.eps_mid, rho, "window"))
        except (NumericalError, DomainError, UndefinedMapError) as exc:
            rows.append((w.eps_mid, math.nan, f"error: {exc}"))
    rows.sort(key=lambda r: r[0])
    out: List[StaircaseRow] = []
    pid, prev = -1, None
    for e, rho, status in rows:
        if math.isnan(rho):
            out.append(StaircaseRow(e, rho, N, -1, status))
            continue
        if prev is None or abs(rho - prev) > 2.0 / N:
            pid += 1
        prev = rho
        out.append(StaircaseRow(e, rho, N, pid, status))
    return out


def staircase_csv(rows: Sequence[StaircaseRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eps", "rho", "iterations", "plateau_id", "status"])
    for r in rows:
        w.writerow([repr(r.eps), repr(r.rho), r.iterations, r.plateau_id, r.status])
    return buf.getvalue()


def window_rotation(family, window: WindowRecord, N: int = 200,
                    taus: Sequence[float] = (-0.5, 0.0, 0.5), config: Optional[FlowConfig] = None,
                    y0: Optional[float] = None) -> List[Tuple[float, float]]:
    """Rotation number at several positions across one window: [(tau, rho)]."""
    lo, hi = family.sections.interval
    ys = 0.5 * (lo + hi) if y0 is None else y0
    out = []
    for t in taus:
        setup = ShootingSetup(family, _config(config, window.eps_mid), window_tau=t)
        out.append((t, rotation_number_shooting(setup, ys, N)[0]))
    return out


@dataclass
class SweepReport:
    windows: List[WindowRecord]
    censuses: List[CensusResult]
    staircase: List[StaircaseRow]
