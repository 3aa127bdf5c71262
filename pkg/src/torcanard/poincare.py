"""Poincare maps between the vertical sections, found by two-sided shooting.

Every shot is integrated in its stable direction: forward shots fall onto the
attracting branch, backward shots onto the repelling one.  Both are carried
relative to a reference orbit (the image of the centre of J- or J+), with the
deviation stored as ``sign * exp(u)``.  Matching at the cut y = pi = -pi then
reads

    g + delta_f(y) - delta_b(y_out) = 0   (mod 2 pi),

where ``g`` is the gap between the two reference orbits.  Inside a window the
gap is smaller than any representable difference of the cut positions, so a
window is addressed by its relative position ``tau`` in [-1, 1] and the gap
is set to ``tau * (halfwidth(D-) + halfwidth(D+))``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field as dc_field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NumericalError, UndefinedMapError
from .flow import FlowConfig, RelState, TorusFlow
from .torus_geom import TWO_PI, wrap_angle

PI = math.pi
NEAR_UNITY = 1e-3


# --------------------------------------------------------------------------
# signed log arithmetic


def log_add(s1: float, l1: float, s2: float, l2: float) -> Tuple[float, float]:
    """(sign, log|.|) of s1*e^l1 + s2*e^l2; sign 0 means an exact zero."""
    if s1 == 0.0:
        return s2, l2
    if s2 == 0.0:
        return s1, l1
    if l1 < l2:
        s1, l1, s2, l2 = s2, l2, s1, l1
    r = s1 * s2 * math.exp(l2 - l1)  # |r| <= 1
    if r == -1.0:
        return 0.0, -math.inf
    return s1, l1 + math.log1p(r)


def _slog(v: float) -> Tuple[float, float]:
    if v == 0.0:
        return 0.0, -math.inf
    return math.copysign(1.0, v), math.log(abs(v))


# --------------------------------------------------------------------------
# reference orbits


@dataclass
class Reference:
    direction: int
    ys: np.ndarray
    xs: np.ndarray
    cut_x: float
    L: float
    log_halfwidth: float


@dataclass
class Shot:
    y0: float
    x0: float
    sign: float
    u: float  # log|deviation| at the cut
    L: float
    cut_x: float  # lift of the shot at the cut

    @property
    def delta(self) -> float:
        return self.sign * math.exp(self.u) if self.u > -745.0 else 0.0


@dataclass
class HalfMapResult:
    kind: str  # "minus" (Sigma- -> Sigma+) or "plus"
    y_in: float
    y_out: float
    multiplier: float
    log_abs_multiplier: float
    lift: float  # unwrapped x displacement along the orbit piece
    dy: float  # y advance, 2 pi + y_out - y_in
    residual: float


@dataclass
class QResult:
    y: float
    y_out: float
    y_mid: float
    multiplier: float
    log_abs_multiplier: float
    lift: float
    dy: float
    residual: float


@dataclass
class CycleRecord:
    eps: float
    y_fixed: float
    multiplier: float
    stability: str
    canard: bool
    passes: int
    segment_label: str
    y_plus: float = math.nan
    log_abs_multiplier: float = math.nan
    near_unity: bool = False
    rotation: float = math.nan

    def to_dict(self):
        return asdict(self)


_HALF = {
    # kind: (x start on the forward section, x start of the backward shot,
    #        expected deviation sign of both shots)
    "minus": (0.0, -PI, -1.0),
    "plus": (PI, 0.0, 1.0),
}


class ShootingSetup:
    """Everything needed to evaluate Q at one eps (and window position)."""

    def __init__(self, family, config: FlowConfig, window_tau: Optional[float] = None,
                 grid: int = 64, checkpoint: float = 0.01):
        if window_tau is not None and not -1.0 <= window_tau <= 1.0:
            raise DomainError("window position tau must lie in [-1, 1]")
        self.family = family
        self.config = config
        self.eps = config.eps
        self.field = family.field
        self.sections = family.sections
        self.flow = TorusFlow(self.field, config)
        self.window_tau = window_tau
        self.grid = grid
        self._h = checkpoint
        self.fwd = self._reference(+1)
        self.bwd = self._reference(-1)
        self.theta = self.fwd.cut_x - self.bwd.cut_x
        if window_tau is None:
            self.gap = _slog(wrap_angle(self.theta))
        else:
            s, l = log_add(1.0, self.fwd.log_halfwidth, 1.0, self.bwd.log_halfwidth)
            self.gap = (0.0, -math.inf) if window_tau == 0.0 else \
                (math.copysign(1.0, window_tau), l + math.log(abs(window_tau)))
        self._ugrid: Dict[str, Tuple[np.ndarray, np.ndarray]] = {}
        self._memo: Dict[Tuple[str, float], HalfMapResult] = {}

    # ------------------------------------------------------------------
    def _reference(self, direction: int) -> Reference:
        sec, model = self.sections, self.family.model
        lo, hi = sec.interval
        if direction > 0:
            xc, y0 = sec.j_minus(model)
            stops = np.arange(y0, hi + self._h, self._h)
            cut = PI
        else:
            xc, y0 = sec.j_plus(model)
            stops = np.arange(y0, lo - self._h, -self._h)
            cut = -PI
        xs = np.empty(stops.size)
        xs[0] = xc
        x, L = xc, 0.0
        for k in range(1, stops.size):
            x, dL, _ = self.flow.advance_lift(x, stops[k - 1], stops[k])
            L += dL
            xs[k] = x
        x_cut, dL, _ = self.flow.advance_lift(x, stops[-1], cut)
        L += dL
        return Reference(direction, stops, xs, x_cut, L, math.log(sec.j_halfwidth) + L)

    def ref_at(self, ref: Reference, y: float) -> float:
        if ref.direction > 0:
            k = int(np.searchsorted(ref.ys, y, side="right")) - 1
        else:
            k = int(np.searchsorted(-ref.ys, -y, side="right")) - 1
        if k < 0:
            raise DomainError(f"y={y} precedes the reference start")
        if ref.ys[k] == y:
            return float(ref.xs[k])
        x, _, _ = self.flow.advance_lift(float(ref.xs[k]), float(ref.ys[k]), y)
        return x

    def shoot(self, ref: Reference, x0: float, y0: float) -> Shot:
        xr0 = self.ref_at(ref, y0)
        d0 = x0 - xr0
        if d0 == 0.0:
            raise NumericalError(f"shot at y={y0} starts on the reference orbit")
        s = RelState(y0, xr0, math.log(abs(d0)), math.copysign(1.0, d0), 0.0)
        cut = PI if ref.direction > 0 else -PI
        e = self.flow.advance_rel(s, cut)
        return Shot(y0, x0, e.sign, e.u, e.L, e.xr + e.delta)

    # ------------------------------------------------------------------
    def _target(self, kind: str, shot: Shot) -> Tuple[float, float]:
        """(sign, log|T|) of T = g + delta_f folded into the backward shots' range."""
        want = _HALF[kind][2]
        s, l = log_add(self.gap[0], self.gap[1], shot.sign, shot.u)
        if s != want:
            # T is defined mod 2 pi; move it into (-2pi, 0) or (0, 2pi)
            s, l = log_add(s, l, want, math.log(TWO_PI))
        return s, l

    def _ub(self, kind: str, y: float) -> Shot:
        sh = self.shoot(self.bwd, _HALF[kind][1], y)
        if sh.sign != _HALF[kind][2]:
            raise NumericalError(f"backward shot from y={y} is on the wrong side of the reference")
        return sh

    def _grid(self, kind: str):
        if kind not in self._ugrid:
            lo, hi = self.sections.interval
            ys = np.linspace(lo, hi, self.grid + 1)
            us = np.array([self._ub(kind, y).u for y in ys])
            self._ugrid[kind] = (ys, us)
        return self._ugrid[kind]

    def half_map(self, kind: str, y: float) -> HalfMapResult:
        if kind not in _HALF:
            raise DomainError("kind must be 'minus' or 'plus'")
        if not self.sections.contains(y):
            raise DomainError(f"y={y} outside I_delta")
        key = (kind, float(y))
        if key in self._memo:
            return self._memo[key]
        x_f0, x_b0, want = _HALF[kind]
        fs = self.shoot(self.fwd, x_f0, y)
        if fs.sign != want:
            raise NumericalError(f"forward shot from y={y} is on the wrong side of the reference")
        s_t, l_t = self._target(kind, fs)
        if s_t != want or not math.isfinite(l_t):
            raise UndefinedMapError(f"{kind} half map undefined at y={y}")
        ys, us = self._grid(kind)
        # u_b decreases with y_out
        if not (us[-1] <= l_t <= us[0]):
            raise UndefinedMapError(
                f"{kind} half map undefined at y={y}: release leaves I_delta "
                f"(log|T|={l_t:.6g}, range [{us[-1]:.6g}, {us[0]:.6g}])")
        j = int(np.searchsorted(-us, -l_t, side="right")) - 1
        j = min(max(j, 0), ys.size - 2)
        g = lambda yy: self._ub(kind, yy).u - l_t  # noqa: E731
        a, b = float(ys[j]), float(ys[j + 1])
        ga, gb = us[j] - l_t, us[j + 1] - l_t
        if ga == 0.0:
            y_out = a
        elif gb == 0.0:
            y_out = b
        else:
            if ga * gb > 0.0:
                raise NumericalError("backward shooting grid is not monotone")
            y_out = brentq(g, a, b, xtol=1e-13, rtol=8.9e-16, maxiter=100)
        bs = self._ub(kind, y_out)
        residual = math.exp(l_t) * abs(math.expm1(bs.u - l_t)) if l_t < 700 else math.inf
        f_in = self.field.f(x_f0, y)
        f_out = self.field.f(x_b0, y_out)
        log_m = math.log(abs(f_in)) + fs.L - math.log(abs(f_out)) - bs.L
        sign_m = math.copysign(1.0, f_in * f_out)
        mult = sign_m * math.exp(log_m) if log_m < 700 else sign_m * math.inf
        k = round((fs.cut_x - bs.cut_x) / TWO_PI)
        lift = x_b0 + TWO_PI * k - x_f0
        res = HalfMapResult(kind, float(y), float(y_out), mult, log_m, lift,
                            TWO_PI + y_out - y, residual)
        self._memo[key] = res
        return res

    def half_map_minus(self, y: float) -> HalfMapResult:
        return self.half_map("minus", y)

    def half_map_plus(self, y: float) -> HalfMapResult:
        return self.half_map("plus", y)

    def full_map(self, y: float) -> QResult:
        a = self.half_map("minus", y)
        if not self.sections.contains(a.y_out):
            raise UndefinedMapError(f"Q undefined at y={y}: intermediate point leaves I_delta")
        b = self.half_map("plus", a.y_out)
        log_m = a.log_abs_multiplier + b.log_abs_multiplier
        sign = math.copysign(1.0, a.multiplier * b.multiplier)
        mult = sign * math.exp(log_m) if log_m < 700 else sign * math.inf
        return QResult(a.y_in, b.y_out, a.y_out, mult, log_m, a.lift + b.lift, a.dy + b.dy,
                       max(a.residual, b.residual))


def full_map_Q(setup: ShootingSetup, y: float) -> QResult:
    return setup.full_map(y)


# --------------------------------------------------------------------------
# cycles


def _label(ladder, y: float) -> str:
    for seg in ladder.segments():
        if seg["lo"] < y < seg["hi"]:
            return seg["label"]
    return "unlabeled"


@dataclass
class CycleSearch:
    cycles: List[CycleRecord]
    undefined: List[Tuple[float, float]]
    samples: List[Tuple[float, float]]  # (y, Q(y) - y) where defined


def find_cycles(setup: ShootingSetup, grid: int = 96,
                search: Optional[Tuple[float, float]] = None) -> CycleSearch:
    """Fixed points of Q on ``search`` (default I_delta) from sign changes on a grid."""
    lo, hi = search or setup.sections.interval
    ys = np.linspace(lo, hi, grid + 1)
    vals = np.full(ys.size, np.nan)
    for j, y in enumerate(ys):
        try:
            vals[j] = setup.full_map(float(y)).y_out - y
        except UndefinedMapError:
            pass
    undefined = []
    j = 0
    while j < ys.size:
        if np.isnan(vals[j]):
            k = j
            while k + 1 < ys.size and np.isnan(vals[k + 1]):
                k += 1
            undefined.append((float(ys[j]), float(ys[k])))
            j = k + 1
        else:
            j += 1

    def g(y):
        return setup.full_map(y).y_out - y

    roots = []
    for j in range(ys.size - 1):
        a, b = vals[j], vals[j + 1]
        if np.isnan(a) or np.isnan(b):
            continue
        if a == 0.0:
            roots.append(float(ys[j]))
        elif a * b < 0.0:
            roots.append(brentq(g, ys[j], ys[j + 1], xtol=1e-11, rtol=8.9e-16, maxiter=100))
    if vals[-1] == 0.0:
        roots.append(float(ys[-1]))
    cycles = [classify_fixed_point(setup, y) for y in roots]
    samples = [(float(y), float(v)) for y, v in zip(ys, vals) if not np.isnan(v)]
    return CycleSearch(cycles, undefined, samples)


def classify_fixed_point(setup: ShootingSetup, y: float) -> CycleRecord:
    q = setup.full_map(y)
    lo, hi = setup.sections.interval
    # the orbit meets x = 0 at y and x = pi at y_mid, both on the sections
    canard = lo <= y <= hi and lo <= q.y_mid <= hi
    passes = int(round(q.dy / TWO_PI))
    stab = "attracting" if abs(q.multiplier) < 1.0 else "repelling"
    return CycleRecord(setup.eps, float(y), q.multiplier, stab, canard, passes,
                       _label(setup.family.ladder, y), q.y_mid, q.log_abs_multiplier,
                       abs(q.log_abs_multiplier) < NEAR_UNITY, q.lift / q.dy)


# --------------------------------------------------------------------------
# circle map on the global section y = pi


def circle_map(flow: TorusFlow, x: float) -> Tuple[float, float]:
    """One turn in y: returns (wrapped image, unwrapped displacement)."""
    x_end, _, _ = flow.advance_lift(x, -PI, PI)
    return wrap_angle(x_end), x_end - x


def _extrapolate(disp: List[float], N: int, period: int) -> float:
    """Total lift after N steps when ``disp`` ends in an exactly repeating block."""
    k = len(disp)
    if k >= N or period == 0:
        return math.fsum(disp[:N])
    block = disp[k - period:]
    full, rest = divmod(N - k, period)
    return math.fsum(disp) + full * math.fsum(block) + math.fsum(block[:rest])


def _repeat_period(xs: List[float]) -> int:
    if len(xs) >= 2 and xs[-1] == xs[-2]:
        return 1
    if len(xs) >= 4 and xs[-1] == xs[-3] and xs[-2] == xs[-4]:
        return 2
    return 0


def rotation_number(flow: TorusFlow, x0: float, N: int = 200) -> Tuple[float, float]:
    """Birkhoff average of the lift over N turns; returns (rho, error bound 1/N).

    Iteration stops early once the wrapped orbit repeats exactly with period
    1 or 2: every later step is then a bit-identical repeat.
    """
    if N < 10:
        raise DomainError("rotation number needs N >= 10")
    xs = [wrap_angle(x0)]
    disp: List[float] = []
    period = 0
    while len(disp) < N and not period:
        xw, d = circle_map(flow, xs[-1])
        xs.append(xw)
        disp.append(d)
        period = _repeat_period(xs)
    return _extrapolate(disp, N, period) / (TWO_PI * N), 1.0 / N


def rotation_number_shooting(setup: ShootingSetup, y0: float, N: int = 200) -> Tuple[float, float]:
    """Rotation number from N half maps (N turns in y) with exact lifts.

    Used inside windows, where direct forward iteration would have to resolve
    the exponentially thin set that follows the repelling branch.  N must be
    even so that the orbit ends on the section it started from.
    """
    if N < 10:
        raise DomainError("rotation number needs N >= 10")
    kinds = ("minus", "plus")
    ys = [y0]
    lifts: List[float] = []
    period = 0
    while len(lifts) < N:
        r = setup.half_map(kinds[len(lifts) % 2], ys[-1])
        ys.append(r.y_out)
        lifts.append(r.lift)
        # a Q-cycle closes after an even number of half maps
        if len(ys) >= 5 and len(lifts) % 2 == 0 and ys[-1] == ys[-3] and ys[-2] == ys[-4]:
            period = 2
            break
    # each half map is one turn in y
    return _extrapolate(lifts, N, period) / (TWO_PI * N), 1.0 / N


@dataclass
class CircleCycle:
    """A cycle of the circle map on y = pi, found by forward iteration."""

    eps: float
    x: float
    period: int
    multiplier: float
    log_abs_multiplier: float
    stability: str
    canard: bool
    rotation: float
    crossings: List[Tuple[str, float]] = dc_field(default_factory=list)  # on Sigma-/Sigma+ only

    def to_dict(self):
        return asdict(self)


def attracting_circle_cycles(flow: TorusFlow, sections, starts: Sequence[float],
                             period: int = 1, iters: int = 12, tol: float = 1e-9) -> List[CircleCycle]:
    """Attracting cycles of the circle map found by forward iteration.

    Each start is iterated until the period-``period`` return closes up to
    ``tol``; the orbit is then classified from its section crossings.
    """
    lo, hi = sections.interval
    found: List[CircleCycle] = []
    for x0 in starts:
        x = wrap_angle(x0)
        closed = False
        for _ in range(iters):
            x1 = x
            for _ in range(period):
                x1, _ = circle_map(flow, x1)
            done = abs(wrap_angle(x1 - x)) < tol
            x = x1
            if done:
                closed = True
                break
        if not closed:
            continue
        if any(abs(wrap_angle(c.x - x)) < 1e-6 for c in found):
            continue
        # one more period with events, for the crossings and the multiplier
        xx, L, lift, canard = x, 0.0, 0.0, False
        crossings = []
        for _ in range(period):
            r = flow.advance(xx, -PI, PI)
            L += r.L
            lift += r.x_lift - xx
            for ev in r.events:
                if lo <= ev.y <= hi:
                    crossings.append((ev.section, ev.y))
                    canard = True
            xx = r.x
        mult = math.exp(L) if L < 700 else math.inf
        found.append(CircleCycle(flow.config.eps, float(x), period, mult, L,
                                 "attracting" if L < 0 else "repelling", canard,
                                 lift / (TWO_PI * period), crossings))
    return found
