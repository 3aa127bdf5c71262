"""Integration of dx/dy = f(x, y)/eps on the torus.

Besides plain orbits this module offers two transports used by the shooting
code: the log-space relative mode (a deviation from a reference orbit kept as
``sign * exp(u)`` so exponentially small gaps never underflow) and the
eps-sensitivity mode.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import _kernels as K
from .errors import DomainError, NumericalError, StiffnessError
from .torus_geom import wrap_angle

EXTENDED_BELOW = 0.03
L_CAP = 1e6
TIERS = ("standard", "extended")


@dataclass(frozen=True)
class FlowConfig:
    eps: float
    rtol: float = 1e-10
    atol: float = 1e-12
    max_steps: int = 2_000_000
    tier: Optional[str] = None  # None picks by eps
    hmax: float = 0.25

    def __post_init__(self):
        if not (math.isfinite(self.eps) and self.eps > 0.0):
            raise DomainError(f"eps must be positive, got {self.eps}")
        if not (self.rtol > 0.0 and self.atol > 0.0):
            raise DomainError("tolerances must be positive")
        if self.max_steps < 1:
            raise DomainError("max_steps must be positive")
        tier = self.tier
        if tier is None:
            tier = "extended" if self.eps < EXTENDED_BELOW else "standard"
            object.__setattr__(self, "tier", tier)
        if tier not in TIERS:
            raise DomainError(f"tier must be one of {TIERS}")
        if tier == "standard" and self.eps < EXTENDED_BELOW:
            raise DomainError(f"extended tier is required for eps < {EXTENDED_BELOW}")

    @property
    def compensated(self) -> bool:
        return self.tier == "extended"

    def with_eps(self, eps: float) -> "FlowConfig":
        tier = self.tier if eps >= EXTENDED_BELOW else "extended"
        return FlowConfig(eps, self.rtol, self.atol, self.max_steps, tier, self.hmax)


@dataclass(frozen=True)
class Event:
    section: str  # "x=0" or "x=pi"
    y: float
    direction: int  # +1 when x increases through the section


@dataclass
class FlowResult:
    x: float  # wrapped
    x_lift: float
    L: float
    events: List[Event]
    steps: int
    saturated: bool = False
    path: Optional[np.ndarray] = None  # rows (y, x_lift, L)

    def path_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["y", "x", "L"])
        for y, x, L in self.path:
            w.writerow([repr(float(y)), repr(float(x)), repr(float(L))])
        return buf.getvalue()


@dataclass(frozen=True)
class IntervalTrack:
    """A narrow interval on a y-section: centre and log of its half-width."""

    y: float
    center: float
    log_halfwidth: float
    saturated: bool = False


@dataclass(frozen=True)
class RelState:
    """Reference position plus a deviation ``sign * exp(u)``."""

    y: float
    xr: float
    u: float
    sign: float
    L: float = 0.0

    @property
    def delta(self) -> float:
        return self.sign * math.exp(self.u) if self.u > -745.0 else 0.0


_NO_BUF = np.zeros((0, 3))


def _check_status(status, t):
    if status == K.STATUS_OK:
        return
    if status == K.STATUS_NONFINITE:
        raise NumericalError(f"non-finite field value near y={t:.12g}")
    if status == K.STATUS_MAX_STEPS:
        raise StiffnessError("maximum number of steps reached", t)
    raise StiffnessError("step size underflow", t)


class TorusFlow:
    def __init__(self, field, config: FlowConfig):
        self.field = field
        self.config = config
        self._P = field.params

    # ------------------------------------------------------------------
    def _run(self, mode, sgn, y0, y1, state, ev_rows=0, path_rows=0):
        cfg = self.config
        while True:
            ev = np.zeros((ev_rows, 3)) if ev_rows else _NO_BUF
            pb = np.zeros((path_rows, 3)) if path_rows else _NO_BUF
            Y, t, status, steps, _, n_ev, n_path = K.integrate(
                self._P, mode, cfg.eps, sgn, float(y0), float(y1),
                np.asarray(state, dtype=np.float64), cfg.rtol, cfg.atol, cfg.max_steps,
                cfg.hmax, 0.0, cfg.compensated, ev, pb)
            _check_status(status, t)
            grow = False
            if ev_rows and n_ev > ev_rows:
                ev_rows = 2 * n_ev
                grow = True
            if path_rows and steps + 1 > path_rows:
                path_rows = 2 * (steps + 1)
                grow = True
            if not grow:
                return Y, steps, ev[:n_ev] if ev_rows else None, pb[:n_path] if path_rows else None

    def _orbit(self, x0, y0, y1, record, events):
        Y, steps, ev, pb = self._run(K.MODE_DIRECT, 1.0, y0, y1, [x0, 0.0],
                                     ev_rows=4096 if events else 0,
                                     path_rows=4096 if record else 0)
        L = float(Y[1])
        sat = abs(L) > L_CAP
        if sat:
            L = math.copysign(L_CAP, L)
        evs = []
        if ev is not None:
            for t, k, d in ev:
                evs.append(Event("x=0" if int(k) % 2 == 0 else "x=pi", float(t), int(d)))
        return FlowResult(wrap_angle(float(Y[0])), float(Y[0]), L, evs, steps, sat, pb)

    def advance(self, x0: float, y0: float, y1: float, record: bool = False,
                events: bool = True) -> FlowResult:
        """Forward orbit from (x0, y0) to y1 > y0."""
        if not y1 > y0:
            raise DomainError("advance needs y1 > y0; use advance_backward")
        if y1 - y0 > 4.0 * math.pi + 1e-12:
            raise DomainError("advance covers at most 4*pi per call")
        return self._orbit(x0, y0, y1, record, events)

    def advance_backward(self, x0: float, y0: float, y1: float, record: bool = False,
                         events: bool = True) -> FlowResult:
        """Backward orbit from (x0, y0) to y1 < y0; L is the integral over [y0, y1]."""
        if not y1 < y0:
            raise DomainError("advance_backward needs y1 < y0")
        if y0 - y1 > 4.0 * math.pi + 1e-12:
            raise DomainError("advance_backward covers at most 4*pi per call")
        return self._orbit(x0, y0, y1, record, events)

    def transport_interval(self, track: IntervalTrack, y_target: float) -> IntervalTrack:
        if not track.log_halfwidth < math.log(1e-2):
            raise DomainError("transport needs a narrow interval (halfwidth < 1e-2)")
        if y_target == track.y:
            return track
        if y_target > track.y:
            r = self.advance(track.center, track.y, y_target, events=False)
        else:
            r = self.advance_backward(track.center, track.y, y_target, events=False)
        lh = track.log_halfwidth + r.L
        sat = track.saturated or r.saturated
        if lh < -L_CAP:
            lh, sat = -L_CAP, True
        return IntervalTrack(y_target, r.x_lift, lh, sat)

    # ------------------------------------------------------------------
    def advance_lift(self, x0: float, y0: float, y1: float) -> Tuple[float, float, int]:
        """Unwrapped x and L at y1 (either direction), no event bookkeeping."""
        Y, steps, _, _ = self._run(K.MODE_DIRECT, 1.0, y0, y1, [x0, 0.0])
        return float(Y[0]), float(Y[1]), steps

    def advance_eps(self, x0: float, y0: float, y1: float) -> Tuple[float, float, float]:
        """Unwrapped x, L and dx/deps at y1 for a fixed starting point."""
        Y, _, _, _ = self._run(K.MODE_EPS, 1.0, y0, y1, [x0, 0.0, 0.0])
        return float(Y[0]), float(Y[1]), float(Y[2])

    def advance_rel(self, s: RelState, y1: float) -> RelState:
        """Carry a reference point and its log-space deviation to y1."""
        if s.sign == 0.0:
            raise DomainError("relative state needs a nonzero deviation sign")
        Y, _, _, _ = self._run(K.MODE_REL, s.sign, s.y, y1, [s.xr, s.u, s.L])
        return RelState(float(y1), float(Y[0]), float(Y[1]), s.sign, float(Y[2]))
