"""Angle bookkeeping on the circle and the two-torus.

Canonical angles live in [-pi, pi); a tie at +pi resolves to -pi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import DomainError

TWO_PI = 2.0 * math.pi


def wrap_angle(t: float) -> float:
    """Reduce ``t`` modulo 2*pi into [-pi, pi)."""
    if not math.isfinite(t):
        raise DomainError(f"cannot wrap non-finite angle {t!r}")
    r = math.fmod(t + math.pi, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    r -= math.pi
    # fmod can land exactly on +pi after the shift for tiny negative inputs
    if r >= math.pi:
        r -= TWO_PI
    return r


def circular_signed_gap(u: float, v: float) -> float:
    """Signed circular difference ``u - v`` wrapped into [-pi, pi)."""
    return wrap_angle(u - v)


@dataclass(frozen=True)
class TorusPoint:
    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", wrap_angle(self.x))
        object.__setattr__(self, "y", wrap_angle(self.y))


class Direction(str, Enum):
    FORWARD = "forward"
    REVERSED = "reversed"


@dataclass(frozen=True)
class OrientedArc:
    """Arc of the circle from ``a`` to ``b`` in the circle orientation.

    ``direction`` only records the traversal sense; the point set is the same
    for both values.
    """

    a: float
    b: float
    direction: Direction = Direction.FORWARD

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise DomainError("arc endpoints must be finite")

    @property
    def length(self) -> float:
        d = math.fmod(self.b - self.a, TWO_PI)
        if d < 0.0:
            d += TWO_PI
        return d

    def reversed(self) -> "OrientedArc":
        other = Direction.REVERSED if self.direction is Direction.FORWARD else Direction.FORWARD
        return OrientedArc(self.a, self.b, other)


def arc_contains(arc: OrientedArc, t: float) -> bool:
    """True iff ``t`` lies on the closed point set of ``arc``."""
    d = math.fmod(t - arc.a, TWO_PI)
    if d < 0.0:
        d += TWO_PI
    if d >= TWO_PI:
        d = 0.0
    if d <= arc.length:
        return True
    # closed at the far end: allow rounding slop in the reduction
    return abs(d - TWO_PI) <= 1e-15 * TWO_PI or abs(wrap_angle(t - arc.b)) <= 1e-15
