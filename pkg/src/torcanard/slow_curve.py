"""The slow curve M = {cos x = a(y)}, its branches, jump points and sections.

The profile is ``a(y) = 1 - c (cos y - cos 1)(1 + skew sin y)``.  With
``skew = 0`` the curve is mirror symmetric in y; a small skew breaks that
symmetry without moving the jump points, which stay at (0, -1) and (0, 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .errors import DomainError, ValidationError
from .torus_geom import TorusPoint

COS1 = math.cos(1.0)


@dataclass(frozen=True)
class SlowCurveModel:
    c: float = 0.5
    skew: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c > 0.0):
            raise DomainError(f"amplitude c must be positive, got {self.c}")
        if not abs(self.skew) < 1.0:
            raise DomainError(f"skew must lie in (-1, 1), got {self.skew}")
        c_max = 2.0 / ((1.0 - COS1) * (1.0 + abs(self.skew)))
        if self.c >= c_max:
            raise DomainError(f"c={self.c} lets a(y) reach -1 (needs c < {c_max:.6g})")

    def a(self, y):
        return 1.0 - self.c * (np.cos(y) - COS1) * (1.0 + self.skew * np.sin(y))

    def a_prime(self, y):
        g = np.cos(y) - COS1
        h = 1.0 + self.skew * np.sin(y)
        return -self.c * (-np.sin(y) * h + g * self.skew * np.cos(y))

    def branch(self, sign: int, y: float) -> float:
        """x-coordinate of M^sign at y; sign -1 is attracting, +1 repelling."""
        if sign not in (-1, 1):
            raise DomainError("sign must be +1 or -1")
        if not abs(y) < 1.0:
            raise DomainError(f"branch undefined for |y| >= 1 (y={y})")
        x = math.acos(min(1.0, float(self.a(y))))
        return x if sign < 0 else -x

    def branch_gap(self, y: float) -> float:
        return self.branch(-1, y) - self.branch(1, y)

    def jump_points(self) -> Tuple[TorusPoint, TorusPoint]:
        """(G-, G+): the right fold at y = 1 and the left fold at y = -1."""
        return TorusPoint(0.0, 1.0), TorusPoint(0.0, -1.0)

    def to_dict(self) -> dict:
        return {"c": self.c, "skew": self.skew}


@dataclass(frozen=True)
class SectionSet:
    """Sigma-, Sigma+ on I_delta and the transversals J-, J+."""

    delta: float = 0.02
    delta_plus: float = None
    delta_minus: float = None
    j_halfwidth: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise DomainError("delta must lie in (0, 1)")
        for name in ("delta_plus", "delta_minus"):
            v = getattr(self, name)
            if v is None:
                object.__setattr__(self, name, self.delta / 2.0)
            elif not 0.0 < v < self.delta:
                raise DomainError(f"{name} must lie in (0, delta)")
        if not self.j_halfwidth > 0.0:
            raise DomainError("j_halfwidth must be positive")

    @property
    def interval(self) -> Tuple[float, float]:
        return -1.0 + self.delta, 1.0 - self.delta

    @property
    def alpha_plus(self) -> float:
        return 1.0 - self.delta_plus

    @property
    def alpha_minus(self) -> float:
        return -1.0 + self.delta_minus

    def contains(self, y: float) -> bool:
        lo, hi = self.interval
        return lo <= y <= hi

    def j_minus(self, model: SlowCurveModel) -> Tuple[float, float]:
        """(center x, y) of J-, centred on the attracting branch."""
        return model.branch(-1, self.alpha_minus), self.alpha_minus

    def j_plus(self, model: SlowCurveModel) -> Tuple[float, float]:
        return model.branch(1, self.alpha_plus), self.alpha_plus

    def validate(self, model: SlowCurveModel) -> None:
        """Each J must meet its own branch only."""
        for sign, alpha in ((-1, self.alpha_minus), (1, self.alpha_plus)):
            own = model.branch(sign, alpha)
            other = model.branch(-sign, alpha)
            if abs(own - other) <= self.j_halfwidth:
                raise ValidationError(
                    f"J at y={alpha} with halfwidth {self.j_halfwidth} reaches the opposite branch")

    def to_dict(self) -> dict:
        return {"delta": self.delta, "delta_plus": self.delta_plus,
                "delta_minus": self.delta_minus, "j_halfwidth": self.j_halfwidth}


@dataclass
class ValidationReport:
    checks: List[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c["ok"] for c in self.checks)

    def add(self, name, ok, detail=""):
        self.checks.append({"check": name, "ok": bool(ok), "detail": detail})

    def failures(self):
        return [c for c in self.checks if not c["ok"]]


FX_MARGIN = 1e-8
JUMP_MARGIN = 1e-6
JUMP_EXCLUSION = 1e-3


def validate_nondegenerate(field, model: SlowCurveModel, grid: int = 2000,
                           raise_on_failure: bool = True) -> ValidationReport:
    """Check the slow curve is simple and nondegenerate for ``field``.

    ``field`` needs scalar methods ``fx``, ``fxx`` and ``fy``.
    """
    if not isinstance(grid, (int, np.integer)) or grid < 1:
        raise DomainError("grid must be a positive integer")
    rep = ValidationReport()
    ys = np.linspace(-1.0 + JUMP_EXCLUSION, 1.0 - JUMP_EXCLUSION, int(grid) + 1)

    worst = (math.inf, None)
    signs_ok = True
    for y in ys:
        for sign in (-1, 1):
            v = field.fx(model.branch(sign, y), y)
            if abs(v) < worst[0]:
                worst = (abs(v), (sign, y))
            if v * sign <= 0.0:
                signs_ok = False
    rep.add("fx_nonzero_on_M", worst[0] >= FX_MARGIN,
            f"min |f_x| = {worst[0]:.3e} at branch {worst[1][0]:+d}, y={worst[1][1]:.6f}")
    rep.add("branch_stability", signs_ok, "M- attracting, M+ repelling")

    for label, g in zip(("G-", "G+"), model.jump_points()):
        fxx = field.fxx(g.x, g.y)
        fy = field.fy(g.x, g.y)
        rep.add(f"fxx_at_{label}", abs(fxx) >= JUMP_MARGIN, f"f_xx={fxx:.6e} at y={g.y}")
        rep.add(f"fy_at_{label}", abs(fy) >= JUMP_MARGIN, f"f_y={fy:.6e} at y={g.y}")

    xm = np.array([model.branch(-1, y) for y in ys])
    rep.add("inside_square", bool(np.all(np.abs(xm) < math.pi)), "|M(y)| < pi, |y| < 1")

    # folds are where the branches merge; the curve is absent for |y| > 1
    outside = np.linspace(1.0 + 1e-6, math.pi, 400)
    outside = np.concatenate([outside, -outside])
    gap_pos = bool(np.all(xm > 0.0))
    absent = bool(np.all(model.a(outside) > 1.0))
    rep.add("two_folds", gap_pos and absent, "branches merge only at y = -1 and y = 1")

    if raise_on_failure and not rep.ok:
        msg = "; ".join(f"{c['check']}: {c['detail']}" for c in rep.failures())
        raise ValidationError(f"nondegeneracy failed: {msg}")
    return rep
