"""Build lambda profiles by bump induction and assemble the torus field.

A profile is ``lambda(y) = sign * m(y) * tau(y)`` where ``m`` is a
piecewise-constant magnitude joined by quintic shoulders and ``tau`` is the
taper that carries the profile to zero at the jump points.  ``tau`` is 1 on
the core and decays like ``sqrt(1 - a(y)^2)`` beyond it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field, replace
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numba import njit
from scipy.integrate import quad

from . import _kernels as K
from .errors import ConstructionError, DomainError, NumericalError, ValidationError
from .slow_curve import SectionSet, SlowCurveModel, validate_nondegenerate

QUAD_EPSABS = 1e-13
QUAD_EPSREL = 1e-12


# --------------------------------------------------------------------------
# ladder


@dataclass(frozen=True)
class SegmentLadder:
    """Points a_0 < a_1 < ... < a_{2n+1} < b_{2n+1} < ... < b_0 < b_{-1}.

    ``a`` holds a_0..a_{2n+1}; ``b`` holds b_{-1}, b_0, ..., b_{2n+1}.
    """

    n: int
    a: Tuple[float, ...]
    b: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise DomainError(f"n must be a non-negative integer, got {n!r}")
        if len(self.a) != 2 * n + 2:
            raise DomainError(f"expected {2 * n + 2} a-points (a_0..a_{2 * n + 1}), got {len(self.a)}")
        if len(self.b) != 2 * n + 3:
            raise DomainError(f"expected {2 * n + 3} b-points (b_-1..b_{2 * n + 1}), got {len(self.b)}")
        chain = [("a_-1", -1.0)]
        chain += [(f"a_{i}", self.a[i]) for i in range(2 * n + 2)]
        chain += [(f"b_{i}", self.b[i + 1]) for i in range(2 * n + 1, -2, -1)]
        chain += [("1", 1.0)]
        for (n1, v1), (n2, v2) in zip(chain, chain[1:]):
            if not (math.isfinite(v1) and math.isfinite(v2) and v1 < v2):
                raise DomainError(f"ladder order violated: {n1} < {n2} fails ({v1!r} vs {v2!r})")

    def A(self, i: int) -> Optional[float]:
        """a_i with the index conventions; None when i is out of range."""
        n = self.n
        if i == -1:
            return -1.0
        if 0 <= i <= 2 * n + 1:
            return self.a[i]
        if i == 2 * n + 2:
            return self.b[2 * n + 2]
        if i == 2 * n + 3:
            return self.b[2 * n + 1]
        return None

    def B(self, i: int) -> Optional[float]:
        n = self.n
        if -1 <= i <= 2 * n + 1:
            return self.b[i + 1]
        if i == 2 * n + 2:
            return self.a[2 * n + 1]
        if i == 2 * n + 3:
            return self.a[2 * n]
        return None

    def segments(self) -> List[dict]:
        """Ladder segments in increasing y with label, parity index and bounds."""
        n = self.n
        out = [{"label": f"a{i}", "i": i, "lo": self.A(2 * i - 1), "hi": self.A(2 * i)}
               for i in range(1, n + 1)]
        out.append({"label": f"a{n + 1}", "i": n + 1, "lo": self.A(2 * n + 1), "hi": self.B(2 * n + 1)})
        out += [{"label": f"b{i}", "i": i, "lo": self.B(2 * i), "hi": self.B(2 * i - 1)}
                for i in range(n, 0, -1)]
        return out

    @property
    def core(self) -> Tuple[float, float]:
        return self.a[0], self.b[0]

    def to_dict(self) -> dict:
        return {"n": self.n, "a": list(self.a), "b": list(self.b)}

    @classmethod
    def from_dict(cls, d: dict) -> "SegmentLadder":
        return cls(int(d["n"]), tuple(d["a"]), tuple(d["b"]))


def fixture_ladder(n: int = 1) -> SegmentLadder:
    """Default ladders: the reference n=1 ladder, evenly spaced points otherwise."""
    if n == 1:
        return SegmentLadder(1, (-0.8, -0.6, -0.45, -0.1), (0.8, 0.7, 0.6, 0.45, 0.1))
    pts = np.linspace(-0.6, 0.6, 4 * n + 2)
    a = (-0.8,) + tuple(pts[: 2 * n + 1])
    b_desc = tuple(pts[2 * n + 1:][::-1])  # b_1 .. b_{2n+1}
    b = (0.8, 0.7) + b_desc
    return SegmentLadder(n, a, b)


# --------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class Core:
    """Region where profiles are realised exactly, with smooth clamp width."""

    lo: float
    hi: float
    w: float

    @classmethod
    def around(cls, lo: float, hi: float) -> "Core":
        room = min(lo + 1.0, 1.0 - hi)
        if room <= 0.0:
            raise DomainError("core must lie strictly inside (-1, 1)")
        eta = 0.1 * room
        return cls(lo - eta, hi + eta, 0.4 * room)

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "w": self.w}


@dataclass(frozen=True)
class Taper:
    model: SlowCurveModel
    core: Core


@njit(cache=True)
def _tau(c, skew, lo, hi, w, y):
    if y <= -1.0 or y >= 1.0:
        return 0.0
    a, _ = K.curve_a(c, skew, y)
    if a >= 1.0:
        return 0.0
    cc, _ = K.smooth_clamp(lo, hi, w, y)
    ac, _ = K.curve_a(c, skew, cc)
    return math.sqrt((1.0 - a * a) / (1.0 - ac * ac))


@njit(cache=True)
def _lam(sign, base, recs, tp, y):
    m, _ = K.magnitude(recs, 0, recs.shape[0] // 4, base, y)
    if tp[0] == 0.0:
        return sign * m
    return sign * m * _tau(tp[1], tp[2], tp[3], tp[4], tp[5], y)


@njit(cache=True)
def _lam_vec(sign, base, recs, tp, ys):
    out = np.empty(ys.shape[0])
    for i in range(ys.shape[0]):
        out[i] = _lam(sign, base, recs, tp, ys[i])
    return out


@dataclass(frozen=True)
class Plateau:
    A: float
    B: float
    value: float  # magnitude on [A, B]
    shoulder: float  # width of each transition, delta_0 / 2

    @property
    def support(self):
        return self.A - self.shoulder, self.B + self.shoulder


@dataclass(frozen=True)
class LambdaProfile:
    """Target slope ``f_x`` along one branch of the slow curve."""

    sign: int
    baseline: float = 2.0
    plateaus: Tuple[Plateau, ...] = ()
    taper: Optional[Taper] = None

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise DomainError("profile sign must be +1 or -1")
        if not self.baseline > 0.0:
            raise DomainError("baseline magnitude must be positive")
        object.__setattr__(self, "plateaus", tuple(sorted(self.plateaus, key=lambda p: p.A)))
        sup = [p.support for p in self.plateaus]
        for (l1, h1), (l2, h2) in zip(sup, sup[1:]):
            if h1 > l2:
                raise ConstructionError(f"plateau supports overlap: [{l1}, {h1}] and [{l2}, {h2}]")

    @cached_property
    def _recs(self) -> np.ndarray:
        return np.array([v for p in self.plateaus for v in (p.A, p.B, p.value, p.shoulder)],
                        dtype=np.float64)

    @cached_property
    def _tp(self) -> np.ndarray:
        if self.taper is None:
            return np.zeros(6)
        t = self.taper
        return np.array([1.0, t.model.c, t.model.skew, t.core.lo, t.core.hi, t.core.w])

    def __call__(self, y):
        if np.ndim(y) == 0:
            return _lam(float(self.sign), self.baseline, self._recs, self._tp, float(y))
        return _lam_vec(float(self.sign), self.baseline, self._recs, self._tp,
                        np.ascontiguousarray(y, dtype=np.float64))

    def magnitude(self, y: float) -> float:
        return K.magnitude(self._recs, 0, len(self.plateaus), self.baseline, float(y))[0]

    def breakpoints(self) -> List[float]:
        pts = []
        for p in self.plateaus:
            pts += [p.A - p.shoulder, p.A, p.B, p.B + p.shoulder]
        if self.taper is not None:
            c = self.taper.core
            pts += [c.lo - c.w, c.lo, c.hi, c.hi + c.w]
        return sorted(pts)

    def integral(self, y1: float, y2: float) -> float:
        """Integral of lambda over [y1, y2] by adaptive Gauss-Kronrod."""
        if y2 < y1:
            raise DomainError(f"arc must satisfy y1 <= y2 (got {y1}, {y2})")
        if y1 < -1.0 or y2 > 1.0:
            raise DomainError("arc must lie in [-1, 1]")
        if y1 == y2:
            return 0.0
        pts = [p for p in self.breakpoints() if y1 < p < y2]
        knots = [y1] + pts + [y2]
        total = 0.0
        sign, base, recs, tp = float(self.sign), self.baseline, self._recs, self._tp
        fn = lambda y: _lam(sign, base, recs, tp, y)  # noqa: E731
        for lo, hi in zip(knots, knots[1:]):
            if hi <= lo:
                continue
            val, err, *info = quad(fn, lo, hi, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL,
                                   limit=200, full_output=1)
            if err > 1e-11 + 1e-11 * abs(val):
                raise NumericalError(f"quadrature did not converge on [{lo}, {hi}] (err {err:.2e})")
            total += val
        return total

    def bump(self, A: float, B: float, I: float, delta: float, gamma: float = 1.0) -> "LambdaProfile":
        """Install a plateau on [A, B] whose integral has magnitude I + gamma."""
        if not (-1.0 < A < B < 1.0):
            raise DomainError(f"bump segment must satisfy -1 < A < B < 1 (got [{A}, {B}])")
        if not (I > 0.0 and gamma > 0.0):
            raise DomainError("bump needs I > 0 and gamma > 0")
        if not 0.0 < delta < 1.0:
            raise DomainError("bump needs 0 < delta < 1")
        width = B - A
        value = (I + gamma) / width
        shoulder = width * delta / (2.0 * (I + gamma))
        new = Plateau(A, B, value, shoulder)
        lo, hi = new.support
        for p in self.plateaus:
            plo, phi_ = p.support
            if p.A < B and A < p.B:
                raise ConstructionError(f"segment [{A}, {B}] overlaps plateau [{p.A}, {p.B}]")
            if lo < phi_ and plo < hi:
                raise ConstructionError(
                    f"shoulder of [{A}, {B}] (delta_0={2 * shoulder:.3e}) exceeds the gap to plateau [{p.A}, {p.B}]")
        if self.taper is not None:
            c = self.taper.core
            if lo < c.lo or hi > c.hi:
                raise ConstructionError(f"plateau [{lo}, {hi}] leaves the core [{c.lo}, {c.hi}]")
        return replace(self, plateaus=self.plateaus + (new,))

    def plateau_records(self) -> List[List[float]]:
        return [[p.A, p.B, p.value, p.shoulder] for p in self.plateaus]

    @classmethod
    def constant(cls, value: float) -> "LambdaProfile":
        """Untapered constant profile; handy for closed-form checks."""
        return cls(sign=1 if value > 0 else -1, baseline=abs(value))


# --------------------------------------------------------------------------
# inequality systems


@dataclass(frozen=True)
class Inequality:
    i: int
    row: int  # 1 = first inequality of the system, 2 = second
    lhs_branch: int
    lhs_arc: Tuple[float, float]
    rhs_branch: int
    rhs_arc: Tuple[float, float]
    lhs_label: str
    rhs_label: str


def _phi_of(lm: LambdaProfile, lp: LambdaProfile, branch: int, arc) -> float:
    prof = lm if branch < 0 else lp
    return abs(prof.integral(arc[0], arc[1]))


def inequality_system(ladder: SegmentLadder) -> Tuple[List[Inequality], List[dict]]:
    """Applicable inequalities and the rows skipped for out-of-range indices."""
    A, B = ladder.A, ladder.B
    rows, skipped = [], []

    def add(i, row, lb, l_arc, l_lab, rb, r_arc, r_lab):
        if any(v is None for v in l_arc + r_arc):
            skipped.append({"i": i, "row": row, "lhs": l_lab, "rhs": r_lab})
            return
        rows.append(Inequality(i, row, lb, tuple(l_arc), rb, tuple(r_arc), l_lab, r_lab))

    for i in range(0, ladder.n + 2):
        if i % 2 == 1:
            add(i, 1, 1, (-1.0, B(2 * i)), f"Phi+[-1,b{2 * i}]",
                -1, (A(2 * i + 1), A(2 * i + 2)), f"Phi-[a{2 * i + 1},a{2 * i + 2}]")
            add(i, 2, 1, (-1.0, A(2 * i - 1)), f"Phi+[-1,a{2 * i - 1}]",
                -1, (B(2 * i - 2), B(2 * i - 3)), f"Phi-[b{2 * i - 2},b{2 * i - 3}]")
        else:
            add(i, 1, -1, (A(2 * i), 1.0), f"Phi-[a{2 * i},1]",
                1, (B(2 * i + 2), B(2 * i + 1)), f"Phi+[b{2 * i + 2},b{2 * i + 1}]")
            add(i, 2, -1, (B(2 * i - 1), 1.0), f"Phi-[b{2 * i - 1},1]",
                1, (A(2 * i - 3), A(2 * i - 2)), f"Phi+[a{2 * i - 3},a{2 * i - 2}]")
    return rows, skipped


@dataclass
class InequalityReport:
    rows: List[dict]
    skipped: List[dict]

    @property
    def ok(self) -> bool:
        return all(r["margin"] > 0.0 for r in self.rows)

    @property
    def min_margin(self) -> float:
        return min((r["margin"] for r in self.rows), default=math.inf)


def _evaluate(ineq: Inequality, lm, lp) -> dict:
    lhs = _phi_of(lm, lp, ineq.lhs_branch, ineq.lhs_arc)
    rhs = _phi_of(lm, lp, ineq.rhs_branch, ineq.rhs_arc)
    return {"i": ineq.i, "row": ineq.row, "lhs_label": ineq.lhs_label, "rhs_label": ineq.rhs_label,
            "lhs": lhs, "rhs": rhs, "margin": rhs - lhs}


def check_inequalities(lm: LambdaProfile, lp: LambdaProfile, ladder: SegmentLadder) -> InequalityReport:
    rows, skipped = inequality_system(ladder)
    return InequalityReport([_evaluate(r, lm, lp) for r in rows], skipped)


def _bump_plan(ladder: SegmentLadder) -> List[Tuple[int, int]]:
    """(i, row) in installation order: phase 1 second rows, phase 2 first rows."""
    n = ladder.n
    return [(k, 2) for k in range(1, n + 2)] + [(i, 1) for i in range(n, -1, -1)]


def build_profiles(ladder: SegmentLadder, model: SlowCurveModel = SlowCurveModel(),
                   gamma: float = 1.0, baseline: float = 2.0,
                   core: Optional[Core] = None) -> Tuple[LambdaProfile, LambdaProfile]:
    """Two-phase bump induction; every previously met inequality is re-verified."""
    if not gamma > 0.0:
        raise DomainError("margin gamma must be positive")
    core = core or Core.around(*ladder.core)
    taper = Taper(model, core)
    lm = LambdaProfile(-1, baseline, (), taper)
    lp = LambdaProfile(1, baseline, (), taper)
    rows, _ = inequality_system(ladder)
    by_key = {(r.i, r.row): r for r in rows}
    done: List[Inequality] = []
    for key in _bump_plan(ladder):
        ineq = by_key.get(key)
        if ineq is None:
            continue
        margins = [_evaluate(r, lm, lp)["margin"] for r in done]
        delta = 0.5 * min(margins) if margins else 0.1
        delta = min(delta, 0.1)
        I = _phi_of(lm, lp, ineq.lhs_branch, ineq.lhs_arc)
        A_, B_ = ineq.rhs_arc
        for _ in range(40):
            target = lm if ineq.rhs_branch < 0 else lp
            cand = target.bump(A_, B_, I, delta, gamma)
            nlm, nlp = (cand, lp) if ineq.rhs_branch < 0 else (lm, cand)
            checks = [_evaluate(r, nlm, nlp)["margin"] for r in done + [ineq]]
            if all(m > 0.0 for m in checks):
                lm, lp = nlm, nlp
                break
            delta *= 0.5
        else:
            raise ConstructionError(f"could not satisfy {ineq.lhs_label} < {ineq.rhs_label} (i={ineq.i})")
        done.append(ineq)
    return lm, lp


def baseline_profiles(ladder: SegmentLadder, model: SlowCurveModel = SlowCurveModel(),
                      baseline: float = 2.0) -> Tuple[LambdaProfile, LambdaProfile]:
    """The unbumped +-baseline profiles on the ladder's core."""
    taper = Taper(model, Core.around(*ladder.core))
    return LambdaProfile(-1, baseline, (), taper), LambdaProfile(1, baseline, (), taper)


# --------------------------------------------------------------------------
# field


class FastField:
    """Periodic field f(x, y) with exact partials, backed by compiled kernels."""

    def __init__(self, params: np.ndarray, model: Optional[SlowCurveModel] = None):
        self.params = np.ascontiguousarray(params, dtype=np.float64)
        self.params.setflags(write=False)
        self.model = model

    @classmethod
    def constant(cls, value: float) -> "FastField":
        return cls(np.array([K.KIND_CONST, float(value)]))

    def f(self, x, y):
        return K.field_all(self.params, float(x), float(y))[0]

    def fx(self, x, y):
        return K.field_all(self.params, float(x), float(y))[1]

    def fxx(self, x, y):
        return K.field_all(self.params, float(x), float(y))[2]

    def fy(self, x, y):
        return K.field_all(self.params, float(x), float(y))[3]

    def evaluate(self, xs, ys) -> np.ndarray:
        """Rows f, f_x, f_xx, f_y at paired samples."""
        xs, ys = np.broadcast_arrays(np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64))
        return K.field_grid(self.params, np.ascontiguousarray(xs.ravel()), np.ascontiguousarray(ys.ravel()))

    def amplitude_bound(self, n: int = 721) -> float:
        g = np.linspace(-math.pi, math.pi, n)
        X, Y = np.meshgrid(g, g)
        vals = self.evaluate(X, Y)[0]
        den = np.cos(X.ravel()) - (self.model.a(Y.ravel()) if self.model else 0.0)
        ok = np.abs(den) > 1e-3
        return float(np.max(np.abs(vals[ok] / den[ok]))) if self.model else float(np.max(np.abs(vals)))


def assemble_field(model: SlowCurveModel, lm: LambdaProfile, lp: LambdaProfile,
                   core: Optional[Core] = None, validate: bool = True) -> FastField:
    if lm.sign != -1 or lp.sign != 1:
        raise ValidationError("expected (lambda-, lambda+) with signs (-1, +1)")
    if lm.baseline != lp.baseline:
        raise ValidationError("both profiles must share the baseline magnitude")
    if core is None:
        t = lm.taper or lp.taper
        if t is None:
            raise ValidationError("core unknown: pass core= or use tapered profiles")
        core = t.core
    if not (-1.0 < core.lo - core.w and core.hi + core.w < 1.0):
        raise ValidationError("core plus clamp width must fit inside (-1, 1)")
    for prof in (lm, lp):
        for p in prof.plateaus:
            lo, hi = p.support
            if not (p.value > 0.0 and math.isfinite(p.value)):
                raise ValidationError(f"plateau magnitude {p.value} must be positive and finite")
            if lo < core.lo or hi > core.hi:
                raise ValidationError(f"plateau support [{lo}, {hi}] leaves the core")
    ys = np.linspace(core.lo, core.hi, 2001)
    s_min = 0.95 * float(np.min(np.sqrt(1.0 - model.a(ys) ** 2)))
    head = [K.KIND_FAMILY, model.c, model.skew, lm.baseline, core.lo, core.hi, core.w, s_min,
            len(lm.plateaus), len(lp.plateaus)]
    P = np.array(head + [v for r in lm.plateau_records() + lp.plateau_records() for v in r])
    fld = FastField(P, model)
    if validate:
        validate_nondegenerate(fld, model, grid=400)
    return fld


# --------------------------------------------------------------------------
# family bundle and JSON


@dataclass
class Family:
    model: SlowCurveModel
    sections: SectionSet
    ladder: SegmentLadder
    lam_minus: LambdaProfile
    lam_plus: LambdaProfile
    gamma: float = 1.0

    @cached_property
    def field(self) -> FastField:
        return assemble_field(self.model, self.lam_minus, self.lam_plus, self.core)

    @property
    def core(self) -> Core:
        return self.lam_minus.taper.core

    def to_dict(self) -> dict:
        return {
            "format": "torus-canard-family/1",
            "curve": {**self.model.to_dict(), **self.sections.to_dict()},
            "ladder": self.ladder.to_dict(),
            "core": self.core.to_dict(),
            "profiles": {
                "baseline": self.lam_minus.baseline,
                "gamma": self.gamma,
                "minus": self.lam_minus.plateau_records(),
                "plus": self.lam_plus.plateau_records(),
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Family":
        try:
            cv = d["curve"]
            model = SlowCurveModel(float(cv["c"]), float(cv.get("skew", 0.0)))
            sections = SectionSet(float(cv["delta"]), float(cv["delta_plus"]), float(cv["delta_minus"]),
                                  float(cv.get("j_halfwidth", 1e-3)))
            ladder = SegmentLadder.from_dict(d["ladder"])
            core = Core(**{k: float(v) for k, v in d["core"].items()})
            pr = d["profiles"]
            taper = Taper(model, core)
            mk = lambda sign, recs: LambdaProfile(  # noqa: E731
                sign, float(pr["baseline"]), tuple(Plateau(*map(float, r)) for r in recs), taper)
            return cls(model, sections, ladder, mk(-1, pr["minus"]), mk(1, pr["plus"]),
                       float(pr.get("gamma", 1.0)))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed family file: {exc!r}") from exc

    @classmethod
    def from_json(cls, text: str) -> "Family":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"family file is not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ValidationError("family file must hold a JSON object")
        return cls.from_dict(d)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "Family":
        with open(path) as fh:
            return cls.from_json(fh.read())


def build_family(ladder: SegmentLadder, model: SlowCurveModel = SlowCurveModel(),
                 sections: SectionSet = SectionSet(), gamma: float = 1.0,
                 baseline: float = 2.0) -> Family:
    sections.validate(model)
    lm, lp = build_profiles(ladder, model, gamma, baseline)
    fam = Family(model, sections, ladder, lm, lp, gamma)
    fam.field  # assemble and validate eagerly
    return fam


FIXTURE_SKEW = 0.2


def fixture_family(n: int = 1, skew: float = FIXTURE_SKEW) -> Family:
    """Reference family used by the examples and the acceptance suite."""
    return build_family(fixture_ladder(n), SlowCurveModel(0.5, skew))
