"""Singular (eps = 0) layer: Phi integrals, the release map beta, inclusion
checks and the cycle prediction."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from numba import njit
from scipy.optimize import brentq

from .errors import DomainError, UndefinedMapError, ValidationError
from .family_builder import LambdaProfile, SegmentLadder, _lam
from .slow_curve import SectionSet

RESIDUAL_TOL = 1e-10
_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def phi(profile: LambdaProfile, y1: float, y2: float) -> float:
    """Integral of ``profile`` over the arc [y1, y2]."""
    return profile.integral(y1, y2)


@njit(cache=True)
def _gl(sign, base, recs, tp, lo, hi, end, gx, gw):
    # end: 0 plain, +1 singular at y = 1, -1 singular at y = -1 (y = +-(1 - s^2))
    if hi == lo:
        return 0.0
    acc = 0.0
    if end == 0:
        h = 0.5 * (hi - lo)
        m = 0.5 * (hi + lo)
        for k in range(gx.shape[0]):
            acc += gw[k] * _lam(sign, base, recs, tp, m + h * gx[k])
        return acc * h
    if end > 0:
        s_lo = math.sqrt(max(0.0, 1.0 - hi))
        s_hi = math.sqrt(max(0.0, 1.0 - lo))
    else:
        s_lo = math.sqrt(max(0.0, lo + 1.0))
        s_hi = math.sqrt(max(0.0, hi + 1.0))
    h = 0.5 * (s_hi - s_lo)
    m = 0.5 * (s_hi + s_lo)
    for k in range(gx.shape[0]):
        s = m + h * gx[k]
        y = end * (1.0 - s * s)
        acc += gw[k] * _lam(sign, base, recs, tp, y) * 2.0 * s
    return acc * h


class _Antiderivative:
    """G(y) = integral of lambda from -1 to y, tabulated then refined per cell."""

    def __init__(self, prof: LambdaProfile, nodes: int):
        pts = [p for p in prof.breakpoints() if -1.0 < p < 1.0]
        grid = np.union1d(np.linspace(-1.0, 1.0, nodes), pts)
        self.y = grid
        self._args = (float(prof.sign), prof.baseline, prof._recs, prof._tp)
        tapered = prof.taper is not None
        self._ends = np.zeros(grid.size - 1, dtype=np.int64)
        if tapered:
            self._ends[0] = -1
            self._ends[-1] = 1
        cell = np.array([prof.integral(lo, hi) for lo, hi in zip(grid[:-1], grid[1:])])
        self.G = np.concatenate([[0.0], np.cumsum(cell)])

    def __call__(self, y: float) -> float:
        k = int(np.searchsorted(self.y, y, side="right")) - 1
        k = min(max(k, 0), self.y.size - 2)
        lo = self.y[k]
        if y == lo:
            return float(self.G[k])
        return float(self.G[k] + _gl(*self._args, lo, y, self._ends[k], _GL_X, _GL_W))

    def cell_of_value(self, v: float) -> int:
        # G is monotone (profile of one sign); returns k with v between G[k], G[k+1]
        G = self.G if self.G[-1] >= self.G[0] else -self.G
        vv = v if self.G[-1] >= self.G[0] else -v
        k = int(np.searchsorted(G, vv, side="right")) - 1
        return min(max(k, 0), self.y.size - 2)


class ReleaseMap:
    """beta(y): Phi-[y, 1] + Phi+[-1, beta(y)] = 0."""

    def __init__(self, lam_minus: LambdaProfile, lam_plus: LambdaProfile,
                 sections: Optional[SectionSet] = None, nodes: int = 801):
        if lam_minus.sign != -1 or lam_plus.sign != 1:
            raise ValidationError("expected (lambda-, lambda+) with signs (-1, +1)")
        self.lam_minus = lam_minus
        self.lam_plus = lam_plus
        self.sections = sections or SectionSet()
        self._Gm = _Antiderivative(lam_minus, nodes)
        self._Gp = _Antiderivative(lam_plus, nodes)
        self.total_minus = float(self._Gm.G[-1])
        self.total_plus = float(self._Gp.G[-1])

    # the two cumulative integrals in the notation of the defining identity
    def phi_minus_to_one(self, y: float) -> float:
        return self.total_minus - self._Gm(y)

    def phi_plus_from_minus_one(self, b: float) -> float:
        return self._Gp(b)

    def residual(self, y: float, b: float) -> float:
        return self.phi_minus_to_one(y) + self.phi_plus_from_minus_one(b)

    def _check_domain(self, y):
        lo, hi = self.sections.interval
        if not (math.isfinite(y) and lo <= y <= hi):
            raise DomainError(f"y={y} outside I_delta=[{lo}, {hi}]")

    def beta(self, y: float) -> float:
        self._check_domain(y)
        target = -self.phi_minus_to_one(y)
        if not target < self.total_plus:
            raise UndefinedMapError(
                f"release undefined at y={y}: |Phi-[y,1]|={target:.6g} >= Phi+[-1,1]={self.total_plus:.6g}")
        if target <= 0.0:
            return -1.0
        k = self._Gp.cell_of_value(target)
        lo, hi = self._Gp.y[k], self._Gp.y[k + 1]
        g = lambda b: self._Gp(b) - target  # noqa: E731
        glo, ghi = g(lo), g(hi)
        if glo == 0.0:
            return float(lo)
        if glo * ghi > 0.0:
            # cell bookkeeping off by rounding; widen to the neighbours
            lo = self._Gp.y[max(k - 1, 0)]
            hi = self._Gp.y[min(k + 2, self._Gp.y.size - 1)]
        b = brentq(g, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
        if abs(self.residual(y, b)) > RESIDUAL_TOL:
            raise UndefinedMapError(f"beta residual too large at y={y}")
        return float(b)

    def beta_derivative(self, y: float) -> float:
        b = self.beta(y)
        den = self.lam_plus(b)
        if den == 0.0:
            raise UndefinedMapError(f"beta' undefined at y={y}: lambda+(beta)=0")
        return float(self.lam_minus(y) / den)

    def beta_beta(self, y: float) -> float:
        b = self.beta(y)
        if not self.sections.contains(b):
            raise UndefinedMapError(f"beta(y)={b} leaves I_delta")
        return self.beta(b)

    def tabulate(self, n: int = 201) -> np.ndarray:
        """Rows (y, beta, beta') on an even grid of I_delta; undefined rows are NaN."""
        lo, hi = self.sections.interval
        out = np.full((n, 3), np.nan)
        for j, y in enumerate(np.linspace(lo, hi, n)):
            out[j, 0] = y
            try:
                out[j, 1] = self.beta(y)
                out[j, 2] = self.beta_derivative(y)
            except UndefinedMapError:
                pass
        return out

    def tabulation_csv(self, n: int = 201) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["y", "beta", "beta_prime"])
        for y, b, d in self.tabulate(n):
            w.writerow([repr(float(y)), repr(float(b)), repr(float(d))])
        return buf.getvalue()


# --------------------------------------------------------------------------


@dataclass
class InclusionReport:
    rows: List[dict]

    @property
    def ok(self) -> bool:
        return all(r["margin"] > 0.0 for r in self.rows)


def check_inclusions(rmap: ReleaseMap, ladder: SegmentLadder) -> InclusionReport:
    """Endpoint form of the four inclusions for each i = 1..n+1."""
    A, B = ladder.A, ladder.B
    rows = []

    def cmp(i, which, label, y, sense, bound, blabel):
        try:
            v = rmap.beta(y)
        except (UndefinedMapError, DomainError) as exc:
            raise UndefinedMapError(f"beta undefined at endpoint {label}={y}: {exc}") from exc
        margin = v - bound if sense == ">" else bound - v
        rows.append({"i": i, "inclusion": which, "test": f"beta({label}) {sense} {blabel}",
                     "beta": v, "bound": bound, "margin": margin})

    for i in range(1, ladder.n + 2):
        if i % 2 == 1:
            cmp(i, 1, f"a{2*i+1}", A(2 * i + 1), ">", B(2 * i), f"b{2*i}")
            cmp(i, 1, f"a{2*i-2}", A(2 * i - 2), "<", B(2 * i - 1), f"b{2*i-1}")
            cmp(i, 2, f"b{2*i-2}", B(2 * i - 2), ">", A(2 * i - 1), f"a{2*i-1}")
            cmp(i, 2, f"b{2*i+1}", B(2 * i + 1), "<", A(2 * i), f"a{2*i}")
        else:
            cmp(i, 1, f"b{2*i-1}", B(2 * i - 1), "<", A(2 * i - 2), f"a{2*i-2}")
            cmp(i, 1, f"b{2*i}", B(2 * i), ">", A(2 * i + 1), f"a{2*i+1}")
            cmp(i, 2, f"a{2*i}", A(2 * i), "<", B(2 * i + 1), f"b{2*i+1}")
            cmp(i, 2, f"a{2*i-1}", A(2 * i - 1), ">", B(2 * i - 2), f"b{2*i-2}")
    return InclusionReport(rows)


@dataclass
class PredictedCycle:
    label: str
    i: int
    segment: Tuple[float, float]
    y_star: float
    beta_y_star: float
    stability: str
    multiplier: float


@dataclass
class PredictionReport:
    n: int
    l: int
    cycles: List[PredictedCycle]
    inclusions: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"n": self.n, "l": self.l, "cycles": [asdict(c) for c in self.cycles],
                "inclusions": self.inclusions}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def by_label(self, label: str) -> PredictedCycle:
        return next(c for c in self.cycles if c.label == label)


def predict(rmap: ReleaseMap, ladder: SegmentLadder) -> PredictionReport:
    inc = check_inclusions(rmap, ladder)
    if not inc.ok:
        bad = [r["test"] for r in inc.rows if r["margin"] <= 0.0]
        raise ValidationError(f"inclusions fail, prediction refused: {', '.join(bad)}")
    cycles = []
    for seg in ladder.segments():
        lo, hi = seg["lo"], seg["hi"]
        y_star = brentq(lambda y: rmap.beta_beta(y) - y, lo, hi, xtol=1e-14, rtol=8.9e-16)
        b = rmap.beta(y_star)
        mult = rmap.beta_derivative(b) * rmap.beta_derivative(y_star)
        cycles.append(PredictedCycle(seg["label"], seg["i"], (lo, hi), float(y_star), float(b),
                                     "attracting" if abs(mult) < 1.0 else "repelling", float(mult)))
    return PredictionReport(ladder.n, 2 * ladder.n + 1, cycles, inc.rows)


@dataclass
class FixedPointScan:
    points: List[dict]
    degenerate: bool
    skipped: List[Tuple[float, float]]


def beta_beta_fixed_points(rmap: ReleaseMap, search: Tuple[float, float], grid: int = 2000) -> FixedPointScan:
    """Sign changes of beta(beta(y)) - y on a grid, refined by bisection."""
    if grid < 2:
        raise DomainError("grid must be at least 2")
    lo_d, hi_d = rmap.sections.interval
    lo, hi = max(search[0], lo_d), min(search[1], hi_d)
    if not lo < hi:
        return FixedPointScan([], False, [])
    ys = np.linspace(lo, hi, grid + 1)
    d = np.full(ys.size, np.nan)
    for j, y in enumerate(ys):
        try:
            d[j] = rmap.beta_beta(y) - y
        except UndefinedMapError:
            pass
    defined = np.isfinite(d)
    skipped = []
    j = 0
    while j < ys.size:
        if not defined[j]:
            k = j
            while k + 1 < ys.size and not defined[k + 1]:
                k += 1
            skipped.append((float(ys[j]), float(ys[k])))
            j = k + 1
        else:
            j += 1
    if defined.all() and np.all(np.abs(d) < 1e-9):
        return FixedPointScan([], True, skipped)
    pts = []
    g = lambda y: rmap.beta_beta(y) - y  # noqa: E731
    for j in range(ys.size - 1):
        if not (defined[j] and defined[j + 1]):
            continue
        if d[j] == 0.0:
            y_star = ys[j]
        elif d[j] * d[j + 1] < 0.0:
            y_star = brentq(g, ys[j], ys[j + 1], xtol=1e-12, rtol=8.9e-16)
        else:
            continue
        b = rmap.beta(y_star)
        mult = rmap.beta_derivative(b) * rmap.beta_derivative(y_star)
        pts.append({"y_star": float(y_star), "multiplier": float(mult)})
    return FixedPointScan(pts, False, skipped)
