"""The acceptance checks, shared by ``torcanard verify`` and the test suite.

Heavy intermediate results (window scan, censuses) are computed once per
suite and reused by the criteria that depend on them.
"""
from __future__ import annotations

import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .canard_hunter import (NO_GRAND_CANARD, PASS, CensusResult, WindowRecord, census,
                            scan_windows, window_converged, window_rotation)
from .family_builder import (LambdaProfile, build_family, check_inequalities,
                             fixture_family, fixture_ladder)
from .flow import FlowConfig, TorusFlow
from .singular_tools import ReleaseMap, check_inclusions, phi, predict
from .slow_curve import SectionSet, SlowCurveModel

SCAN_RANGE = (0.03, 0.12)
N_ROT = 200


@dataclass
class CriterionResult:
    number: int
    title: str
    ok: bool
    detail: str
    seconds: float

    def line(self) -> str:
        tag = "PASS" if self.ok else "FAIL"
        return f"criterion {self.number:2d} [{tag}] {self.title}: {self.detail} ({self.seconds:.1f} s)"

    def to_dict(self) -> dict:
        return asdict(self)


def _strictly_decreasing(v) -> bool:
    return all(b < a for a, b in zip(v, v[1:]))


class AcceptanceSuite:
    def __init__(self, family=None):
        self.family = family or fixture_family(1)
        self.rmap = ReleaseMap(self.family.lam_minus, self.family.lam_plus, self.family.sections)
        self.prediction = predict(self.rmap, self.family.ladder)
        self._windows: Optional[List[WindowRecord]] = None
        self._scan_seconds = 0.0
        self._census: Dict[int, Tuple[CensusResult, float]] = {}
        self._gap: Optional[CensusResult] = None

    # ------------------------------------------------------------------
    # shared heavy pieces

    @property
    def windows(self) -> List[WindowRecord]:
        if self._windows is None:
            t = time.perf_counter()
            self._windows = scan_windows(self.family, *SCAN_RANGE, grid=64)
            self._scan_seconds = time.perf_counter() - t
        return self._windows

    def census_at(self, w: WindowRecord) -> Tuple[CensusResult, float]:
        if w.m not in self._census:
            t = time.perf_counter()
            r = census(self.family, FlowConfig(w.eps_mid), self.prediction, 0.0, rmap=self.rmap)
            self._census[w.m] = (r, time.perf_counter() - t)
        return self._census[w.m]

    def census_windows(self) -> List[WindowRecord]:
        """The three largest-eps interior windows and the smallest-eps one."""
        inner = [w for w in self.windows if not w.edge]
        picks = inner[:3] + inner[-1:]
        return sorted({w.m: w for w in picks}.values(), key=lambda w: -w.eps_mid)

    def converged(self) -> List[WindowRecord]:
        out = []
        for w in self.census_windows():
            r, _ = self.census_at(w)
            if window_converged(w, r, self.prediction, self.rmap, self.family):
                out.append(w)
        return out

    def gap_census(self) -> CensusResult:
        if self._gap is None:
            w1, w2 = self.windows[0], self.windows[1]
            eps = 0.5 * (w1.eps_mid + w2.eps_mid)
            self._gap = census(self.family, FlowConfig(eps), self.prediction, None, rmap=self.rmap)
        return self._gap

    # ------------------------------------------------------------------
    # criteria

    def c1(self):
        lm, lp = LambdaProfile.constant(-2.0), LambdaProfile.constant(2.0)
        rm = ReleaseMap(lm, lp, SectionSet())
        lo, hi = rm.sections.interval
        ys = np.linspace(lo, hi, 100)
        err = max(abs(rm.beta(float(y)) + y) for y in ys)
        return err <= 1e-10, f"max |beta(y) + y| = {err:.2e} over 100 points"

    def c2(self):
        parts, ok = [], True
        for n in (1, 2, 3):
            fam = build_family(fixture_ladder(n), SlowCurveModel(0.5, self.family.model.skew))
            ineq = check_inequalities(fam.lam_minus, fam.lam_plus, fam.ladder)
            rm = ReleaseMap(fam.lam_minus, fam.lam_plus, fam.sections)
            incl = check_inclusions(rm, fam.ladder)
            l = predict(rm, fam.ladder).l
            good = ineq.ok and ineq.min_margin > 0 and incl.ok and l == 2 * n + 1
            ok = ok and good
            parts.append(f"n={n}: l={l}, min margin {ineq.min_margin:.3f}")
        return ok, "; ".join(parts)

    def c3(self):
        lo, hi = self.family.sections.interval
        ys = np.linspace(lo + 0.01, hi - 0.01, 20)
        h = 1e-5
        worst = 0.0
        for y in ys:
            y = float(y)
            fd = (self.rmap.beta(y + h) - self.rmap.beta(y - h)) / (2 * h)
            an = self.rmap.beta_derivative(y)
            worst = max(worst, abs(fd - an) / abs(an))
        return worst <= 1e-6, f"max relative error {worst:.2e} at 20 points"

    def c4(self):
        fam, model = self.family, self.family.model
        ref = phi(fam.lam_minus, -0.5, 0.5)
        errs = []
        for eps in (0.1, 0.05, 0.025):
            flow = TorusFlow(fam.field, FlowConfig(eps))
            r0 = flow.advance(model.branch(-1, -0.9), -0.9, -0.5, events=False)
            r1 = flow.advance(r0.x_lift, -0.5, 0.5, events=False)
            errs.append(abs(eps * r1.L - ref))
        ok = _strictly_decreasing(errs) and errs[2] / errs[0] <= 0.5
        return ok, "E = " + ", ".join(f"{e:.3e}" for e in errs) + f", ratio {errs[2] / errs[0]:.3f}"

    def c5(self):
        fam, model = self.family, self.family.model
        d = []
        for eps in (0.1, 0.05):
            flow = TorusFlow(fam.field, FlowConfig(eps))
            r = flow.advance(0.0, -0.9, 0.0, events=False)
            d.append(abs(r.x - model.branch(-1, 0.0)))
        ratio = d[1] / d[0]
        return 0.3 <= ratio <= 0.8, f"distances {d[0]:.3e}, {d[1]:.3e}, ratio {ratio:.3f}"

    def c6(self):
        ws = self.windows
        widths = [w.log10_width for w in ws]
        en = [w.eps_mid * w.n for w in ws]
        ratio = max(en) / min(en) if ws else math.inf
        ok = len(ws) >= 3 and _strictly_decreasing(widths) and ratio <= 3 and self._scan_seconds <= 300
        return ok, (f"{len(ws)} windows, log10 widths {widths[0]:.1f} .. {widths[-1]:.1f}, "
                    f"max/min eps_n*n = {ratio:.4f}, scan {self._scan_seconds:.0f} s")

    def c7(self):
        conv = self.converged()
        verdicts, slow = [], 0.0
        for w in self.census_windows():
            r, sec = self.census_at(w)
            slow = max(slow, sec)
            verdicts.append((w.n, r.verdict, len(r.canards), w in conv))
        conv_ok = all(v == PASS and k == 3 for n, v, k, c in verdicts if c)
        g = self.gap_census()
        ok = (len(conv) >= 3 and conv_ok and g.verdict == NO_GRAND_CANARD and not g.canards
              and len(g.non_canard) >= 1 and slow <= 600)
        desc = ", ".join(f"n={n}:{v}/{k}{'' if c else ' (not converged)'}" for n, v, k, c in verdicts)
        return ok, (f"{desc}; gap: {g.verdict}, {len(g.canards)} canards, "
                    f"{len(g.non_canard)} non-canard cycles; slowest census {slow:.0f} s")

    def _three(self):
        conv = self.converged()
        return conv[:3]

    def c8(self):
        ws = self._three()
        errs = [self.census_at(w)[0].q_error for w in ws]
        ok = len(ws) == 3 and None not in errs and _strictly_decreasing(errs)
        return ok, "sup |Q - beta o beta| = " + ", ".join(f"{e:.4f}" for e in errs)

    def c9(self):
        ws = self._three()
        rs = [self.census_at(w)[0] for w in ws]
        labels = [c.label for c in self.prediction.cycles]
        ok = len(ws) == 3
        parts = []
        for lbl in labels:
            seq = [r.multiplier_errors.get(lbl, math.nan) for r in rs]
            good = all(math.isfinite(v) for v in seq) and _strictly_decreasing(seq)
            ok = ok and good
            parts.append(f"{lbl}: " + ", ".join(f"{v:.4g}" for v in seq))
        return ok, "; ".join(parts)

    def c10(self):
        ws = self._three()
        ok, parts = len(ws) == 3, []
        tol = 2.0 / N_ROT
        for w in ws:
            rows = window_rotation(self.family, w, N_ROT)
            rhos = [r for _, r in rows]
            k = math.floor(rhos[1])
            half = all(abs(r - (k + 0.5)) <= tol for r in rhos)
            flat = max(rhos) - min(rhos) <= tol
            ok = ok and half and flat
            parts.append(f"n={w.n}: rho={rhos[1]:.5f} spread {max(rhos) - min(rhos):.1e}")
        return ok, "; ".join(parts)

    def c11(self):
        from .cli import main
        w = self.windows[0]
        with tempfile.TemporaryDirectory() as tmp:
            fam_path = os.path.join(tmp, "family.json")
            self.family.save(fam_path)
            outs = []
            for run in ("a", "b"):
                d = os.path.join(tmp, run)
                code = main(["census", "--family", fam_path, "--eps", repr(w.eps_mid), "--out-dir", d])
                if code != 0:
                    return False, f"census exited with {code}"
                outs.append({name: open(os.path.join(d, name), "rb").read()
                             for name in sorted(os.listdir(d))})
        same = outs[0] == outs[1]
        return same, f"files {sorted(outs[0])} {'identical' if same else 'differ'}"

    TITLES = {
        1: "beta symmetry for constant profiles",
        2: "construction soundness n=1,2,3",
        3: "beta' against finite differences",
        4: "contraction integral asymptotics",
        5: "distance to the attracting branch",
        6: "window detection",
        7: "canard census",
        8: "convergence of Q to beta o beta",
        9: "convergence of multipliers",
        10: "half-integer rotation number",
        11: "census determinism",
    }

    # wall-clock limits in seconds, where a criterion states one
    LIMITS = {1: 1.0, 2: 10.0, 4: 30.0}

    def run(self, number: int) -> CriterionResult:
        fn: Callable = getattr(self, f"c{number}")
        t = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed criterion, reported as such
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        sec = time.perf_counter() - t
        limit = self.LIMITS.get(number)
        if limit is not None and sec > limit:
            ok, detail = False, f"{detail}; exceeded {limit:.0f} s"
        return CriterionResult(number, self.TITLES[number], bool(ok), detail, sec)

    def run_all(self, echo: bool = False) -> List[CriterionResult]:
        out = []
        for k in sorted(self.TITLES):
            r = self.run(k)
            if echo:
                print(r.line(), flush=True)
            out.append(r)
        return out
