"""Command line runner: ``torcanard <command> [options]``.

Every command writes its results into ``--out-dir``.  Outputs are fully
determined by the arguments, so repeated runs are byte-identical.
Exit codes: 0 success, 1 acceptance failure (verify only), 2 invalid input
or failed validation, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import List, Optional

import numpy as np

from .errors import NumericalError, ValidationError

TIERS = {"std": "standard", "ext": "extended"}


def _write(out_dir: str, name: str, text: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _family(args):
    from .family_builder import Family
    if not args.family:
        raise ValidationError("--family is required")
    try:
        return Family.load(args.family)
    except OSError as exc:
        raise ValidationError(f"cannot read family file: {exc}") from exc


def _config(args, eps: float):
    from .flow import FlowConfig
    tier = TIERS[args.tier] if args.tier else None
    return FlowConfig(eps, tier=tier)


# --------------------------------------------------------------------------
# commands


def cmd_build(args) -> int:
    from .family_builder import SegmentLadder, build_family, check_inequalities, fixture_ladder
    from .singular_tools import ReleaseMap, check_inclusions, predict
    from .slow_curve import SectionSet, SlowCurveModel, validate_nondegenerate

    if args.ladder:
        try:
            with open(args.ladder) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read ladder file: {exc}") from exc
        try:
            ladder = SegmentLadder(int(d["n"]), d["a"], d["b"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed ladder file: {exc!r}") from exc
    else:
        ladder = fixture_ladder(args.n)
    model = SlowCurveModel(args.c, args.skew)
    fam = build_family(ladder, model, SectionSet(args.delta), gamma=args.gamma)
    report = validate_nondegenerate(fam.field, model)
    ineq = check_inequalities(fam.lam_minus, fam.lam_plus, ladder)
    rmap = ReleaseMap(fam.lam_minus, fam.lam_plus, fam.sections)
    incl = check_inclusions(rmap, ladder)
    summary = {
        "status": "PASS" if (report.ok and ineq.ok and incl.ok) else "FAIL",
        "n": ladder.n,
        "nondegeneracy": report.checks,
        "inequalities": {"ok": ineq.ok, "min_margin": ineq.min_margin, "rows": ineq.rows,
                         "skipped": ineq.skipped},
        "inclusions": {"ok": incl.ok, "rows": incl.rows},
    }
    if summary["status"] == "PASS":
        summary["predicted_l"] = predict(rmap, ladder).l
    _write(args.out_dir, "family.json", fam.to_json())
    _write(args.out_dir, "build.json", _dump(summary))
    print(f"build {summary['status']}: n={ladder.n}"
          + (f", predicted l={summary['predicted_l']}" if "predicted_l" in summary else ""))
    return 0 if summary["status"] == "PASS" else 2


def cmd_predict(args) -> int:
    from .singular_tools import ReleaseMap, predict
    fam = _family(args)
    rmap = ReleaseMap(fam.lam_minus, fam.lam_plus, fam.sections)
    rep = predict(rmap, fam.ladder)
    _write(args.out_dir, "prediction.json", rep.to_json())
    _write(args.out_dir, "beta.csv", rmap.tabulation_csv(args.grid or 201))
    print(f"predicted l={rep.l}: " + ", ".join(f"{c.label} {c.stability}" for c in rep.cycles))
    return 0


def cmd_simulate(args) -> int:
    from .flow import TorusFlow
    if args.eps is None:
        raise ValidationError("--eps is required")
    fam = _family(args)
    flow = TorusFlow(fam.field, _config(args, args.eps))
    y0, y1 = args.y0, args.y1
    if y1 > y0:
        r = flow.advance(args.x0, y0, y1, record=args.dump_orbit)
    else:
        r = flow.advance_backward(args.x0, y0, y1, record=args.dump_orbit)
    out = {"eps": args.eps, "x0": args.x0, "y0": y0, "y1": y1, "x": r.x, "x_lift": r.x_lift,
           "L": r.L, "saturated": r.saturated, "steps": r.steps,
           "events": [{"section": e.section, "y": e.y, "direction": e.direction} for e in r.events]}
    _write(args.out_dir, "orbit.json", _dump(out))
    if args.dump_orbit:
        _write(args.out_dir, "orbit.csv", r.path_csv())
    print(f"x({y1})={r.x!r} lift={r.x_lift!r} L={r.L!r} events={len(r.events)}")
    return 0


def _range(args):
    if not args.eps_range:
        raise ValidationError("--eps-range LO HI is required")
    lo, hi = args.eps_range
    if not 0.0 < lo < hi:
        raise ValidationError("--eps-range needs 0 < LO < HI")
    return lo, hi


def cmd_windows(args) -> int:
    from .canard_hunter import scan_windows, windows_csv
    fam = _family(args)
    lo, hi = _range(args)
    ws = scan_windows(fam, lo, hi, grid=args.grid or 64, config=_config(args, hi))
    _write(args.out_dir, "windows.csv", windows_csv(ws))
    _write(args.out_dir, "windows.json", _dump([w.to_dict() for w in ws]))
    print(f"{len(ws)} windows in [{lo}, {hi}]")
    return 0


def cmd_census(args) -> int:
    from .canard_hunter import census, cycles_csv, locate
    from .singular_tools import ReleaseMap, predict
    if args.eps is None:
        raise ValidationError("--eps is required")
    fam = _family(args)
    cfg = _config(args, args.eps)
    rmap = ReleaseMap(fam.lam_minus, fam.lam_plus, fam.sections)
    pred = predict(rmap, fam.ladder)
    m, resid, centre = locate(fam, cfg)
    tau = args.tau
    if tau is not None and not centre:
        raise ValidationError(f"eps={args.eps!r} is not a window centre (phase residual {resid:.3e})")
    if tau is None and centre:
        tau = 0.0
    res = census(fam, cfg, pred, window_tau=tau, grid=args.grid or 96, rmap=rmap)
    doc = res.to_dict()
    doc["window"] = {"m": m, "n": abs(m), "phase_residual": resid, "centre": centre}
    _write(args.out_dir, "census.json", _dump(doc))
    _write(args.out_dir, "cycles.csv", cycles_csv(res.canards))
    print(f"census at eps={args.eps!r}: {res.verdict}, {len(res.canards)} canard cycles, "
          f"{len(res.non_canard)} non-canard cycles")
    return 0


def cmd_staircase(args) -> int:
    from .canard_hunter import scan_windows, staircase, staircase_csv
    fam = _family(args)
    lo, hi = _range(args)
    grid = [float(e) for e in np.linspace(lo, hi, (args.grid or 16) + 1)]
    windows = scan_windows(fam, lo, hi, config=_config(args, hi)) if args.with_windows else ()
    rows = staircase(fam, grid, N=args.iters, config=_config(args, hi), windows=windows)
    _write(args.out_dir, "staircase.csv", staircase_csv(rows))
    failed = [r for r in rows if r.status.startswith("error")]
    print(f"{len(rows)} staircase rows, {len(failed)} failed")
    return 3 if failed else 0


def cmd_verify(args) -> int:
    from .acceptance import AcceptanceSuite
    suite = AcceptanceSuite()
    results = suite.run_all(echo=True)
    _write(args.out_dir, "acceptance.json", _dump([r.to_dict() for r in results]))
    return 0 if all(r.ok for r in results) else 1


COMMANDS = {
    "build": cmd_build, "predict": cmd_predict, "simulate": cmd_simulate,
    "windows": cmd_windows, "census": cmd_census, "staircase": cmd_staircase,
    "verify": cmd_verify,
}


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="torcanard", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--family", help="family JSON written by 'build'")
        sp.add_argument("--out-dir", default=".", help="directory for outputs")
        sp.add_argument("--tier", choices=sorted(TIERS), help="scalar tier (default: by eps)")

    b = sub.add_parser("build", help="construct a family and write family.json")
    b.add_argument("--n", type=int, default=1, help="fixture ladder size")
    b.add_argument("--ladder", help="JSON file with n, a (a_0..a_2n+1), b (b_-1..b_2n+1)")
    b.add_argument("--c", type=float, default=0.5)
    b.add_argument("--skew", type=float, default=None)
    b.add_argument("--delta", type=float, default=0.02)
    b.add_argument("--gamma", type=float, default=1.0)
    b.add_argument("--out-dir", default=".")

    pr = sub.add_parser("predict", help="singular prediction and beta table")
    common(pr)
    pr.add_argument("--grid", type=int, help="beta table size")

    s = sub.add_parser("simulate", help="integrate one orbit")
    common(s)
    s.add_argument("--eps", type=float)
    s.add_argument("--x0", type=float, default=0.0)
    s.add_argument("--y0", type=float, default=-math.pi)
    s.add_argument("--y1", type=float, default=math.pi)
    s.add_argument("--dump-orbit", action="store_true", help="also write orbit.csv")

    w = sub.add_parser("windows", help="locate grand-canard windows")
    common(w)
    w.add_argument("--eps-range", type=float, nargs=2, metavar=("LO", "HI"))
    w.add_argument("--grid", type=int)

    c = sub.add_parser("census", help="count canard cycles at one eps")
    common(c)
    c.add_argument("--eps", type=float)
    c.add_argument("--tau", type=float, help="position inside the window, in [-1, 1]")
    c.add_argument("--grid", type=int)

    st = sub.add_parser("staircase", help="rotation numbers over an eps range")
    common(st)
    st.add_argument("--eps-range", type=float, nargs=2, metavar=("LO", "HI"))
    st.add_argument("--grid", type=int)
    st.add_argument("--iters", type=int, default=200)
    st.add_argument("--with-windows", action="store_true", help="add window centres")

    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--out-dir", default=".")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    if args.command == "build" and args.skew is None:
        from .family_builder import FIXTURE_SKEW
        args.skew = FIXTURE_SKEW
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
