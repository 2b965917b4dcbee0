"""Command line front end.

Exit codes: 0 certified, 1 refuted, 2 indeterminate, 3 input error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import momentmap as mm
from .decomposition import DecompositionError, assemble
from .poly import ParseError, varset
from .problem import Problem, ProblemError, load
from .reeb import export_dot, reeb_digraph
from .region import RegionError, check_definition1, classify_boundary, dump_records
from .report import EXIT_CODES, EXIT_INPUT_ERROR, INDETERMINATE, fmt_point

INPUT_ERRORS = (ProblemError, ParseError, RegionError, DecompositionError, mm.MomentMapError)


def _write(out: Path | None, name: str, text: str) -> None:
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text, encoding="utf-8")


def _problem(args) -> Problem:
    prob = load(args.file)
    return prob.with_tolerances(args.tol_zero, args.tol_rank, args.grid_res)


def _emit_report(args, report) -> int:
    sys.stdout.write(report.to_json() if args.json else report.table())
    _write(args.out, "report.json", report.to_json())
    return report.exit_code


def cmd_check_region(args) -> int:
    prob = _problem(args)
    spec = prob.region()
    report = check_definition1(spec)
    if args.emit_points:
        _write(args.out, "points.txt", dump_records(spec, classify_boundary(spec, prob.classify_N)))
    return _emit_report(args, report)


def cmd_check_decomposition(args) -> int:
    prob = _problem(args)
    mode = args.mode or prob.mode
    b = args.b if args.b is not None else prob.b
    if mode == "thm1" and args.b is None:
        b = 1
    report = assemble(prob.decomposition(), mode, b)
    return _emit_report(args, report)


def cmd_moment_map(args) -> int:
    prob = _problem(args)
    inp = prob.moment_map()
    check = mm.validate_ls(inp)
    if check.verdict != "pass":
        for w in check.witnesses:
            print(f"error: {w.diagnostic} at {fmt_point(w.points[0])}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    system = mm.build_system(inp)
    text = mm.export_system(system)
    sys.stdout.write(text)
    _write(args.out, "system.txt", text)
    base = mm.base_points(inp, prob.fiber_points)
    rows, worst, ranks = [], 0.0, []
    for x in base:
        F = mm.sample_fiber(system, x, prob.tol.zero_tol)
        worst = max(worst, float(np.max(np.abs(system.residuals(F)))))
        for z in F:
            ys = [z[list(np.array(b) - 1)] for b in system.y_blocks]
            if all(np.any(y != 0) for y in ys):
                ranks.append(mm.jacobian_rank(system, z, prob.tol).rank)
            rows.append(" ".join(f"{v:.9g}" for v in z))
    summary = {"equations": len(system.equations), "total_vars": system.total_vars,
               "base_points": len(base), "fiber_points": len(rows), "max_residual": worst,
               "min_jacobian_rank": min(ranks) if ranks else None}
    print(json.dumps(summary, sort_keys=True))
    _write(args.out, "fibers.txt", "\n".join(rows) + "\n")
    return 0


def cmd_reeb(args) -> int:
    prob = _problem(args)
    coord = args.coord if args.coord is not None else prob.reeb_coord
    g = reeb_digraph(prob.region(), coord)
    dot = export_dot(g)
    sys.stdout.write(dot)
    for flag in g.flags:
        print(f"warning: {flag}", file=sys.stderr)
    if args.emit_dot or args.out is not None:
        _write(args.out, "reeb.dot", dot)
    return EXIT_CODES[INDETERMINATE] if g.indeterminate else 0


def _nset(text: str) -> tuple[int, ...]:
    try:
        return varset(int(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad index set {text!r}") from exc


def cmd_classify(args) -> int:
    prob = _problem(args)
    Ns = args.N if args.N is not None else prob.classify_N
    spec = prob.region()
    try:
        recs = classify_boundary(spec, Ns)
    except ValueError as exc:
        raise ProblemError(str(exc)) from exc
    text = dump_records(spec, recs)
    sys.stdout.write(text)
    _write(args.out, "points.txt", text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="raregion", description="Checks for real algebraic regions.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("file", type=Path, help="problem file (TOML)")
        p.add_argument("--tol-zero", type=float, default=None, help="zero tolerance for residuals")
        p.add_argument("--tol-rank", type=float, default=None, help="relative singular-value threshold")
        p.add_argument("--grid-res", type=int, default=None, help="grid points per axis")
        p.add_argument("--out", type=Path, default=None, help="directory for report and data files")
        p.add_argument("--json", action="store_true", help="print the JSON report instead of the table")
        return p

    p = common(sub.add_parser("check-region", help="check the region conditions directly"))
    p.add_argument("--emit-points", action="store_true", help="write points.txt to --out")
    p.set_defaults(func=cmd_check_region)

    p = common(sub.add_parser("check-decomposition", help="check the block hypotheses"))
    p.add_argument("--mode", choices=("thm1", "thm3"), default=None)
    p.add_argument("--b", type=int, default=None)
    p.set_defaults(func=cmd_check_decomposition)

    p = common(sub.add_parser("moment-map", help="build the manifold equations and sample fibers"))
    p.set_defaults(func=cmd_moment_map)

    p = common(sub.add_parser("reeb", help="Reeb digraph of a coordinate"))
    p.add_argument("--coord", type=int, default=None)
    p.add_argument("--emit-dot", action="store_true", help="write reeb.dot to --out")
    p.set_defaults(func=cmd_reeb)

    p = common(sub.add_parser("classify", help="classify boundary points"))
    p.add_argument("--N", type=_nset, action="append", default=None,
                   help="index set such as 1,2 (repeatable)")
    p.set_defaults(func=cmd_classify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 1


if __name__ == "__main__":
    sys.exit(main())
