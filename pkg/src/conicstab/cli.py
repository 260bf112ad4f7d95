"""Command-line entry point: ``conicstab analyze | gderiv | selftest``.

Exit codes: 0 completed, 1 selftest failure, 2 bad problem file,
3 infeasible reference or no multiplier, 4 assumption failure.
"""
from __future__ import annotations

import argparse
import sys

from . import __version__
from .cones import set_fault
from .errors import ProblemFileError
from .problem_io import load_problem, resolve
from .report import EXIT_FAIL, EXIT_PARSE, RunConfig, analyze, dumps, gderiv, render_text
from .selftest import run_all


def _floats(text: str) -> tuple:
    try:
        return tuple(float(t) for t in text.replace(",", " ").split())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _tol(text: str) -> float:
    x = float(text)
    if not 1e-14 <= x <= 1e-2:
        raise argparse.ArgumentTypeError("tolerance must lie in [1e-14, 1e-2]")
    return x


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conicstab", description="Stability analysis of conic generalized equations.")
    parser.add_argument("--version", action="version", version=f"conicstab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="problem file, or the name of a bundled example")
    common.add_argument("--seed", type=int)
    common.add_argument("--face-cap", type=int)
    common.add_argument("--format", choices=("json", "text"), default="json")

    a = sub.add_parser("analyze", parents=[common], help="run the full analysis pipeline")
    a.add_argument("--tol-kkt", type=_tol)
    a.add_argument("--radii", type=_floats, help="probe radii, e.g. 1e-2,1e-3,1e-4")
    a.add_argument("--directions", type=int)
    a.add_argument("--no-probe", action="store_true", help="skip the empirical probe")
    a.add_argument("--timings", action="store_true", help="include wall-clock timings (breaks byte-identity)")

    g = sub.add_parser("gderiv", parents=[common], help="evaluate DS(xbar, ybar)(u)")
    g.add_argument("--u", type=_floats, required=True, help="direction u, e.g. 0,0,0")

    s = sub.add_parser("selftest", help="run built-in invariant suites")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--fault", choices=("lorentz_projection",), help="inject a known fault (negative control)")
    return parser


def _load(args):
    try:
        return load_problem(resolve(args.file))
    except FileNotFoundError as exc:
        raise ProblemFileError("$", str(exc)) from exc


def _emit(report, fmt):
    sys.stdout.write(dumps(report) if fmt == "json" else render_text(report))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        if args.fault:
            set_fault(args.fault)
        try:
            results = run_all(args.seed)
        finally:
            if args.fault:
                set_fault(args.fault, False)
        for r in results:
            print(r.line())
        failed = [r.name for r in results if not r.passed]
        print(f"{len(results) - len(failed)}/{len(results)} checks passed"
              + (f"; failed: {', '.join(failed)}" if failed else ""))
        return EXIT_FAIL if failed else 0

    try:
        spec = _load(args)
    except ProblemFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if args.command == "analyze":
        cfg = RunConfig(seed=args.seed, tol_kkt=args.tol_kkt, radii=args.radii, face_cap=args.face_cap,
                        directions=args.directions, probe=False if args.no_probe else None, timings=args.timings)
        report, code = analyze(spec, cfg)
    else:
        if len(args.u) != spec.problem.n:
            print(f"error: --u has length {len(args.u)}, expected n = {spec.problem.n}", file=sys.stderr)
            return EXIT_PARSE
        report, code = gderiv(spec, args.u, RunConfig(seed=args.seed, face_cap=args.face_cap))
    _emit(report, args.format)
    return code


if __name__ == "__main__":
    sys.exit(main())
