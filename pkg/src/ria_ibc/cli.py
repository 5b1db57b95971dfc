"""Command-line front end: ``ria-ibc {simulate,audit,plan,sweep,verify}``.

Exit codes: 0 ok, 1 verification or decode failure, 2 usage error,
3 planner search exhausted, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import dofplan
from .acceptance import format_table, run_acceptance
from .precoding import FAULTS
from .simulator import THREADS_ENV, csit_audit, leaky_phase2, monte_carlo, worker_count

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_EXHAUSTED, EXIT_IO = 0, 1, 2, 3, 4


def _dumps(doc) -> str:
    return json.dumps(doc, separators=(",", ":"), sort_keys=False)


def _emit(text: str, out: str | None) -> int:
    """Write ``text`` (newline-terminated) to ``out`` or stdout."""
    if not text.endswith("\n"):
        text += "\n"
    if out is None:
        sys.stdout.write(text)
        return EXIT_OK
    try:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"error: cannot write {out}: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(s: str) -> float:
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ria-ibc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="Monte Carlo campaign for (M, N) = (4, 1)")
    s.add_argument("--trials", type=_positive_int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tol", type=_positive_float, default=1e-8)
    s.add_argument("--out")

    a = sub.add_parser("audit", help="check precoder construction for delayed-CSIT violations")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--inject-violation", action="store_true",
                   help="use a phase-2 builder that reads phase-2 channels")
    a.add_argument("--out")

    pl = sub.add_parser("plan", help="optimal frame plan for general (M, N)")
    pl.add_argument("--M", type=_positive_int, required=True)
    pl.add_argument("--N", type=_positive_int, required=True)
    pl.add_argument("--smax", type=_positive_int, default=dofplan.DEFAULT_SMAX)
    pl.add_argument("--out")

    sw = sub.add_parser("sweep", help="tabulate the DoF curves over rho")
    sw.add_argument("--rho-start", type=_positive_float, default=0.25)
    sw.add_argument("--rho-end", type=_positive_float, default=4.5)
    sw.add_argument("--step", type=_positive_float, default=0.05)
    sw.add_argument("--format", choices=("csv", "json"), default="csv")
    sw.add_argument("--out")

    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--inject-fault", choices=FAULTS, action="append", default=[],
                   help="corrupt the precoders to check that the suite notices")
    return p


def _simulate(args) -> int:
    stats = monte_carlo(args.trials, args.seed, args.tol)
    rc = _emit(_dumps(stats.to_json()), args.out)
    if rc:
        return rc
    if stats.successes != stats.trials:
        print(f"decode failures at seeds: {' '.join(map(str, stats.failures))}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _audit(args) -> int:
    rep = csit_audit(args.seed, builders={"phase2": leaky_phase2} if args.inject_violation else None)
    doc = {
        "seed": rep.seed,
        "queries": len(rep.log),
        "violations": [{"op": r.op, "phase": r.p, "round": r.r, "j": r.j, "i": r.i,
                        "constructing": r.view_phase} for r in rep.violations],
        "passed": rep.passed,
    }
    rc = _emit(_dumps(doc), args.out)
    return rc or (EXIT_OK if rep.passed else EXIT_FAIL)


def _plan(args) -> int:
    try:
        plan = dofplan.optimize(args.M, args.N, args.smax)
    except dofplan.SearchExhausted as exc:
        print(f"error: search bound exhausted: {exc}", file=sys.stderr)
        return EXIT_EXHAUSTED
    return _emit(_dumps(plan.to_json()), args.out)


def _sweep(args) -> int:
    try:
        rows = dofplan.sweep(args.rho_start, args.rho_end, args.step)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.format == "csv":
        text = dofplan.to_csv(rows)
    else:
        text = _dumps([{"rho": r.rho, "proposed": r.proposed, "previous": r.previous,
                        "outer": r.outer, "no_csit": r.no_csit} for r in rows])
    return _emit(text, args.out)


def _verify(args) -> int:
    results = run_acceptance(faults=tuple(args.inject_fault))
    print(format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


COMMANDS = {"simulate": _simulate, "audit": _audit, "plan": _plan, "sweep": _sweep, "verify": _verify}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        worker_count()
    except ValueError as exc:
        parser.error(f"{THREADS_ENV}: {exc}")
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
