"""Command-line front end.

Exit codes: 0 success, 1 a solution failed verification (or no verified
solution was found), 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import (
    ActiveSetError,
    BatchError,
    InstanceError,
    NoEquilibriumFound,
    NotConverged,
    NotRational,
    UnknownCfmm,
    UnsupportedParticipant,
    WrongArity,
)

OK, FAILED, BAD_INPUT = 0, 1, 2
SOLVERS = ("convex", "tatonnement", "reference")
PROBES = ("wgs", "budget", "rule-family")


def _solve(inst, solver: str, tol: float | None, diag):
    if solver == "convex":
        from .convex import SolveOptions, solve_convex

        opts = SolveOptions(diag=diag)
        if tol is not None:
            opts.tol = tol
        return solve_convex(inst, opts)
    if solver == "tatonnement":
        from .tatonnement import TatonnementOptions, solve_tatonnement

        opts = TatonnementOptions(diag=diag)
        if tol is not None:
            opts.tol = tol
        return solve_tatonnement(inst, opts)
    from .reference import ReferenceOptions, solve_two_asset

    if diag is not None:
        logging.getLogger(__name__).warning("--diag is ignored by the reference solver")
    opts = ReferenceOptions()
    if tol is not None:
        opts.tol = tol
    return solve_two_asset(inst, opts)


def _dump(obj):
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_solve(args) -> int:
    from .io import load_instance, solution_to_json
    from .verify import verify_solution

    inst = load_instance(args.instance)
    diag = open(args.diag, "w", encoding="utf-8", newline="") if args.diag else None
    try:
        sol = _solve(inst, args.solver, args.tol, diag)
    finally:
        if diag is not None:
            diag.close()
    report = verify_solution(inst, sol)
    rational = None
    code = OK if report.passed else FAILED
    if args.rational:
        from .rational import extract_rational

        try:
            rational = extract_rational(inst, sol)
        except (NotRational, ActiveSetError) as exc:
            print(f"no exact solution: {exc}", file=sys.stderr)
            code = FAILED
    _dump(solution_to_json(inst, sol, rational))
    if not report.passed:
        print(report.table(), file=sys.stderr)
    return code


def cmd_verify(args) -> int:
    from .io import load_instance, load_json, solution_from_json
    from .verify import verify_solution

    inst = load_instance(args.instance)
    sol = solution_from_json(inst, load_json(args.solution))
    report = verify_solution(inst, sol, args.tol)
    print(report.table())
    for note in report.notes:
        print(f"note: {note}")
    print("PASS" if report.passed else "FAIL")
    return OK if report.passed else FAILED


def cmd_density(args) -> int:
    from .density import density_from_function, write_density_csv
    from .io import load_instance

    inst = load_instance(args.instance)
    match = [p for _, p in inst.cfmms() if p.id == args.cfmm]
    if not match:
        raise UnknownCfmm(f"no CFMM with id {args.cfmm!r}")
    cfmm = match[0]
    halves = density_from_function(cfmm.effective_function(), cfmm.reserves)
    side = 0
    if args.sell is not None:
        names = [inst.symbols[a] for a in cfmm.assets]
        if args.sell not in names:
            raise InstanceError(f"{args.cfmm} does not hold {args.sell!r}")
        side = names.index(args.sell)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        write_density_csv(halves[side], fh, points=args.points)
    return OK


def cmd_sequence(args) -> int:
    from .io import load_sequence, solution_to_json
    from .sequencer import run_sequence, write_rates_csv

    batches = load_sequence(args.sequence)
    result = run_sequence(batches, carry_fee_deposit=args.fee_deposit,
                          solver=lambda inst: _solve(inst, args.solver, args.tol, None))
    out = [solution_to_json(inst, sol) | {"passed": rep.passed}
           for inst, sol, rep in zip(result.instances, result.solutions, result.reports)]
    _dump({"batches": out,
           "reserves": {k: v.tolist() for k, v in result.reserves.items()},
           "fee_sink": {k: v.tolist() for k, v in result.fee_sink.items()}})
    if args.rates and batches:
        with open(args.rates, "w", encoding="utf-8", newline="") as fh:
            write_rates_csv(result, batches[0].symbols, fh)
    return OK if result.passed else FAILED


def cmd_analyze(args) -> int:
    from .analysis import budget_invariance_probe, family_identity_check, wgs_probe
    from .io import load_instance

    inst = load_instance(args.instance)
    rows = []
    if args.probe == "rule-family":
        rows.append(("rule-family", family_identity_check(samples=args.samples)))
    for _, cfmm in inst.cfmms():
        if args.probe == "wgs":
            rows.append((cfmm.id, wgs_probe(cfmm.function, cfmm.reserves, samples=args.samples)))
        elif args.probe == "budget":
            rows.append((cfmm.id, budget_invariance_probe(cfmm.function, samples=args.samples)))
    for name, res in rows:
        verdict = "pass" if res.passed else "witness"
        print(f"{name:<16}{res.name:<13}{verdict:<9}samples={res.samples}")
        if res.witness:
            print("  " + json.dumps(res.to_json()["witness"]))
    return OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cfmmbatch", description="Batch clearing of limit offers and CFMMs.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve an instance, print the solution JSON")
    s.add_argument("instance")
    s.add_argument("--solver", choices=SOLVERS, default="convex")
    s.add_argument("--tol", type=float)
    s.add_argument("--diag", metavar="CSV", help="per-iteration diagnostics")
    s.add_argument("--rational", action="store_true", help="also emit exact fractions")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check a solution against the instance")
    v.add_argument("instance")
    v.add_argument("solution")
    v.add_argument("--tol", type=float)
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("density", help="write a CFMM's trade density as CSV")
    d.add_argument("instance")
    d.add_argument("--cfmm", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--sell", help="asset the half sells (default: the CFMM's first asset)")
    d.add_argument("--points", type=int, default=200)
    d.set_defaults(func=cmd_density)

    q = sub.add_parser("sequence", help="run batches in order, carrying reserves")
    q.add_argument("sequence")
    q.add_argument("--fee-deposit", action="store_true", help="fees stay in the reserves")
    q.add_argument("--solver", choices=SOLVERS, default="convex")
    q.add_argument("--tol", type=float)
    q.add_argument("--rates", metavar="CSV", help="per-batch clearing prices")
    q.set_defaults(func=cmd_sequence)

    a = sub.add_parser("analyze", help="probe the instance's trading functions")
    a.add_argument("instance")
    a.add_argument("--probe", choices=PROBES, default="wgs")
    a.add_argument("--samples", type=int, default=256)
    a.set_defaults(func=cmd_analyze)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InstanceError, UnknownCfmm, UnsupportedParticipant, WrongArity, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT
    except (NotConverged, NoEquilibriumFound) as exc:
        print(f"no solution: {exc}", file=sys.stderr)
        return FAILED
    except BatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
