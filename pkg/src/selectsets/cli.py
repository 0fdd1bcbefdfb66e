"""``selectsets`` command line.

Exit codes: 0 success, 1 input error, 2 invariant-check failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from fractions import Fraction
from typing import Optional, Sequence

from . import exact, montecarlo, oracle
from .rules import KRecord, Percentile, parse_rule, validate_lsd

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 1, 2


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def _fmt(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    return v


def _emit(header: Sequence[str], rows, fmt: str, out) -> None:
    rows = [[_fmt(v) for v in row] for row in rows]
    if fmt == "json":
        out.write(json.dumps([dict(zip(header, row)) for row in rows], indent=2) + "\n")
        return
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def _rule(text: str):
    try:
        return parse_rule(text)
    except (ValueError, TypeError) as exc:
        raise InputError(f"--rule: {exc}") from None


def _positive(name):
    def conv(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer, got {text!r}") from None
        if v < 1:
            raise argparse.ArgumentTypeError(f"{name} must be >= 1, got {v}")
        return v
    return conv


def _grid(text: str):
    try:
        return tuple(int(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"--grid must be comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="selectsets", description="Rank-based selection rules: simulation and exact analysis.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, rule=True):
        if rule:
            p.add_argument("--rule", required=True, help="percentile:<num>/<den> | krecord:<k> | table:<v1>,...")
        p.add_argument("--out", default="-", help="output path ('-' for stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    def sim(p):
        p.add_argument("--reps", type=_positive("--reps"), default=1000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=_positive("--workers"), default=None,
                       help="worker processes (env SELECTSETS_WORKERS overrides; default: all cores)")

    p = sub.add_parser("simulate", help="replicated forward simulation")
    common(p)
    sim(p)
    p.add_argument("--n", type=_positive("--n"), required=True)
    p.add_argument("--grid", type=_grid, default=None)
    p.add_argument("--hist", default=None, help="also write the horizon histogram CSV here")

    p = sub.add_parser("exact", help="exact DP sweep and asymptotic verdicts")
    common(p)
    p.add_argument("--n", type=_positive("--n"), required=True)

    p = sub.add_parser("oracle", help="permutation enumeration and conditional-identity sweep")
    common(p)
    p.add_argument("--n", type=_positive("--n"), required=True)
    p.add_argument("--prefix-len", type=_positive("--prefix-len"), default=None)

    p = sub.add_parser("inverse", help="observations needed to retain m items")
    common(p)
    sim(p)
    p.add_argument("--m", type=_positive("--m"), required=True)
    p.add_argument("--cap", type=_positive("--cap"), default=10**6)

    p = sub.add_parser("krecord", help="k-record growth report")
    common(p, rule=False)
    sim(p)
    p.add_argument("--k", type=_positive("--k"), required=True)
    p.add_argument("--grid", type=_grid, default=(100, 1000, 10000))

    p = sub.add_parser("table1", help="simulated limit constants for p = 1/10..10/10")
    common(p, rule=False)
    sim(p)
    p.add_argument("--n", type=_positive("--n"), default=10_000)

    p = sub.add_parser("validate", help="check the LsD axioms up to a_max")
    common(p)
    p.add_argument("--amax", type=_positive("--amax"), default=10_000)
    return parser


def _workers(args) -> int:
    # the environment wins over the flag
    env = os.environ.get("SELECTSETS_WORKERS")
    return montecarlo.resolve_workers(int(env) if env else args.workers)


def _simulate(args, out):
    rule = _rule(args.rule)
    try:
        cfg = montecarlo.ExperimentConfig(rule, args.n, args.reps, args.seed, args.grid)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    table = montecarlo.run_experiment(cfg, _workers(args))
    _emit(montecarlo.SUMMARY_COLUMNS,
          [(r.n, r.stat, r.mean, r.se, r.reps, r.seed) for r in table.rows], args.format, out)
    if args.hist:
        with open(args.hist, "w", newline="") as fh:
            _emit(("bin_lo", "bin_hi", "mass"), table.histogram, args.format, fh)
    return EXIT_OK


def _exact(args, out):
    rule = _rule(args.rule)
    if not isinstance(rule, Percentile):
        raise InputError("--rule: the exact sweep needs a percentile rule")
    if args.n < 10:
        raise InputError("--n: must be >= 10")
    try:
        report = exact.asymptotic_report(rule, args.n)
    except exact.ConsistencyError as exc:
        print(f"selectsets: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    _emit(exact.EXACT_COLUMNS, report.rows(), args.format, out)
    for name, verdict in report.verdicts().items():
        print(f"{name}: {verdict}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_INVARIANT


def _oracle(args, out):
    rule = _rule(args.rule)
    try:
        res = oracle.enumerate_exact(rule, args.n)
    except oracle.CapacityError as exc:
        raise InputError(f"--n: {exc}") from None
    depth = args.prefix_len or min(args.n, 6)
    failures = oracle.conditional_sweep(rule, depth)
    checked, bad = oracle.a_star_sweep(rule, min(args.n, 6))
    rows = [(j, float(res.dist_L[j])) for j in range(1, args.n + 1)]
    rows += [(k, float(getattr(res, k))) for k in ("E_L", "E_Q", "E_A", "E_V")]
    rows += [("conditional_failures", len(failures)), ("a_star_snapshots", checked), ("a_star_failures", len(bad))]
    _emit(("j", "P_L_j"), rows, args.format, out)
    return EXIT_INVARIANT if failures or bad else EXIT_OK


def _inverse(args, out):
    rule = _rule(args.rule)
    if args.cap < args.m:
        raise InputError("--cap: must be >= --m")
    rep = montecarlo.inverse_sampling(rule, args.m, args.cap, args.reps, args.seed)
    _emit(montecarlo.SUMMARY_COLUMNS,
          [(r.n, r.stat, r.mean, r.se, r.reps, r.seed) for r in rep.rows()], args.format, out)
    return EXIT_OK


def _krecord(args, out):
    rep = montecarlo.krecord_report(args.k, args.grid, args.reps, args.seed, _workers(args))
    rows = []
    for n, ll, ll_se, qn, qn_se, lm, lm_se, h in rep.rows:
        rows += [(n, "L_log", ll, ll_se, args.reps, args.seed),
                 (n, "Q_norm", qn, qn_se, args.reps, args.seed),
                 (n, "L", lm, lm_se, args.reps, args.seed)]
        if h is not None:
            rows.append((n, "H_n", h, 0.0, args.reps, args.seed))
    _emit(montecarlo.SUMMARY_COLUMNS, rows, args.format, out)
    return EXIT_OK


def _table1(args, out):
    rows = montecarlo.table1(args.n, args.reps, args.seed, _workers(args))
    _emit(("p", "stat", "mean", "se", "reference", "tolerance", "ok"),
          [(r.p, r.stat, r.mean, r.se, r.reference, r.tolerance, r.ok) for r in rows], args.format, out)
    return EXIT_OK


def _validate(args, out):
    rule = _rule(args.rule)
    report = validate_lsd(rule, args.amax)
    _emit(("axiom", "a"), [(v.axiom, v.a) for v in report.violations], args.format, out)
    if not report.ok:
        print(f"selectsets: {rule} violates the LsD axioms: " + "; ".join(map(str, report.violations[:5])),
              file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_INVARIANT


_COMMANDS = {
    "simulate": _simulate,
    "exact": _exact,
    "oracle": _oracle,
    "inverse": _inverse,
    "krecord": _krecord,
    "table1": _table1,
    "validate": _validate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        buf = io.StringIO()
        code = _COMMANDS[args.command](args, buf)
    except InputError as exc:
        print(f"selectsets: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.out == "-":
        sys.stdout.write(buf.getvalue())
    else:
        with open(args.out, "w", newline="") as fh:
            fh.write(buf.getvalue())
    return code


if __name__ == "__main__":
    sys.exit(main())
