"""Command line front end.

Exit status: 0 on success, 1 on a domain error (JSON on stderr), 2 on a
usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import metafib, puzzle, twd, yoccoz
from .errors import TwdLabError
from .models import parse_end, parse_model


class UsageError(Exception):
    pass


def _emit(text: str, out):
    out.write(text if text.endswith("\n") else text + "\n")


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=False)


# -- metafib -----------------------------------------------------------------


def _rspec(text):
    try:
        return metafib.RSpec.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_metafib_gen(args, out):
    r = _rspec(args.r)
    seq = metafib.generate(r, args.k)
    _emit(metafib.to_json(seq) if args.format == "json" else metafib.to_csv(seq), out)


def cmd_metafib_infer(args, out):
    text = Path(args.file).read_text() if args.file else args.values
    if text is None:
        raise UsageError("give --values or --file")
    try:
        values = [int(x) for x in text.replace("\n", ",").split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"values must be integers: {exc}") from None
    r = metafib.infer_r(values)
    if args.format == "json":
        _emit(_dumps({"values": values, "r": list(r)}), out)
    else:
        _emit("k,r,n\n" + "".join(f"{k},{rk},{nk}\n" for k, (rk, nk) in enumerate(zip(r, values), 1)), out)


def cmd_metafib_bounds(args, out):
    r = _rspec(args.r)
    seq = metafib.generate(r, args.k)
    report = {"spec": str(r), "K": args.k}
    if args.lower is not None:
        report["lower"] = {"J": args.lower, "first_violation": metafib.check_lower_bound(
            seq, args.lower, require_cascade_bound=not args.skip_cascade_check)}
    if args.upper is not None:
        report["upper"] = {"M": args.upper, "first_violation": metafib.check_upper_bound(seq, r, args.upper)}
    report["doubling"] = {"first_violation": metafib.check_doubling(seq, r)}
    report["cascades"] = [[c.start, c.length] for c in metafib.cascades(seq)]
    if args.growth is not None:
        g = metafib.growth_report(seq, args.growth)
        report["growth"] = {"R": g.R, "gamma": g.gamma, "min": g.min_ratio, "max": g.max_ratio}
    _emit(_dumps(report), out)


def cmd_metafib_gamma(args, out):
    rows = []
    for r in range(args.r, (args.to or args.r) + 1):
        g = metafib.gamma(r, args.tol)
        rows.append({"r": g.r, "gamma": g.gamma, "tol": g.tol, "residual": g.residual})
    if args.format == "json":
        _emit(_dumps(rows if len(rows) > 1 else rows[0]), out)
    else:
        _emit("r,gamma\n" + "".join(f"{x['r']},{x['gamma']!r}\n" for x in rows), out)


# -- twd -----------------------------------------------------------------------


def _model(ref):
    try:
        return parse_model(ref)
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from None


def _end(ref, wrap=False):
    try:
        return parse_end(ref, wrap)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_twd_validate(args, out):
    model = _model(args.model)
    if args.format == "dot":
        _emit(twd.to_dot(model, args.lo if args.lo is not None else -1, args.depth, dynamics=True), out)
        return 0
    report = twd.validate(model, args.depth, args.lo)
    _emit(_dumps(report.to_json()), out)
    return 0 if report.ok else 1


def _chain_csv(chain):
    doc = chain.to_json()
    r = doc["r"] or [None] * len(doc["k"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "l", "n", "r"])
    for row in zip(doc["k"], doc["l"], doc["n"], r):
        w.writerow(["" if x is None else x for x in row])
    return buf.getvalue()


def cmd_twd_chain(args, out):
    model, end = _model(args.model), _end(args.end, args.wrap)
    chain = twd.minimal_return_chain(model, end, args.l0, args.k, args.n_max, args.k_lo)
    if args.format == "csv":
        _emit(_chain_csv(chain), out)
    elif args.format == "dot":
        _emit(twd.to_dot(model, chain.levels[0], chain.levels[-1], dynamics=False), out)
    else:
        _emit(_dumps(chain.to_json()), out)


def cmd_twd_period(args, out):
    model, end = _model(args.model), _end(args.end, args.wrap)
    N = twd.detect_period(model, end, args.l_probe, args.n_max)
    _emit(_dumps({"end": end.name, "period": N, "aperiodic_within_budget": N is None}), out)


# -- puzzle --------------------------------------------------------------------


def _puzzle(ref):
    """``<path>``, ``json:<path>``, ``yoccoz:<classes>:<depth>`` or ``model:<model>:<lo>:<hi>``."""
    try:
        if ref.startswith("yoccoz:"):
            classes, depth = ref[7:].rsplit(":", 1)
            return yoccoz.build(yoccoz.parse_classes(classes), int(depth))
        if ref.startswith("model:"):
            mref, lo, hi = ref[6:].rsplit(":", 2)
            return puzzle.puzzle_from_model(parse_model(mref), int(lo), int(hi))
        return puzzle.load_puzzle(ref[5:] if ref.startswith("json:") else ref)
    except (ValueError, OSError, KeyError) as exc:
        raise UsageError(f"cannot load puzzle {ref!r}: {exc}") from None


def cmd_puzzle_validate(args, out):
    report = puzzle.validate_markov(_puzzle(args.puzzle))
    _emit(_dumps(report.to_json()), out)
    return 0 if report.ok else 1


def _tree_output(pz, fmt, out):
    tree = puzzle.tree_of_puzzle(pz)
    if fmt == "dot":
        _emit(twd.to_dot(tree, pz.lo, pz.hi, dynamics=True, name="puzzle"), out)
    else:
        report = twd.validate(tree, pz.hi, pz.lo)
        doc = tree.to_json()
        doc["validation"] = report.to_json()
        _emit(_dumps(doc), out)


def cmd_puzzle_tree(args, out):
    _tree_output(_puzzle(args.puzzle), args.format, out)


def _nest_output(pz, end, args, out):
    nest = puzzle.return_nest(pz, end, args.l0, args.k, args.n_max, args.k_lo)
    doc = nest.to_json()
    try:
        doc["r"] = list(twd.verify_theorem(twd.ReturnChain(nest.k_lo, nest.levels, nest.times)).values())
    except TwdLabError:
        doc["r"] = None
    _emit(_dumps(doc), out)


def cmd_puzzle_nest(args, out):
    _nest_output(_puzzle(args.puzzle), _end(args.end, args.wrap), args, out)


# -- yoccoz --------------------------------------------------------------------


def cmd_yoccoz_build(args, out):
    pz = yoccoz.build(yoccoz.parse_classes(args.classes), args.depth, strict=args.strict)
    if args.dot:
        Path(args.dot).write_text(twd.to_dot(puzzle.tree_of_puzzle(pz), pz.lo, pz.hi, dynamics=True, name="yoccoz"))
    if args.format == "dot":
        _emit(twd.to_dot(puzzle.tree_of_puzzle(pz), pz.lo, pz.hi, dynamics=True, name="yoccoz"), out)
    else:
        doc = pz.to_json()
        doc["classes"] = {str(d): [[str(a) for a in c] for c in lv.classes] for d, lv in pz.levels.items() if d >= 1}
        doc["critical"] = pz.critical_ids()
        _emit(_dumps(doc), out)


def cmd_yoccoz_nest(args, out):
    pz = yoccoz.build(yoccoz.parse_classes(args.classes), args.depth, strict=args.strict)
    end = _end(args.end, args.wrap) if args.end else yoccoz.critical_end()
    _nest_output(pz, end, args, out)


# -- parser --------------------------------------------------------------------


def _chain_opts(p, k_default=8):
    p.add_argument("--k", type=int, default=k_default, help="last chain index K")
    p.add_argument("--l0", type=int, default=0, help="level of index 0")
    p.add_argument("--k-lo", type=int, default=0, help="first (non-positive) chain index")
    p.add_argument("--n-max", type=int, default=twd.DEFAULT_N_MAX, help="iterate budget per return")
    p.add_argument("--wrap", action="store_true", help="reduce end digits modulo the branching")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twdlab", description="Return times of trees with dynamics.")
    top = ap.add_subparsers(dest="group", required=True)

    g = top.add_parser("metafib", help="variable-r meta-Fibonacci sequences").add_subparsers(dest="cmd", required=True)
    p = g.add_parser("gen", help="generate n_1..n_K")
    p.add_argument("--r", required=True, help="r spec: pow2, identity, fib, linear, const:R, sharp:J, residue:M:RES:A:B, table:R1,...:TAIL")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_metafib_gen)
    p = g.add_parser("infer", help="recover r(k) from a sequence")
    p.add_argument("--values", help="comma separated n_1,n_2,...")
    p.add_argument("--file", help="file with the values")
    p.add_argument("--format", choices=["csv", "json"], default="json")
    p.set_defaults(func=cmd_metafib_infer)
    p = g.add_parser("bounds", help="check growth bounds on a generated sequence")
    p.add_argument("--r", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--lower", type=int, metavar="J")
    p.add_argument("--upper", type=int, metavar="M")
    p.add_argument("--growth", type=int, metavar="R")
    p.add_argument("--skip-cascade-check", action="store_true")
    p.set_defaults(func=cmd_metafib_bounds)
    p = g.add_parser("gamma", help="growth constant of constant-r sequences")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--to", type=int, help="tabulate r..TO")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--format", choices=["csv", "json"], default="json")
    p.set_defaults(func=cmd_metafib_gamma)

    g = top.add_parser("twd", help="trees with dynamics").add_subparsers(dest="cmd", required=True)
    p = g.add_parser("validate", help="check the axioms on a truncation")
    p.add_argument("--model", required=True, help="binary, z2:F:<H>, z2:G:<H>, json:<path>")
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--lo", type=int)
    p.add_argument("--format", choices=["json", "dot"], default="json")
    p.set_defaults(func=cmd_twd_validate)
    p = g.add_parser("chain", help="minimal return chain of an end")
    p.add_argument("--model", required=True)
    p.add_argument("--end", required=True, help="fib, tm, periodic:<word>, word:<bits>[:<period>]")
    _chain_opts(p)
    p.add_argument("--format", choices=["json", "csv", "dot"], default="json")
    p.set_defaults(func=cmd_twd_chain)
    p = g.add_parser("period", help="minimum period of an end")
    p.add_argument("--model", required=True)
    p.add_argument("--end", required=True)
    p.add_argument("--l-probe", type=int, default=0)
    p.add_argument("--n-max", type=int, default=twd.DEFAULT_N_MAX)
    p.add_argument("--wrap", action="store_true")
    p.set_defaults(func=cmd_twd_period)

    g = top.add_parser("puzzle", help="combinatorial puzzles").add_subparsers(dest="cmd", required=True)
    ref_help = "<path>, json:<path>, yoccoz:<classes>:<depth> or model:<model>:<lo>:<hi>"
    p = g.add_parser("validate", help="check the Markov properties")
    p.add_argument("--puzzle", required=True, help=ref_help)
    p.set_defaults(func=cmd_puzzle_validate)
    p = g.add_parser("tree", help="tree with dynamics of a puzzle")
    p.add_argument("--puzzle", required=True, help=ref_help)
    p.add_argument("--format", choices=["json", "dot"], default="json")
    p.set_defaults(func=cmd_puzzle_tree)
    p = g.add_parser("nest", help="minimal return nest")
    p.add_argument("--puzzle", required=True, help=ref_help)
    p.add_argument("--end", required=True, help="child-index address of the nest")
    _chain_opts(p)
    p.set_defaults(func=cmd_puzzle_nest)

    g = top.add_parser("yoccoz", help="Yoccoz puzzles of quadratics").add_subparsers(dest="cmd", required=True)
    p = g.add_parser("build", help="build the puzzle from an alpha cycle")
    p.add_argument("--classes", required=True, help='e.g. "1/3,2/3"; ";" separates classes')
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--dot", help="also write the derived tree as DOT to this file")
    p.add_argument("--format", choices=["json", "dot"], default="json")
    p.add_argument("--strict", action="store_true", help="fail on ambiguous pullbacks")
    p.set_defaults(func=cmd_yoccoz_build)
    p = g.add_parser("nest", help="return nest of the critical (or given) nest")
    p.add_argument("--classes", required=True)
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--end", help="nest address; default is the critical nest")
    p.add_argument("--strict", action="store_true")
    _chain_opts(p, k_default=3)
    p.set_defaults(func=cmd_yoccoz_nest)
    return ap


def run(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        code = args.func(args, out)
    except (UsageError, ValueError) as exc:
        err.write(_dumps({"error": "UsageError", "message": str(exc)}) + "\n")
        return 2
    except TwdLabError as exc:
        err.write(_dumps(exc.to_json()) + "\n")
        return 1
    return code or 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
