"""Command-line interface: compile, stats, run, check and bench."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench as benchmod
from .asmgen import lower
from .errors import BarrierLPError, SourceError, TimeBoundError
from .frontend import compile_source, parse_params
from .intervals import format_etis
from .lpgen import build, resolve_tb, stats_json, uo_stats, write_lp, write_mps
from .oracle import check_feasible, make_witness, parse_bits, run
from .sbtree import build_sbtree, format_tree, to_json

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    if path.startswith("builtin:"):
        return benchmod.benchmark_source(path.split(":", 1)[1])
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from e


def _params(args) -> dict[str, int]:
    params = parse_params(_read(args.params)) if args.params else {}
    for item in args.param or []:
        name, sep, value = item.partition("=")
        if not sep or not value.strip().isdigit():
            raise UsageError(f"--param expects name=value, got {item!r}")
        params[name.strip()] = int(value)
    return params


def _pipeline(args):
    program = compile_source(_read(args.source), _params(args))
    asm = lower(program)
    tree = build_sbtree(asm)
    return asm, tree


def _bits(text: str | None, count: int, flag: str) -> list[int] | None:
    if text is None:
        return None
    try:
        bits = parse_bits(text)
    except ValueError as e:
        raise UsageError(f"{flag}: {e}") from e
    if len(bits) != count:
        raise UsageError(f"{flag} needs {count} bits, got {len(bits)}")
    return bits


def _debug(args, asm, tree) -> None:
    if getattr(args, "emit_asm", False):
        sys.stderr.write(asm.listing())
    if getattr(args, "emit_sbtree", None):
        sys.stderr.write(to_json(tree) + "\n" if args.emit_sbtree == "json" else format_tree(tree))
    if getattr(args, "emit_etis", None):
        try:
            node = tree.find(args.emit_etis)
        except KeyError:
            raise UsageError(f"no block named {args.emit_etis!r}") from None
        sys.stderr.write(format_etis(node))


def cmd_compile(args) -> int:
    asm, tree = _pipeline(args)
    if args.tb is not None and args.mode != "uo":
        raise UsageError("--tb applies to --mode uo only")
    if args.fix_inputs and args.inputs:
        raise UsageError("use either --fix-inputs or --inputs, not both")
    p = len(asm.inputs)
    fixed = _bits(args.fix_inputs, p, "--fix-inputs")
    free = _bits(args.inputs, p, "--inputs")
    _debug(args, asm, tree)
    model = build(asm, tree, args.mode, tb_override=args.tb, inputs=fixed or free, fixed=fixed is not None)
    out = args.output or f"{Path(args.source.split(':')[-1]).stem}.{args.mode}.{args.format}"
    with open(out, "wb") as fh:
        (write_lp if args.format == "lp" else write_mps)(model, fh)
    print(stats_json(model.stats()))
    return EXIT_OK


def cmd_stats(args) -> int:
    asm, tree = _pipeline(args)
    if args.tb is not None and args.mode != "uo":
        raise UsageError("--tb applies to --mode uo only")
    if args.mode == "uo":
        s = uo_stats(asm, tree, args.tb)
    else:
        s = build(asm, tree, "hsb").stats()
    print(stats_json(s))
    return EXIT_OK


def cmd_run(args) -> int:
    asm, tree = _pipeline(args)
    bits = _bits(args.inputs, len(asm.inputs), "--inputs")
    tb = resolve_tb(tree, "uo", args.tb) if args.semantics == "plain" else tree.tb
    trace = run(asm, tree, bits, args.semantics, tb=tb)
    _debug(args, asm, tree)
    result = {
        "semantics": args.semantics,
        "steps": trace.tb,
        "halt_step": trace.halt_step,
        "idle_steps": trace.steps_at("IDLE"),
        "outputs": {d.name: trace.value(d.name) for d in asm.source.decls if d.kind == "output"},
        "output_bits": "".join(map(str, trace.outputs)),
    }
    if args.trace:
        for t, label in enumerate(trace.lines.tolist(), start=1):
            sys.stderr.write(f"{t} l{label}\n")
    print(json.dumps(result))
    return EXIT_OK


def cmd_check(args) -> int:
    asm, tree = _pipeline(args)
    bits = _bits(args.inputs, len(asm.inputs), "--inputs")
    _debug(args, asm, tree)
    model = build(asm, tree, args.mode, inputs=bits, fixed=args.fixed)
    semantics = "plain" if args.mode == "uo" else "barrier"
    trace = run(asm, tree, bits, semantics, tb=model.tb)
    witness = make_witness(trace, model)
    for index in args.mutate or []:
        if not 0 <= index < model.ncols:
            raise UsageError(f"--mutate index {index} outside 0..{model.ncols - 1}")
        witness = witness.mutate(index)
    report = check_feasible(model, witness)
    print(report.to_json() if args.json else report.text(), end="\n" if args.json else "")
    return EXIT_OK if report.feasible else EXIT_FAIL


def _sizes(text: str) -> list[int]:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad size list {text!r}") from None
    if not out:
        raise UsageError("empty size list")
    return out


def cmd_bench(args) -> int:
    suites = [s.strip() for s in args.suite.split(",") if s.strip()]
    for s in suites:
        if s not in benchmod.BENCHMARKS:
            raise UsageError(f"unknown benchmark {s!r}")
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    if set(modes) - {"uo", "hsb"} or not modes:
        raise UsageError("--modes takes uo and/or hsb")
    sizes = {"makespan": _sizes(args.makespan_sizes), "mst": _sizes(args.mst_sizes)}
    records = benchmod.run_bench(
        suites, sizes, modes, seed=args.seed, width=args.width, jobs=args.jobs,
        solve_with=args.solve_with, timing=not args.no_timing,
    )
    csv_text = benchmod.to_csv(records, args.seed)
    md_text = benchmod.to_markdown(records, args.seed)
    if args.csv:
        Path(args.csv).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    if args.markdown:
        Path(args.markdown).write_text(md_text)
    else:
        sys.stdout.write("\n" + md_text)
    return EXIT_OK


def _add_program_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("source", help="program source file, or builtin:makespan / builtin:mst")
    p.add_argument("params", nargs="?", help="parameter file (name = value lines)")
    p.add_argument("--param", action="append", metavar="NAME=VALUE", help="set or override a parameter")


def _add_debug_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--emit-asm", action="store_true", help="print the Asm listing to stderr")
    p.add_argument("--emit-sbtree", nargs="?", const="text", choices=["text", "json"],
                   help="print the annotated SB-tree to stderr")
    p.add_argument("--emit-etis", metavar="BLOCK", help="print the intervals of one block to stderr")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="barrierlp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="write the LP (or MPS) file and print size statistics")
    _add_program_args(p)
    p.add_argument("--mode", choices=["uo", "hsb"], default="hsb")
    p.add_argument("--format", choices=["lp", "mps"], default="lp")
    p.add_argument("-o", "--output", help="output file (default <source>.<mode>.<format>)")
    p.add_argument("--tb", type=int, help="custom global time bound (uo only)")
    p.add_argument("--fix-inputs", metavar="BITS", help="pin the inputs to these bits")
    p.add_argument("--inputs", metavar="BITS", help="encode these input bits in the objective")
    _add_debug_args(p)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("stats", help="print LP size statistics without writing a file")
    _add_program_args(p)
    p.add_argument("--mode", choices=["uo", "hsb"], default="hsb")
    p.add_argument("--tb", type=int)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("run", help="interpret the program on one input")
    _add_program_args(p)
    p.add_argument("--inputs", required=True, metavar="BITS")
    p.add_argument("--semantics", choices=["plain", "barrier"], default="plain")
    p.add_argument("--tb", type=int, help="step count for plain runs")
    p.add_argument("--trace", action="store_true", help="print the (step, line) trace to stderr")
    _add_debug_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", help="verify the execution witness against the LP")
    _add_program_args(p)
    p.add_argument("--mode", choices=["uo", "hsb"], default="hsb")
    p.add_argument("--inputs", required=True, metavar="BITS")
    p.add_argument("--fixed", action="store_true", help="pin the inputs instead of using the objective")
    p.add_argument("--json", action="store_true")
    p.add_argument("--mutate", type=int, action="append", metavar="INDEX",
                   help="flip one witness entry before checking (negative test)")
    _add_debug_args(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("bench", help="compare encodings on the built-in benchmarks")
    p.add_argument("--suite", default="makespan,mst")
    p.add_argument("--makespan-sizes", default="5,10,20")
    p.add_argument("--mst-sizes", default="3,4")
    p.add_argument("--modes", default="uo,hsb")
    p.add_argument("--width", type=int, default=2, help="weight bit width")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--csv", help="write the CSV table here instead of stdout")
    p.add_argument("--markdown", help="write the markdown table here instead of stdout")
    p.add_argument("--solve-with", metavar="COMMAND",
                   help="solver command; {lp} is replaced by the LP path, output must mention the objective")
    p.add_argument("--no-timing", action="store_true", help="leave the ms column blank")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, SourceError, TimeBoundError, ValueError) as e:
        print(f"barrierlp: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except BarrierLPError as e:
        print(f"barrierlp: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
