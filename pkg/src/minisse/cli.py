"""Command line entry point: ``minisse <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import driver
from .driver import RunConfig
from .errors import MiniSSEError
from .frontend.cfg import build_cfg
from .frontend.parser import parse
from .instrument import instrument
from .machines import match_sites, parse_machine
from .metal import metal_fixpoint, metal_reports
from .pointsto import andersen
from .printer import format_program
from .slicer import criteria_from_instrumentation, slice_program


def _positive(kind):
    def conv(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return conv


def _non_negative(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="minisse",
        description="Typestate checking of MiniC programs: metal-style dataflow, "
                    "slicing and symbolic execution.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, entry=True, machine=True):
        sp.add_argument("--source", required=True, metavar="F", help="MiniC source file")
        if machine:
            sp.add_argument("--machine", required=True, metavar="M",
                            help="state machine spec (.sm)")
        if entry:
            sp.add_argument("--entry", required=True, metavar="FN", help="starting function")

    def knobs(sp):
        sp.add_argument("--int-width", type=int, choices=(8, 16, 32), default=32)
        sp.add_argument("--ptr-elems", type=_positive(int), default=16, metavar="K",
                        help="cells in each synthesized pointer region (default 16)")
        sp.add_argument("--solver-budget", type=_positive(int),
                        default=driver.DEFAULT_BUDGET, metavar="U",
                        help="deterministic solver work units per query")
        sp.add_argument("--timeout", type=_positive(float), default=driver.DEFAULT_TIMEOUT,
                        metavar="S", help="wall-clock limit for symbolic execution (seconds)")
        sp.add_argument("--format", choices=("json", "text"), default="text")
        sp.add_argument("--dump-tree", metavar="FILE",
                        help="write the symbolic execution tree as DOT")

    f = sub.add_parser("find", help="report replay-confirmed errors within a loop bound")
    common(f)
    f.add_argument("--loop-bound", type=_non_negative, default=driver.DEFAULT_LOOP_BOUND,
                   metavar="N", help="loop body entries per loop and path (default 2)")
    knobs(f)

    c = sub.add_parser("classify", help="classify candidate reports as BUG/FP/TO/ME")
    common(c)
    c.add_argument("--report", required=True, metavar="R.json",
                   help="JSON object, array or JSON lines with machine/target/error_state")
    knobs(c)

    m = sub.add_parser("metal", help="per-line state sets and candidate reports")
    common(m)

    s = sub.add_parser("slice", help="print the sliced instrumented program")
    common(s)
    s.add_argument("--target", action="append", metavar="NAME")

    pt = sub.add_parser("pointsto", help="dump the points-to map")
    common(pt, entry=False, machine=False)

    i = sub.add_parser("instrument", help="print the instrumented program")
    common(i, entry=False)
    i.add_argument("--target", action="append", metavar="NAME")
    return p


def _load(args, entry):
    cfg = build_cfg(parse(Path(args.source).read_text(), filename=args.source))
    spec = None
    if getattr(args, "machine", None):
        spec = parse_machine(Path(args.machine).read_text(), filename=args.machine)
    if entry is not None and entry not in cfg.functions:
        raise MiniSSEError(f"entry function '{entry}' is not defined")
    return cfg, spec


def cmd_pointsto(args, out):
    cfg, _ = _load(args, None)
    text = andersen(cfg).dump()
    out.write(text + "\n" if text else "")
    return 0


def cmd_instrument(args, out):
    cfg, spec = _load(args, None)
    pts = andersen(cfg)
    ip = instrument(cfg, spec, match_sites(cfg, spec), pts, args.target)
    out.write(format_program(ip.cfg))
    return 0


def cmd_slice(args, out):
    cfg, spec = _load(args, args.entry)
    pts = andersen(cfg, args.entry)
    ip = instrument(cfg, spec, match_sites(cfg, spec, args.entry), pts, args.target)
    sp = slice_program(ip, criteria_from_instrumentation(ip), pts)
    out.write(format_program(sp.cfg, cleanup=True))
    out.write(f"\n// slice ratio: {100 * sp.slice_ratio:.1f}% "
              f"({sp.removed} of {sp.total} statements removed)\n")
    return 0


def cmd_metal(args, out):
    cfg, spec = _load(args, args.entry)
    pts = andersen(cfg, args.entry)
    sites = match_sites(cfg, spec, args.entry)
    ssm = metal_fixpoint(cfg, spec, sites, pts, entry=args.entry)
    funcs = [f for f in cfg.topological_functions()
             if f in set(cfg.reachable_functions(args.entry))]
    for t in ssm.targets:
        out.write(f"// target {t}\n")
        for name in funcs:
            out.write(ssm.annotate(name, t) + "\n")
        out.write("\n")
    for r in metal_reports(ssm, spec):
        out.write(json.dumps(r.to_json()) + "\n")
    return 0


def _config(args, mode, loop_bound=None):
    return RunConfig(args.source, args.machine, args.entry, mode=mode,
                     loop_bound=loop_bound, solver_budget=args.solver_budget,
                     wall_timeout=args.timeout, ptr_elems=args.ptr_elems,
                     int_width=args.int_width, output=args.format,
                     report=getattr(args, "report", None),
                     dump_tree=args.dump_tree is not None)


def _dump_tree(args, pl):
    if args.dump_tree and pl is not None and pl.outcome is not None:
        Path(args.dump_tree).write_text(pl.outcome.tree or "")


def cmd_find(args, out):
    config = _config(args, "find", args.loop_bound)
    verdicts, pl = driver.find_with_pipeline(config)
    _dump_tree(args, pl)
    out.write(driver.emit(verdicts, args.format))
    return driver.exit_code(verdicts)


def cmd_classify(args, out):
    config = _config(args, "classify")
    verdicts = []
    for report in driver.load_reports(args.report):
        v, pl = driver.classify_with_pipeline(config, report)
        _dump_tree(args, pl)
        verdicts.append(v)
    out.write(driver.emit(verdicts, args.format))
    return driver.exit_code(verdicts)


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"minisse: warning: {message}", file=sys.stderr)


COMMANDS = {
    "find": cmd_find, "classify": cmd_classify, "metal": cmd_metal,
    "slice": cmd_slice, "pointsto": cmd_pointsto, "instrument": cmd_instrument,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        warnings.showwarning = _show_warning
        try:
            return COMMANDS[args.command](args, out)
        except MiniSSEError as e:
            print(f"minisse: error: {e}", file=sys.stderr)
            return driver.EXIT_ERROR
        except (OSError, ValueError) as e:
            print(f"minisse: error: {e}", file=sys.stderr)
            return driver.EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
