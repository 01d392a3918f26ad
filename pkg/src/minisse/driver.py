"""End-to-end pipeline: compile, instrument, slice, execute, confirm.

Two modes.  ``find`` instruments every target, bounds loops and reports
only replay-confirmed errors.  ``classify`` takes one candidate report
(for instance from :mod:`minisse.metal`), instruments only its target,
explores the slice without a loop bound and answers BUG, FP, TO or ME.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import MiniSSEError, NoTargets, PipelineError, ReportMismatch
from .frontend.cfg import LocationId, ProgramCFG, build_cfg
from .frontend.inputs import DEFAULT_PTR_ELEMS
from .frontend.parser import parse
from .instrument import InstrumentedProgram, instrument, resolve_targets
from .machines import MachineSpec, match_sites, parse_machine
from .metal import CandidateReport
from .pointsto import PointsToMap, andersen
from .slicer import SlicedProgram, criteria_from_instrumentation, slice_program
from .symexec import Limits, PathResult, SymOutcome, replay, sym_execute
from .symexec.solver import DEFAULT_BUDGET

DEFAULT_TIMEOUT = 300.0
DEFAULT_LOOP_BOUND = 2
FP_CAVEAT = "slicing ignores nonterminating originals"
MEMORY_FAULTS = ("null-deref", "out-of-bounds")

BUG, FP, TO, ME = "BUG", "FP", "TO", "ME"
CLEAN = "CLEAN-WITHIN-BOUNDS"

EXIT_OK, EXIT_BUG, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2, 3


@dataclass(frozen=True)
class RunConfig:
    source: str
    machine: str
    entry: str
    mode: str = "find"
    loop_bound: Optional[int] = DEFAULT_LOOP_BOUND
    solver_budget: int = DEFAULT_BUDGET
    path_budget: int = 100_000
    step_budget: int = 100_000
    wall_timeout: float = DEFAULT_TIMEOUT
    ptr_elems: int = DEFAULT_PTR_ELEMS
    int_width: int = 32
    null_params: bool = False
    output: str = "text"
    report: Optional[str] = None
    targets: Optional[Tuple[str, ...]] = None
    dump_tree: bool = False

    def __post_init__(self):
        if self.mode not in ("find", "classify", "metal", "slice"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.int_width not in (8, 16, 32):
            raise ValueError("int_width must be 8, 16 or 32")
        if self.output not in ("json", "text"):
            raise ValueError("output must be 'json' or 'text'")
        for name in ("solver_budget", "path_budget", "step_budget", "ptr_elems"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.wall_timeout <= 0:
            raise ValueError("wall_timeout must be positive")
        if self.loop_bound is not None and self.loop_bound < 0:
            raise ValueError("loop_bound must be >= 0")


@dataclass
class Verdict:
    machine: str
    target: Optional[str]
    error_state: Optional[str]
    verdict: str
    model: Optional[Dict[str, int]] = None
    trace: Optional[List[str]] = None
    line: Optional[int] = None
    to_reason: Optional[str] = None  # wall | budget | tainted
    fp_caveat: Optional[str] = None
    memory_error: Optional[dict] = None
    timings: Dict[str, float] = field(default_factory=dict)
    slice_ratio: Optional[float] = None

    def to_json(self) -> dict:
        d = {"machine": self.machine, "target": self.target,
             "error_state": self.error_state, "verdict": self.verdict}
        for key in ("model", "line", "trace", "to_reason", "fp_caveat", "memory_error"):
            v = getattr(self, key)
            if v is not None:
                d[key] = v
        d["timings"] = {k: round(v, 6) for k, v in self.timings.items()}
        d["slice_ratio"] = None if self.slice_ratio is None else round(self.slice_ratio, 4)
        return d


@dataclass
class Pipeline:
    """Everything one run builds, kept for inspection and tests."""
    cfg: ProgramCFG
    spec: MachineSpec
    pts: PointsToMap
    sites: list
    ip: Optional[InstrumentedProgram] = None
    sp: Optional[SlicedProgram] = None
    outcome: Optional[SymOutcome] = None
    timings: Dict[str, float] = field(default_factory=dict)


class _Phase:
    """Times a phase and tags any failure with its name."""

    def __init__(self, timings, name):
        self.timings = timings
        self.name = name

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.timings[self.name] = self.timings.get(self.name, 0.0) + time.perf_counter() - self.t0
        if exc is not None and not isinstance(exc, (PipelineError, NoTargets, ReportMismatch)):
            if isinstance(exc, (MiniSSEError, ValueError, KeyError, OSError)):
                raise PipelineError(self.name, exc) from exc
        return False


def compile_inputs(config: RunConfig, timings=None) -> Pipeline:
    timings = {} if timings is None else timings
    with _Phase(timings, "compile"):
        source = Path(config.source).read_text()
        cfg = build_cfg(parse(source, filename=str(config.source)))
        spec = parse_machine(Path(config.machine).read_text(), filename=str(config.machine))
        if config.entry not in cfg.functions:
            raise KeyError(f"entry function '{config.entry}' is not defined")
        pts = andersen(cfg, config.entry, ptr_elems=config.ptr_elems,
                       null_params=config.null_params)
        sites = match_sites(cfg, spec, config.entry)
    return Pipeline(cfg, spec, pts, sites, timings=timings)


def build(config: RunConfig, targets=None) -> Pipeline:
    """Compile, instrument and slice; ``targets=None`` keeps every target."""
    pl = compile_inputs(config)
    with _Phase(pl.timings, "instrument"):
        pl.ip = instrument(pl.cfg, pl.spec, pl.sites, pl.pts, targets)
    with _Phase(pl.timings, "slice"):
        pl.sp = slice_program(pl.ip, criteria_from_instrumentation(pl.ip), pl.pts)
    return pl


def _trace_lines(cfg: ProgramCFG, trace: Sequence[LocationId]) -> List[str]:
    out = []
    for loc in trace:
        node = cfg.node(loc)
        if node.kind in ("entry", "exit"):
            continue
        item = f"{loc.func}:{node.line}"
        if not out or out[-1] != item:
            out.append(item)
    return out


class _Confirmer:
    """Replays symbolic findings on the unsliced instrumented program."""

    def __init__(self, config: RunConfig, pl: Pipeline):
        self.config = config
        self.pl = pl

    def _replay(self, model, **kw):
        c = self.config
        return replay(self.pl.ip, c.entry, model, step_budget=c.step_budget,
                      int_width=c.int_width, ptr_elems=c.ptr_elems,
                      null_params=c.null_params, **kw)

    def bug(self, path: PathResult):
        """Replay run if the bug is confirmed, else None."""
        r = self._replay(path.model, bug=(path.detail[1], path.detail[2]))
        return r.run if r.confirmed else None

    def memory(self, path: PathResult):
        """Replay run if the original faults in memory, else None."""
        r = self._replay(path.model, memory=path.detail[0])
        run = r.run
        if run.outcome == "fault" and run.fault.kind in MEMORY_FAULTS:
            return run
        return None


def _limits(config: RunConfig, loop_bound):
    return Limits(loop_bound=loop_bound, solver_budget=config.solver_budget,
                  path_budget=config.path_budget, step_budget=config.step_budget,
                  wall_timeout=config.wall_timeout)


def _run_symexec(config, pl, loop_bound, until=None):
    with _Phase(pl.timings, "symexec"):
        pl.outcome = sym_execute(pl.sp, config.entry, _limits(config, loop_bound),
                                 int_width=config.int_width, ptr_elems=config.ptr_elems,
                                 null_params=config.null_params, until=until,
                                 dump_tree=config.dump_tree)
    return pl.outcome


def _memory_detail(cfg, run):
    f = run.fault
    d = {"kind": f.kind, "location": str(f.loc), "line": cfg.node(f.loc).line}
    if f.detail:
        d["object"] = f.detail[0]
    return d


def run_find(config: RunConfig) -> List[Verdict]:
    """All replay-confirmed errors within the loop bound.

    An empty list means CLEAN-WITHIN-BOUNDS; find mode never claims FP.
    """
    return find_with_pipeline(config)[0]


def find_with_pipeline(config: RunConfig):
    """:func:`run_find` plus the Pipeline it built (None if vacuous)."""
    start = time.perf_counter()
    try:
        pl = build(config, config.targets)
    except NoTargets as e:
        warnings.warn(f"vacuous analysis: {e}", stacklevel=3)
        return [], None
    confirm = _Confirmer(config, pl)
    found: Dict[tuple, Verdict] = {}
    tainted = set()

    def until(path: PathResult):
        key = None
        if path.kind == "bug":
            key = (path.detail[1], path.detail[2])
            if key in found:
                return False
            if path.model is None:
                tainted.add(key)
                return False
            run = confirm.bug(path)
            if run is None:
                return False
            line = pl.ip.cfg.node(run.fault.loc).line
            found[key] = Verdict(pl.spec.name, key[0], key[1], BUG, model=path.model,
                                 trace=_trace_lines(pl.ip.cfg, run.trace), line=line)
        elif path.kind == "memory_error" and path.model is not None:
            run = confirm.memory(path)
            if run is None:
                return False
            md = _memory_detail(pl.ip.cfg, run)
            key = ("$memory", md["kind"], md["location"])
            if key not in found:
                found[key] = Verdict(pl.spec.name, None, None, ME, model=path.model,
                                     line=md["line"], memory_error=md,
                                     trace=_trace_lines(pl.ip.cfg, run.trace))
        return False

    out = _run_symexec(config, pl, config.loop_bound, until)
    verdicts = list(found.values())
    for key in sorted(tainted - set(found)):
        verdicts.append(Verdict(pl.spec.name, key[0], key[1], TO, to_reason="tainted"))
    if out.wall_timeout:
        verdicts.append(Verdict(pl.spec.name, None, None, TO, to_reason="wall"))
    elif out.path_budget_hit or any(p.reason != "loop_bound" for p in out.budget_stopped):
        verdicts.append(Verdict(pl.spec.name, None, None, TO, to_reason="budget"))
    pl.timings["total"] = time.perf_counter() - start
    for v in verdicts:
        v.timings = dict(pl.timings)
        v.slice_ratio = pl.sp.slice_ratio
    return verdicts, pl


def check_report(pl: Pipeline, report: CandidateReport, entry: str):
    spec = pl.spec
    if report.machine != spec.name:
        raise ReportMismatch(f"report is for machine '{report.machine}', spec is '{spec.name}'")
    if report.error_state not in spec.error_states:
        raise ReportMismatch(f"'{report.error_state}' is not an error state of {spec.name}")
    _, all_targets, _, _ = resolve_targets(pl.sites, pl.pts)
    if report.target not in all_targets:
        raise ReportMismatch(f"target '{report.target}' is not manipulated by any match "
                             f"site reachable from '{entry}'")


def run_classify(config: RunConfig, report: CandidateReport) -> Verdict:
    """BUG, FP, TO or ME for one candidate report."""
    return classify_with_pipeline(config, report)[0]


def classify_with_pipeline(config: RunConfig, report: CandidateReport):
    start = time.perf_counter()
    pl = compile_inputs(config)
    check_report(pl, report, config.entry)
    with _Phase(pl.timings, "instrument"):
        pl.ip = instrument(pl.cfg, pl.spec, pl.sites, pl.pts, [report.target])
    with _Phase(pl.timings, "slice"):
        pl.sp = slice_program(pl.ip, criteria_from_instrumentation(pl.ip), pl.pts)
    confirm = _Confirmer(config, pl)
    want = (report.target, report.error_state)
    state = {"verdict": None, "unconfirmed": False, "tainted": False}

    def until(path: PathResult):
        if path.kind == "bug" and (path.detail[1], path.detail[2]) == want:
            if path.model is None:
                state["tainted"] = True
                return False
            run = confirm.bug(path)
            if run is None:
                state["unconfirmed"] = True
                return False
            state["verdict"] = Verdict(
                pl.spec.name, *want, BUG, model=path.model,
                trace=_trace_lines(pl.ip.cfg, run.trace),
                line=pl.ip.cfg.node(run.fault.loc).line)
            return True
        if path.kind == "memory_error":
            if path.model is None:
                state["tainted"] = True
                return False
            run = confirm.memory(path)
            if run is None:
                state["unconfirmed"] = True
                return False
            md = _memory_detail(pl.ip.cfg, run)
            state["verdict"] = Verdict(pl.spec.name, *want, ME, model=path.model,
                                       line=md["line"], memory_error=md)
            return True
        return False

    out = _run_symexec(config, pl, None, until)
    v = state["verdict"]
    if v is None:
        if out.exhaustive and not state["unconfirmed"] and not state["tainted"]:
            v = Verdict(pl.spec.name, *want, FP, fp_caveat=FP_CAVEAT)
        else:
            if out.wall_timeout:
                reason = "wall"
            elif out.tainted or state["tainted"]:
                reason = "tainted"
            else:
                reason = "budget"
            v = Verdict(pl.spec.name, *want, TO, to_reason=reason)
    pl.timings["total"] = time.perf_counter() - start
    v.timings = dict(pl.timings)
    v.slice_ratio = pl.sp.slice_ratio
    return v, pl


def load_reports(path) -> List[CandidateReport]:
    """A JSON object, a JSON array, or JSON lines of candidate reports."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = [json.loads(line) for line in text.splitlines() if line.strip()]
    if isinstance(data, dict):
        data = [data]
    try:
        return [CandidateReport.from_json(d) for d in data]
    except (KeyError, TypeError, ValueError) as e:
        raise ReportMismatch(f"malformed report file {path}: {e}") from e


def summary(verdicts: Sequence[Verdict]) -> str:
    kinds = {v.verdict for v in verdicts}
    for k in (BUG, ME, TO):
        if k in kinds:
            return k
    if FP in kinds:
        return FP
    return CLEAN


def exit_code(verdicts: Sequence[Verdict]) -> int:
    kinds = {v.verdict for v in verdicts}
    if BUG in kinds:
        return EXIT_BUG
    if kinds & {TO, ME}:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def _detail(v: Verdict) -> str:
    if v.model is not None:
        return " ".join(f"{k}={val}" for k, val in sorted(v.model.items())) or "(any input)"
    if v.to_reason:
        return f"to_reason={v.to_reason}"
    if v.fp_caveat:
        return "caveat: " + v.fp_caveat
    return ""


def emit(verdicts: Sequence[Verdict], output="text") -> str:
    """JSON lines, or an aligned text table."""
    if output == "json":
        return "".join(json.dumps(v.to_json()) + "\n" for v in verdicts)
    if not verdicts:
        return f"result: {CLEAN}\n"
    header = ("machine", "target", "error", "result", "line", "sliced(%)", "time(s)", "detail")
    rows = [header]
    for v in verdicts:
        ratio = "" if v.slice_ratio is None else f"{100 * v.slice_ratio:.1f}"
        rows.append((v.machine, v.target or "-", v.error_state or "-", v.verdict,
                     "" if v.line is None else str(v.line), ratio,
                     f"{v.timings.get('total', 0.0):.3f}", _detail(v)))
    widths = [max(len(r[i]) for r in rows) for i in range(len(header) - 1)]
    lines = []
    for r in rows:
        cells = [c.ljust(w) for c, w in zip(r, widths)] + [r[-1]]
        lines.append("  ".join(cells).rstrip())
    lines.append(f"result: {summary(verdicts)}")
    return "\n".join(lines) + "\n"
