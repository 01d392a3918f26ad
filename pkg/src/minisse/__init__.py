"""minisse: typestate bug finding for MiniC.

Metal-style state-machine dataflow produces candidate reports; the
instrumented program is sliced with respect to the error checks and the
slice is explored symbolically, so that only replay-confirmed errors are
reported and unreachable ones can be classified as false positives.
"""

from .driver import RunConfig, Verdict, emit, run_classify, run_find
from .errors import (
    EmptyTargetSet, MiniSSEError, NoTargets, PipelineError, ReportMismatch,
)
from .frontend.cfg import LocationId, ProgramCFG, build_cfg
from .frontend.interp import interpret
from .frontend.parser import parse, parse_file
from .instrument import InstrumentedProgram, instrument
from .machines import MachineSpec, load_machine, match_sites, parse_machine
from .metal import CandidateReport, StateSetMap, metal_fixpoint, metal_reports
from .pointsto import PointsToMap, andersen
from .slicer import SlicedProgram, SlicingCriterion, criteria_from_instrumentation, slice_program
from .symexec import Limits, SymOutcome, replay, solve, sym_execute

__version__ = "0.1.0"

__all__ = [
    "RunConfig", "Verdict", "emit", "run_classify", "run_find",
    "EmptyTargetSet", "MiniSSEError", "NoTargets", "PipelineError", "ReportMismatch",
    "LocationId", "ProgramCFG", "build_cfg", "interpret", "parse", "parse_file",
    "InstrumentedProgram", "instrument", "MachineSpec", "load_machine", "match_sites",
    "parse_machine", "CandidateReport", "StateSetMap", "metal_fixpoint", "metal_reports",
    "PointsToMap", "andersen", "SlicedProgram", "SlicingCriterion",
    "criteria_from_instrumentation", "slice_program", "Limits", "SymOutcome", "replay",
    "solve", "sym_execute",
]
