"""Path-sensitive symbolic execution with a small built-in solver."""

from .engine import Limits, PathResult, SPtr, SymOutcome, sym_execute
from .replay import CONFIRMED, NOT_CONFIRMED, ReplayResult, replay
from .solver import SAT, UNKNOWN, UNSAT, SolverResult, check_model, solve

__all__ = [
    "Limits", "PathResult", "SPtr", "SymOutcome", "sym_execute",
    "ReplayResult", "replay", "CONFIRMED", "NOT_CONFIRMED",
    "SolverResult", "solve", "check_model", "SAT", "UNSAT", "UNKNOWN",
]
