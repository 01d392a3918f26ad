"""Concrete confirmation of symbolic findings on the unsliced program."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from ..frontend.inputs import DEFAULT_PTR_ELEMS
from ..frontend.interp import RunResult, interpret

CONFIRMED = "confirmed"
NOT_CONFIRMED = "not_confirmed"


@dataclass
class ReplayResult:
    status: str
    run: RunResult
    reason: str = ""

    @property
    def confirmed(self):
        return self.status == CONFIRMED


def replay(program, entry: str, model: Dict[str, int], *,
           bug: Optional[Tuple[str, str]] = None, memory: Optional[str] = None,
           step_budget=100_000, int_width=32, ptr_elems=DEFAULT_PTR_ELEMS,
           null_params=False) -> ReplayResult:
    """Run ``program`` on ``model`` and check it fails the way it should.

    Pass ``bug=(target, error_state)`` for a state-machine error or
    ``memory=kind`` for a memory error.  ``program`` is normally the full
    instrumented program, so a confirmed bug is real in the original.
    """
    if (bug is None) == (memory is None):
        raise ValueError("give exactly one of bug= or memory=")
    cfg = getattr(program, "cfg", program)
    run = interpret(cfg, entry, model, step_budget, int_width=int_width,
                    ptr_elems=ptr_elems, null_params=null_params)
    if run.outcome == "budget_exhausted":
        return ReplayResult(NOT_CONFIRMED, run, "budget")
    if run.outcome != "fault":
        return ReplayResult(NOT_CONFIRMED, run, "run returned normally")
    f = run.fault
    if bug is not None:
        if f.kind == "assertion-failure" and (f.detail[1], f.detail[2]) == tuple(bug):
            return ReplayResult(CONFIRMED, run)
        return ReplayResult(NOT_CONFIRMED, run, f"different fault: {f.kind} {f.detail}")
    if f.kind == memory:
        return ReplayResult(CONFIRMED, run)
    return ReplayResult(NOT_CONFIRMED, run, f"different fault: {f.kind}")
