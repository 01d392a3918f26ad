"""Metacompilation-style typestate analysis.

For every location and every target object, compute the set of machine
states reachable along some path (ignoring data), then report each error
state that shows up.  This is the over-approximating first opinion that
classification later confirms or refutes.

Sets are *after* a location executes.  An error destination is recorded at
the statement that produces it but is not propagated further, so
``{DU,U}`` after an unlock flows on as ``{U}``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Tuple

from .frontend.cfg import LocationId, ProgramCFG
from .instrument import resolve_targets
from .machines import MachineSpec, MatchSite
from .pointsto import PointsToMap


@dataclass(frozen=True)
class CandidateReport:
    machine: str
    target: str
    error_state: str
    witness: Optional[LocationId]
    message: str
    line: int = 0

    def to_json(self):
        return {
            "machine": self.machine,
            "target": self.target,
            "error_state": self.error_state,
            "witness": str(self.witness) if self.witness is not None else None,
            "line": self.line,
            "message": self.message,
        }

    @classmethod
    def from_json(cls, d):
        w = d.get("witness")
        if w:
            func, _, idx = w.rpartition(":")
            w = LocationId(func, int(idx))
        return cls(d["machine"], d["target"], d["error_state"], w or None,
                   d.get("message", ""), d.get("line", 0))


class StateSetMap:
    """Per (location, target) state sets of a finished fixpoint."""

    def __init__(self, cfg, spec, targets, before, after, order):
        self.cfg = cfg
        self.spec = spec
        self.targets = tuple(targets)
        self._before = before
        self._after = after
        self.order = order  # locations in topological-then-index order

    def __getitem__(self, key) -> FrozenSet[str]:
        return self._after.get(key, frozenset())

    def after(self, loc, target) -> FrozenSet[str]:
        return self._after.get((loc, target), frozenset())

    def before(self, loc, target) -> FrozenSet[str]:
        return self._before.get((loc, target), frozenset())

    def items(self):
        return self._after.items()

    def sorted_states(self, states):
        return [s for s in self.spec.states if s in states]

    def line_sets(self, func: str, target: str) -> Dict[int, FrozenSet[str]]:
        """Per-line view: the set after each source line of ``func``.

        Lines holding statements show the union of their nodes' sets; other
        lines inside the body show the set flowing into the next statement.
        """
        f = self.cfg.functions[func]
        by_line: Dict[int, set] = {}
        for n in f.nodes:
            if n.kind == "exit":
                continue
            by_line.setdefault(n.line, set()).update(self.after(f.loc(n.index), target))
        start, end = f.func.line, f.func.end_line or f.func.line
        stmts = sorted((n.line, n.index) for n in f.nodes if n.kind not in ("entry", "exit"))
        out = {}
        for line in range(start, end):
            if line in by_line:
                out[line] = frozenset(by_line[line])
                continue
            nxt = next((i for ln, i in stmts if ln > line), f.exit)
            out[line] = self.before(f.loc(nxt), target)
        return out

    def annotate(self, func: str, target: str, source: Optional[str] = None) -> str:
        """The function's source with each line's set as a trailing comment."""
        source = source if source is not None else self.cfg.program.source
        lines = source.splitlines()
        sets = self.line_sets(func, target)
        width = max((len(lines[ln - 1]) for ln in sets if ln - 1 < len(lines)), default=0)
        f = self.cfg.functions[func].func
        out = []
        for ln in range(f.line, (f.end_line or f.line) + 1):
            text = lines[ln - 1] if ln - 1 < len(lines) else ""
            if ln in sets:
                states = ",".join(self.sorted_states(sets[ln]))
                text = f"{text.ljust(width)}   // {{{states}}}"
            out.append(f"{ln:3d}: {text}".rstrip())
        return "\n".join(out)


def _transfer(spec, states, label):
    post, errs = set(), set()
    for s in states:
        new, err = spec.fire(s, label)
        if err is None:
            post.add(new)
        else:
            errs.add(err)
    return post, errs


def location_order(cfg: ProgramCFG) -> List[LocationId]:
    order = []
    for name in cfg.topological_functions():
        f = cfg.functions[name]
        rpo = f.reverse_postorder()
        rest = [n.index for n in f.nodes if n.index not in set(rpo)]
        order.extend(f.loc(i) for i in rpo + rest)
    return order


def metal_fixpoint(cfg: ProgramCFG, spec: MachineSpec, sites: List[MatchSite],
                   pts: PointsToMap, targets=None, entry=None) -> StateSetMap:
    """Least fixpoint of per-target state sets.

    Flow-sensitive, path-insensitive, context-insensitive: a call feeds the
    callee's entry and takes the callee's exit set, merged over all call
    sites.  A binder that may denote several objects (or NULL) updates each
    of them weakly.  Without ``entry`` every uncalled function is a root.
    """
    site_targets, _, chosen, skipped = resolve_targets(sites, pts, targets)
    by_loc = {s.loc: s for s in sites if s.loc not in skipped}
    roots = [entry] if entry is not None else [
        f for f in cfg.functions if not cfg.callers(f)]
    call_sites: Dict[str, List[LocationId]] = {}
    for name, f in cfg.functions.items():
        for n in f.nodes:
            if n.kind == "call" and n.op.func in cfg.functions:
                call_sites.setdefault(n.op.func, []).append(f.loc(n.index))

    errors = set(spec.error_states)
    before: Dict[Tuple[LocationId, str], FrozenSet[str]] = {}
    after: Dict[Tuple[LocationId, str], FrozenSet[str]] = {}
    for t in chosen:
        ins: Dict[LocationId, set] = {}
        outs: Dict[LocationId, set] = {}
        work = deque()
        queued = set()

        def push(loc):
            if loc not in queued:
                queued.add(loc)
                work.append(loc)

        def feed(loc, states):
            cur = ins.setdefault(loc, set())
            if not states <= cur:
                cur |= states
                push(loc)

        for r in roots:
            feed(LocationId(r, 0), {spec.initial})
        while work:
            loc = work.popleft()
            queued.discard(loc)
            f = cfg.functions[loc.func]
            node = f.nodes[loc.index]
            S = ins.get(loc, set())
            post, errs = set(S), set()
            site = by_loc.get(loc)
            if site is not None:
                if site.binder is None:
                    post, errs = _transfer(spec, S, site.label)
                elif t in site_targets.get(loc, ()):
                    post, errs = _transfer(spec, S, site.label)
                    strong = len(site_targets[loc]) == 1 and not pts.may_be_null(site.binder)
                    if not strong:
                        post |= S
            if node.kind == "call" and node.op.func in cfg.functions:
                callee = node.op.func
                feed(LocationId(callee, 0), post - errors)
                post = set(outs.get(LocationId(callee, 1), set()))
            new_out = outs.setdefault(loc, set())
            grown = not (post | errs) <= new_out
            new_out |= post | errs
            prop = new_out - errors
            if node.kind == "exit":
                if grown:
                    for c in call_sites.get(loc.func, ()):
                        push(c)
                continue
            for s in f.succs[loc.index]:
                feed(LocationId(loc.func, s), prop)
        for loc, S in ins.items():
            before[(loc, t)] = frozenset(S)
        for loc, S in outs.items():
            after[(loc, t)] = frozenset(S)
    return StateSetMap(cfg, spec, chosen, before, after, location_order(cfg))


def metal_reports(ssm: StateSetMap, spec: MachineSpec) -> List[CandidateReport]:
    """One report per (target, error state), witnessed at its earliest location."""
    msgs = spec.messages
    out = []
    for t in ssm.targets:
        seen = set()
        for loc in ssm.order:
            for err in spec.error_states:
                if err in seen or err not in ssm.after(loc, t):
                    continue
                seen.add(err)
                line = ssm.cfg.node(loc).line
                out.append(CandidateReport(spec.name, t, err, loc, msgs[err], line))
    return out
