"""Weiser-style interprocedural static slicing of instrumented programs.

Relevant variables flow backwards from the criteria.  A node joins the
slice when it may define a relevant variable; a branch joins when a slice
node lies in its range of influence (between the branch and its immediate
postdominator).  Calls are summarized by the set of objects the callee may
modify: those are routed through the callee body, everything else bypasses
the call.  Callees are context-insensitive, so relevance entering a callee
from one call site reaches every call site.  That is coarser than Weiser's
call-site summaries but still sound.

Removed nodes are contracted away: a kept node's successor becomes the first
kept node reached by skipping removed statements and jumping from removed
branches straight to their postdominator.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from types import MappingProxyType
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from .frontend.cfg import (
    FunctionCFG, LocationId, ProgramCFG, base_pointer, derefs, reads,
)
from .frontend.syntax import Var
from .instrument import InstrumentedProgram
from .pointsto import PointsToMap


@dataclass(frozen=True)
class SlicingCriterion:
    loc: LocationId
    variables: FrozenSet[str]


@dataclass(frozen=True, eq=False)
class SlicedProgram:
    program: InstrumentedProgram  # the slice, itself an instrumented program
    source: InstrumentedProgram  # what was sliced
    provenance: Dict[LocationId, LocationId]  # slice location -> source location
    kept: FrozenSet[LocationId]  # source locations that survived
    total: int
    removed: int

    @property
    def cfg(self) -> ProgramCFG:
        return self.program.cfg

    @property
    def slice_ratio(self) -> float:
        return self.removed / self.total if self.total else 0.0

    def origin(self, loc: LocationId) -> LocationId:
        return self.provenance[loc]


def criteria_from_instrumentation(ip: InstrumentedProgram) -> List[SlicingCriterion]:
    """One criterion per error check location, over every state variable."""
    vars_ = frozenset(ip.state_vars)
    return [SlicingCriterion(loc, vars_) for loc in ip.error_check_locations]


# ------------------------------------------------------------------ helpers


def _postdominators(f: FunctionCFG) -> Dict[int, Optional[int]]:
    """Immediate postdominator of every node (None if it cannot reach exit)."""
    n = len(f.nodes)
    reach_exit = {f.exit}
    todo = [f.exit]
    while todo:
        x = todo.pop()
        for p in f.preds[x]:
            if p not in reach_exit:
                reach_exit.add(p)
                todo.append(p)
    full = set(reach_exit)
    pdom = {x: set(full) for x in reach_exit}
    pdom[f.exit] = {f.exit}
    changed = True
    while changed:
        changed = False
        for x in sorted(reach_exit):
            if x == f.exit:
                continue
            succ = [s for s in f.succs[x] if s in reach_exit]
            new = set.intersection(*(pdom[s] for s in succ)) | {x}
            if new != pdom[x]:
                pdom[x] = new
                changed = True
    ipdom = {}
    for x in range(n):
        if x not in reach_exit or x == f.exit:
            ipdom[x] = None
            continue
        strict = pdom[x] - {x}
        # the immediate one is postdominated by all the others
        ipdom[x] = next(c for c in strict if strict <= pdom[c])
    return ipdom


def _influence(f: FunctionCFG, b: int, ipdom) -> Set[int]:
    stop = ipdom.get(b)
    seen = set()
    todo = list(f.succs[b])
    while todo:
        x = todo.pop()
        if x == stop or x in seen or x == b:
            continue
        seen.add(x)
        todo.extend(f.succs[x])
    return seen


class _Slicer:
    def __init__(self, ip: InstrumentedProgram, pts: PointsToMap):
        self.ip = ip
        self.cfg = ip.cfg
        self.pts = pts
        self.state_of = dict(ip.dispatch)
        self.mod = {}
        for name in reversed(self.cfg.topological_functions()):
            self.mod[name] = self._mod(name)
        self.ipdom = {name: _postdominators(f) for name, f in self.cfg.functions.items()}
        self.infl = {}
        for name, f in self.cfg.functions.items():
            for n in f.nodes:
                if n.kind == "branch":
                    self.infl[(name, n.index)] = _influence(f, n.index, self.ipdom[name])
        self.call_sites: Dict[str, List[LocationId]] = {}
        for name, f in self.cfg.functions.items():
            for n in f.nodes:
                if n.kind == "call" and n.op.func in self.cfg.functions:
                    self.call_sites.setdefault(n.op.func, []).append(f.loc(n.index))

    # -- def/use
    def mem_reads(self, exprs) -> Set[str]:
        out = set()
        for e in exprs:
            if e is None:
                continue
            out |= reads(e)
            for d in derefs(e):
                out |= self.pts.memory_of(d)
        return out

    def defs(self, target) -> Tuple[Set[str], bool]:
        """Objects a store to ``target`` may write, and whether it is strong."""
        if isinstance(target, Var):
            return {target.qual}, True
        return set(self.pts.memory_of(target)), False

    def target_reads(self, target) -> Set[str]:
        if target is None or isinstance(target, Var):
            return set()
        return self.mem_reads([base_pointer(target)] + (
            [target.index] if hasattr(target, "index") else []))

    def fire_defs(self, op) -> Set[str]:
        if op.binder is None:
            return {v for _, v in op.dispatch}
        return {self.state_of[o] for o in self.pts.objects_of(op.binder) if o in self.state_of}

    def frame(self, name) -> Set[str]:
        f = self.cfg.functions[name].func
        return {f.qual(p.name) for p in f.params + f.locals}

    def _mod(self, name) -> Set[str]:
        f = self.cfg.functions[name]
        out = self.frame(name) | {f"{name}.$ret"}
        for n in f.nodes:
            if n.kind == "assign":
                out |= self.defs(n.op.target)[0]
            elif n.kind == "call":
                if n.op.target is not None:
                    out |= self.defs(n.op.target)[0]
                if n.op.func in self.mod:
                    out |= self.mod[n.op.func]
            elif n.kind == "fire":
                out |= self.fire_defs(n.op)
        return out

    # -- fixpoint
    def run(self, criteria: List[SlicingCriterion]):
        cfg = self.cfg
        rin: Dict[LocationId, Set[str]] = {loc: set() for loc in cfg.locations()}
        rexit: Dict[str, Set[str]] = {name: set() for name in cfg.functions}
        included: Set[LocationId] = set()
        crit: Dict[LocationId, Set[str]] = {}
        for c in criteria:
            crit.setdefault(c.loc, set()).update(c.variables)
            included.add(c.loc)
        branches: Set[LocationId] = set()
        while True:
            self._data(rin, rexit, included, crit, branches)
            new = set()
            for (name, b), infl in self.infl.items():
                loc = LocationId(name, b)
                if loc in included:
                    continue
                if self.ipdom[name][b] is None or any(
                        LocationId(name, x) in included for x in infl):
                    new.add(loc)
            if not new:
                break
            branches |= new
            included |= new
        return included, rin

    def _data(self, rin, rexit, included, crit, branches):
        cfg = self.cfg
        work = deque(sorted(cfg.locations(), key=lambda l: (l.func, -l.index)))
        queued = set(work)

        def push(loc):
            if loc not in queued:
                queued.add(loc)
                work.append(loc)

        while work:
            loc = work.popleft()
            queued.discard(loc)
            name = loc.func
            f = cfg.functions[name]
            node = f.nodes[loc.index]
            if node.kind == "exit":
                after = set(rexit[name])
            else:
                after = set()
                for s in f.succs[loc.index]:
                    after |= rin[LocationId(name, s)]
            R, inc = self._transfer(loc, node, after, rexit, rin, included, crit, branches, push)
            if inc and loc not in included:
                included.add(loc)
                for c in self.call_sites.get(name, ()):
                    push(c)
            if not R <= rin[loc]:
                rin[loc] |= R
                for p in f.preds[loc.index]:
                    push(LocationId(name, p))
                if node.kind == "entry":
                    for c in self.call_sites.get(name, ()):
                        push(c)

    def _transfer(self, loc, node, after, rexit, rin, included, crit, branches, push):
        R, inc = self._effect(loc, node, after, rexit, rin, included, branches, push)
        extra = crit.get(loc)
        if extra:
            R = R | extra
        return R, inc

    def _effect(self, loc, node, after, rexit, rin, included, branches, push):
        k, op = node.kind, node.op
        inc = loc in included
        if k == "assign":
            d, strong = self.defs(op.target)
            if inc or d & after:
                R = (after - d) if strong else set(after)
                return R | self.mem_reads([op.value]) | self.target_reads(op.target), True
            return after, False
        if k == "branch":
            if loc in branches or inc:
                return after | self.mem_reads([op.cond]), True
            return after, False
        if k == "return":
            ret = f"{loc.func}.$ret"
            if op.value is not None and (inc or ret in after):
                return (after - {ret}) | self.mem_reads([op.value]), True
            return after, inc
        if k == "fire":
            d = self.fire_defs(op)
            if inc or d & after:
                return after | d | self.mem_reads([op.binder]), True
            return after, False
        if k == "call":
            return self._call(loc, op, after, rexit, rin, included, push)
        if k == "entry":
            return after - self.frame_locals(loc.func), inc
        return after, inc

    def frame_locals(self, name):
        f = self.cfg.functions[name].func
        return {f.qual(p.name) for p in f.locals} | {f"{name}.$ret"}

    def _call(self, loc, op, after, rexit, rin, included, push):
        t_defs, strong = self.defs(op.target) if op.target is not None else (set(), False)
        t_rel = bool(t_defs & after)
        callee = op.func
        if callee not in self.cfg.functions:
            if t_rel or loc in included:
                R = (after - t_defs) if strong else set(after)
                return R | self.mem_reads(op.args) | self.target_reads(op.target), True
            return after, loc in included
        mod = self.mod[callee]
        want = (after & mod) - self.frame(callee)
        if t_rel:
            want.add(f"{callee}.$ret")
        if not want <= rexit[callee]:
            rexit[callee] |= want
            push(LocationId(callee, 1))
        entry_rel = rin[LocationId(callee, 0)]
        params = {self.cfg.functions[callee].func.qual(p.name)
                  for p in self.cfg.functions[callee].func.params}
        body = any(l.func == callee for l in included)
        inc = loc in included or body or t_rel or bool(entry_rel & params)
        R = (after - mod) - (t_defs if strong else set())
        R |= entry_rel - self.frame(callee)
        if inc:
            R |= self.mem_reads(op.args) | self.target_reads(op.target)
        return R, inc


def _contract(f: FunctionCFG, keep: Set[int], ipdom) -> FunctionCFG:
    """Drop unkept nodes; redirect edges to the next kept node."""
    memo = {}

    def first_kept(x, seen=()):
        if x in keep:
            return x
        if x in memo:
            return memo[x]
        if x in seen:
            raise RuntimeError("contraction cycle through removed nodes")
        node = f.nodes[x]
        nxt = ipdom[x] if node.kind == "branch" else f.succs[x][0]
        r = first_kept(nxt, seen + (x,))
        memo[x] = r
        return r

    order = sorted(keep)
    remap = {old: new for new, old in enumerate(order)}
    nodes, succs = [], []
    for old in order:
        node = f.nodes[old]
        nodes.append(replace(node, index=remap[old]))
        succs.append(tuple(remap[first_kept(s)] for s in f.succs[old]))
    stmt_nodes = {k: tuple(remap[v] for v in vs if v in remap)
                  for k, vs in f.stmt_nodes.items()}
    out = FunctionCFG(f.name, f.func, tuple(nodes), tuple(succs), MappingProxyType(stmt_nodes))
    return out, remap


def slice_program(ip: InstrumentedProgram, criteria: List[SlicingCriterion],
                  pts: PointsToMap) -> SlicedProgram:
    if not criteria:
        raise ValueError("slicing needs at least one criterion")
    sl = _Slicer(ip, pts)
    included, _ = sl.run(criteria)
    functions = {}
    back = {}
    remaps = {}
    total = removed = 0
    for name, f in ip.cfg.functions.items():
        keep = {f.entry, f.exit} | {l.index for l in included if l.func == name}
        g, remap = _contract(f, keep, sl.ipdom[name])
        functions[name] = g
        remaps[name] = remap
        for old, new in remap.items():
            back[LocationId(name, new)] = LocationId(name, old)
        body = [n for n in f.nodes if n.kind not in ("entry", "exit")]
        total += len(body)
        removed += sum(1 for n in body if n.index not in keep)
    cfg = ip.cfg.with_functions(functions)

    def fwd(loc):
        return LocationId(loc.func, remaps[loc.func][loc.index])

    # ``matched`` stays in original-program coordinates
    fires = tuple(replace(s, loc=fwd(s.loc))
                  for s in ip.fire_sites if s.loc.index in remaps[s.loc.func])
    checks = tuple(fwd(l) for l in ip.error_check_locations
                   if l.index in remaps[l.func])
    sliced_ip = replace(ip, cfg=cfg, fire_sites=fires, error_check_locations=checks)
    kept = frozenset(back.values())
    return SlicedProgram(sliced_ip, ip, back, kept, total, removed)


slice = slice_program
