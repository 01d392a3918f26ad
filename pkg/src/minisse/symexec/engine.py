"""Depth-first symbolic execution of (sliced) instrumented programs.

The entry state comes from the same :class:`EntryLayout` the concrete
interpreter uses, so every model is directly a concrete input assignment.
Integer inputs and region cells are symbols; pointers are
:class:`SPtr` values whose object is always concrete and whose nullness
may be a formula over a ``*.nonnull`` flag.  Machine state variables only
ever hold constants.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..frontend.cfg import LocationId, ProgramCFG
from ..frontend.inputs import DEFAULT_PTR_ELEMS, EntryLayout
from ..frontend.syntax import AddrOf, Binary, Deref, Index, Null, Num, Unary, Var
from .expr import (
    FALSE, TRUE, BoolConst, Const, Formula, Sym, Term, and_, binop, bool_term, cast,
    cmp, ite, not_, or_, truth, wrap,
)
from .solver import DEFAULT_BUDGET, SAT, UNKNOWN, UNSAT, check_model, solve


@dataclass(frozen=True)
class SPtr:
    obj: Optional[str]  # None is NULL
    off: Term
    nonnull: Formula

    def __str__(self):
        if self.obj is None:
            return "NULL"
        base = f"&{self.obj}[{self.off}]"
        return base if self.nonnull == TRUE else f"({self.nonnull} ? {base} : NULL)"


NULL = SPtr(None, Const(0), FALSE)


@dataclass(frozen=True)
class Limits:
    loop_bound: Optional[int] = None  # None explores loops without bound
    solver_budget: int = DEFAULT_BUDGET
    path_budget: int = 100_000
    step_budget: int = 100_000  # per path
    wall_timeout: Optional[float] = None  # seconds

    def __post_init__(self):
        for name in ("solver_budget", "path_budget", "step_budget"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.loop_bound is not None and self.loop_bound < 0:
            raise ValueError("loop_bound must be >= 0")
        if self.wall_timeout is not None and self.wall_timeout <= 0:
            raise ValueError("wall_timeout must be positive")


@dataclass
class PathResult:
    kind: str  # returned | bug | memory_error | pruned_infeasible | budget_stopped
    loc: Optional[LocationId]
    pc: Tuple[Formula, ...]
    model: Optional[Dict[str, int]] = None
    detail: Optional[tuple] = None  # bug: (machine, target, state, message); ME: (kind,)
    tainted: bool = False
    reason: str = ""

    @property
    def completed(self):
        return self.kind in ("returned", "bug", "memory_error")


@dataclass
class SymOutcome:
    paths: List[PathResult] = field(default_factory=list)
    solver_calls: int = 0
    solver_units: int = 0
    unknown_results: int = 0
    max_depth: int = 0
    wall_timeout: bool = False
    path_budget_hit: bool = False
    stopped_early: bool = False  # the caller's ``until`` hook ended the search
    tree: Optional[str] = None
    domains: Dict[str, Tuple[int, int]] = field(default_factory=dict)

    @property
    def completed(self):
        return [p for p in self.paths if p.completed]

    @property
    def bugs(self):
        return [p for p in self.paths if p.kind == "bug"]

    @property
    def memory_errors(self):
        return [p for p in self.paths if p.kind == "memory_error"]

    @property
    def budget_stopped(self):
        return [p for p in self.paths if p.kind == "budget_stopped"]

    @property
    def tainted(self):
        return any(p.tainted for p in self.paths)

    @property
    def exhaustive(self):
        """Every path was explored to completion with exact solver answers."""
        return not (self.wall_timeout or self.path_budget_hit or self.budget_stopped
                    or self.tainted)

    def bug_set(self):
        """{(target, error state)} over model-carrying bug paths."""
        return {(p.detail[1], p.detail[2]) for p in self.bugs if p.model is not None}


class _Halt(Exception):
    """Terminates the current path."""

    def __init__(self, result: PathResult):
        self.result = result


class _State:
    __slots__ = ("store", "pc", "frames", "fname", "idx", "loops", "tainted", "depth",
                 "tree", "edge")

    def fork(self):
        s = _State()
        s.store = {k: list(v) for k, v in self.store.items()}
        s.pc = self.pc
        s.frames = list(self.frames)
        s.fname = self.fname
        s.idx = self.idx
        s.loops = dict(self.loops)
        s.tainted = self.tainted
        s.depth = self.depth
        s.tree = self.tree
        s.edge = self.edge
        return s

    @property
    def loc(self):
        return LocationId(self.fname, self.idx)


class Engine:
    def __init__(self, cfg: ProgramCFG, entry: str, limits: Limits = Limits(), *,
                 int_width=32, ptr_elems=DEFAULT_PTR_ELEMS, null_params=False,
                 dump_tree=False, until=None):
        self.cfg = cfg
        self.until = until
        self.entry = entry
        self.limits = limits
        self.int_width = int_width
        self.layout = EntryLayout(cfg, entry, int_width=int_width, ptr_elems=ptr_elems,
                                  null_params=null_params)
        self.domains = {n: s.domain for n, s in self.layout.slots.items()}
        self.sizes: Dict[str, int] = {}
        for g in cfg.globals:
            self.sizes[g.name] = g.ty.size if g.ty.is_array else 1
        for f in cfg.functions.values():
            for p in f.func.params + f.func.locals:
                self.sizes[f.func.qual(p.name)] = 1
            self.sizes[f"{f.name}.$ret"] = 1
        for r in self.layout.regions.values():
            self.sizes.setdefault(r.obj, r.size)
        self.loop_edges = self._loops()
        self.out = SymOutcome(domains=dict(self.domains))
        self._stop = False
        self._completed = 0
        self.dump_tree = dump_tree
        self._tree_nodes: List[str] = []
        self._tree_edges: List[Tuple[int, int, str]] = []

    # ------------------------------------------------------------ set up
    def _loops(self):
        """Per (func, header): the successor that enters the loop body."""
        out = {}
        for name, f in self.cfg.functions.items():
            for u, h in f.back_edges():
                if f.nodes[h].kind != "branch":
                    continue
                body = {u}
                todo = [u]
                while todo:
                    x = todo.pop()
                    if x == h:
                        continue
                    for p in f.preds[x]:
                        if p not in body and p != h:
                            body.add(p)
                            todo.append(p)
                body.add(h)
                t, e = f.succs[h]
                if t in body and e not in body:
                    out[(name, h)] = t
                elif e in body and t not in body:
                    out[(name, h)] = e
        return out

    def width_of(self, ty):
        return 8 if ty.kind == "char" else self.int_width

    def zero(self, ty):
        return Const(0) if ty.is_integral else NULL

    def initial_state(self) -> _State:
        st = _State()
        st.store = {}
        for obj, size in self.sizes.items():
            st.store[obj] = [Const(0)] * size
        ptr_objs = set()
        for g in self.cfg.globals:
            if g.ty.is_ptr:
                ptr_objs.add(g.name)
        for f in self.cfg.functions.values():
            for p in f.func.params + f.func.locals:
                if p.ty.is_ptr:
                    ptr_objs.add(f.func.qual(p.name))
            if f.func.ret.is_ptr:
                ptr_objs.add(f"{f.name}.$ret")
        for o in ptr_objs:
            st.store[o] = [NULL]
        lay = self.layout
        for r in lay.regions.values():
            if r.symbolic:
                st.store[r.obj] = [Sym(r.cell_name(k)) for k in range(r.size)]
            else:
                st.store[r.obj] = [self.zero(r.elem)] * r.size
        for b in lay.bindings:
            cells = st.store[b.qual]
            if b.how == "const":
                if b.ty.is_ptr:
                    cells[0] = NULL
                else:
                    cells[0] = Const(wrap(b.value, self.width_of(b.ty)))
            elif b.how == "input":
                cells[0] = Sym(b.value)
            elif b.how == "region":
                cells[0] = SPtr(b.region, Const(lay.regions[b.region].aim), TRUE)
            elif b.how == "nullable":
                flag = cmp("!=", Sym(b.flag), Const(0))
                cells[0] = SPtr(b.region, Const(lay.regions[b.region].aim), flag)
            elif b.how == "zero":
                cells[0] = self.zero(b.ty)
        st.pc = ()
        st.frames = []
        st.fname = self.entry
        st.idx = 0
        st.loops = {}
        st.tainted = False
        st.depth = 0
        st.edge = ""
        st.tree = self._tree_node(None, "start", "")
        return st

    # ------------------------------------------------------------- tree
    def _tree_node(self, parent, label, edge):
        if not self.dump_tree:
            return None
        nid = len(self._tree_nodes)
        self._tree_nodes.append(label)
        if parent is not None:
            self._tree_edges.append((parent, nid, edge))
        return nid

    def dot(self) -> str:
        lines = ["digraph symexec {", "  node [shape=circle, fontsize=10];"]
        for i, label in enumerate(self._tree_nodes):
            lines.append(f'  n{i} [label="{label}"];')
        for a, b, e in self._tree_edges:
            attr = f' [label="{e}"]' if e else ""
            lines.append(f"  n{a} -> n{b}{attr};")
        lines.append("}")
        return "\n".join(lines) + "\n"

    # ----------------------------------------------------------- solving
    def solve(self, pc):
        r = solve(pc, self.limits.solver_budget, self.domains)
        self.out.solver_calls += 1
        self.out.solver_units += r.cost
        return r

    def feasible(self, st: _State, extra: Formula):
        """(keep?, tainted?) for ``st.pc + [extra]``."""
        if extra == FALSE:
            return False, False
        if extra == TRUE or extra in st.pc:
            return True, False
        if not_(extra) in st.pc:
            return False, False
        r = self.solve(st.pc + (extra,))
        if r.status == UNSAT:
            return False, False
        if r.status == UNKNOWN:
            self.out.unknown_results += 1
            return True, True
        return True, False

    def _terminal(self, st, kind, detail=None, reason=""):
        model = None
        tainted = st.tainted
        if kind in ("bug", "memory_error"):
            r = self.solve(st.pc)
            if r.status == SAT:
                model = r.model
                assert check_model(st.pc, model)
            elif r.status == UNSAT:
                return PathResult("pruned_infeasible", st.loc, st.pc, tainted=tainted)
            else:
                self.out.unknown_results += 1
                tainted = True
        return PathResult(kind, st.loc, st.pc, model, detail, tainted, reason)

    # ---------------------------------------------------- memory checks
    def _require(self, st, ok: Formula, kind, obj=None):
        """Continue under ``ok``; split off a memory-error path if it can fail."""
        if ok == TRUE:
            return
        if ok != FALSE:
            bad, bad_t = self.feasible(st, not_(ok))
            if not bad:
                return
        else:
            bad_t = False
        err = st.fork()
        if ok != FALSE:
            err.pc = err.pc + (not_(ok),)
        err.tainted |= bad_t
        res = self._terminal(err, "memory_error", (kind, obj))
        keep, t = (False, False) if ok == FALSE else self.feasible(st, ok)
        if not keep:
            raise _Halt(res)
        self._finish(err, res)
        st.pc = st.pc + (ok,)
        st.tainted |= t

    # ------------------------------------------------------- expressions
    def ev(self, st, e):
        if isinstance(e, Num):
            return Const(wrap(e.value, self.width_of(e.ty) if e.ty.kind == "char"
                              else self.int_width))
        if isinstance(e, Null):
            return NULL
        if isinstance(e, Var):
            if e.ty.is_array:
                return SPtr(e.qual, Const(0), TRUE)
            return st.store[e.qual][0]
        if isinstance(e, AddrOf):
            return SPtr(e.var.qual, Const(0), TRUE)
        if isinstance(e, (Deref, Index)):
            obj, off = self.address(st, e)
            return self.load(st, obj, off)
        if isinstance(e, Unary):
            a = self.ev(st, e.operand)
            if e.op == "-":
                return binop("-", Const(0), a, self.int_width)
            if isinstance(a, SPtr):
                return bool_term(not_(a.nonnull))
            return bool_term(cmp("==", a, Const(0)))
        if isinstance(e, Binary):
            return self.binary(st, e)
        raise TypeError(type(e).__name__)

    def address(self, st, e):
        if isinstance(e, Deref):
            p = self.ev(st, e.ptr)
            idx = None
        else:
            p = self.ev(st, e.base)
            idx = self.ev(st, e.index)
        self._require(st, p.nonnull, "null-deref")
        off = p.off if idx is None else binop("+", p.off, idx, 0)
        size = self.sizes[p.obj]
        ok = and_(cmp(">=", off, Const(0)), cmp("<", off, Const(size)))
        self._require(st, ok, "out-of-bounds", p.obj)
        return p.obj, off

    def _concrete_offset(self, st, off):
        if isinstance(off, Const):
            return off.value
        r = self.solve(st.pc)
        if r.status != SAT:
            return None
        from .expr import evaluate
        full = {n: r.model.get(n, 0) for n in _syms(off)}
        v = evaluate(off, full)
        st.pc = st.pc + (cmp("==", off, Const(v)),)
        st.tainted = True  # concretization gives up completeness
        return v

    def load(self, st, obj, off):
        cells = st.store[obj]
        if isinstance(off, Const):
            return cells[off.value]
        if any(isinstance(c, SPtr) for c in cells):
            v = self._concrete_offset(st, off)
            if v is None:
                raise _Halt(self._terminal(st, "budget_stopped", reason="solver"))
            return cells[v]
        out = cells[-1]
        for k in range(len(cells) - 2, -1, -1):
            out = ite(cmp("==", off, Const(k)), cells[k], out)
        return out

    def store_to(self, st, obj, off, value):
        cells = st.store[obj]
        if isinstance(off, Const):
            cells[off.value] = value
            return
        if isinstance(value, SPtr) or any(isinstance(c, SPtr) for c in cells):
            v = self._concrete_offset(st, off)
            if v is None:
                raise _Halt(self._terminal(st, "budget_stopped", reason="solver"))
            cells[v] = value
            return
        for k in range(len(cells)):
            cells[k] = ite(cmp("==", off, Const(k)), value, cells[k])

    def binary(self, st, e):
        op = e.op
        lt, rt = e.left.ty.decay(), e.right.ty.decay()
        a = self.ev(st, e.left)
        b = self.ev(st, e.right)
        if op in ("+", "-") and (lt.is_ptr or rt.is_ptr):
            if rt.is_ptr:
                a, b = b, a
            self._require(st, a.nonnull, "null-deref")
            off = binop(op, a.off, b, 0)
            size = self.sizes[a.obj]
            ok = and_(cmp(">=", off, Const(0)), cmp("<=", off, Const(size)))
            self._require(st, ok, "out-of-bounds", a.obj)
            return SPtr(a.obj, off, TRUE)
        if op in ("+", "-", "*"):
            return binop(op, a, b, self.int_width)
        if lt.is_address or rt.is_address:
            eq = _ptr_eq(a, b)
            return bool_term(eq if op == "==" else not_(eq))
        return bool_term(cmp(op, a, b))

    def cond(self, st, e) -> Formula:
        v = self.ev(st, e)
        if isinstance(v, SPtr):
            return v.nonnull
        return truth(v)

    def assign(self, st, target, value):
        if not isinstance(value, SPtr) and target.ty.is_integral:
            value = cast(value, self.width_of(target.ty))
        if isinstance(target, Var):
            st.store[target.qual][0] = value
        else:
            obj, off = self.address(st, target)
            self.store_to(st, obj, off, value)

    # -------------------------------------------------------------- run
    def run(self) -> SymOutcome:
        start = time.monotonic()
        limit = self.limits.wall_timeout
        stack = [self.initial_state()]
        ticks = 0
        while stack:
            if self._completed >= self.limits.path_budget:
                self.out.path_budget_hit = True
                for st in stack:
                    self.out.paths.append(self._terminal(st, "budget_stopped", reason="paths"))
                break
            ticks += 1
            if limit is not None and ticks % 64 == 0 and time.monotonic() - start > limit:
                self.out.wall_timeout = True
                for st in stack:
                    self.out.paths.append(self._terminal(st, "budget_stopped", reason="wall"))
                break
            st = stack.pop()
            try:
                children = self.step(st)
            except _Halt as h:
                self._finish(st, h.result)
            else:
                # depth-first, true edge first: push in reverse
                for c in reversed(children):
                    stack.append(c)
            if self._stop:
                self.out.stopped_early = True
                break
        if self.dump_tree:
            self.out.tree = self.dot()
        return self.out

    def _finish(self, st, res):
        self.out.paths.append(res)
        self._record_end(st, res)
        if res.completed:
            self._completed += 1
        if self.until is not None and res.completed and self.until(res):
            self._stop = True

    def _record_end(self, st, res):
        if self.dump_tree:
            label = {"bug": "bug", "memory_error": "ME", "returned": "ret",
                     "pruned_infeasible": "infeasible", "budget_stopped": "stop"}[res.kind]
            self._tree_node(st.tree, label, st.edge)

    def step(self, st: _State) -> List[_State]:
        st.depth += 1
        self.out.max_depth = max(self.out.max_depth, st.depth)
        if st.depth > self.limits.step_budget:
            raise _Halt(self._terminal(st, "budget_stopped", reason="steps"))
        f = self.cfg.functions[st.fname]
        node = f.nodes[st.idx]
        loc = st.loc
        if self.dump_tree and node.kind not in ("entry", "exit"):
            st.tree = self._tree_node(st.tree, f"{loc}\\nline {node.line}", st.edge)
            st.edge = ""
        k, op = node.kind, node.op
        succ = f.succs[st.idx]
        if k == "entry":
            for key in [key for key in st.loops if key[0] == st.fname]:
                del st.loops[key]
            st.idx = succ[0]
            return [st]
        if k == "nop":
            st.idx = succ[0]
            return [st]
        if k == "exit":
            if not st.frames:
                raise _Halt(PathResult("returned", loc, st.pc, tainted=st.tainted))
            fname, idx, target = st.frames.pop()
            ret = st.store[f"{st.fname}.$ret"][0]
            st.fname, st.idx = fname, idx
            if target is not None:
                self.assign(st, target, ret)
            return [st]
        if k == "assign":
            self.assign(st, op.target, self.ev(st, op.value))
            st.idx = succ[0]
            return [st]
        if k == "return":
            if op.value is not None:
                v = self.ev(st, op.value)
                ret_ty = f.func.ret
                if not isinstance(v, SPtr) and ret_ty.is_integral:
                    v = cast(v, self.width_of(ret_ty))
                st.store[f"{st.fname}.$ret"][0] = v
            st.idx = succ[0]
            return [st]
        if k == "call":
            args = [self.ev(st, a) for a in op.args]
            callee = self.cfg.functions.get(op.func)
            if callee is None:
                if op.target is not None:
                    self.assign(st, op.target, self.zero(op.target.ty))
                st.idx = succ[0]
                return [st]
            cf = callee.func
            for p, v in zip(cf.params, args):
                if not isinstance(v, SPtr) and p.ty.is_integral:
                    v = cast(v, self.width_of(p.ty))
                st.store[cf.qual(p.name)][0] = v
            for l in cf.locals:
                st.store[cf.qual(l.name)][0] = self.zero(l.ty)
            st.store[f"{cf.name}.$ret"][0] = self.zero(cf.ret)
            st.frames.append((st.fname, succ[0], op.target))
            st.fname, st.idx = op.func, 0
            return [st]
        if k == "fire":
            return self.fire(st, op, succ[0])
        if k == "branch":
            return self.branch(st, op, succ)
        raise TypeError(f"unknown node kind {k}")

    def _take(self, st, target):
        """Move along a branch edge, enforcing the loop bound."""
        key = (st.fname, st.idx)
        body = self.loop_edges.get(key)
        if body is not None:
            if target == body:
                n = st.loops.get(key, 0) + 1
                if self.limits.loop_bound is not None and n > self.limits.loop_bound:
                    st.loops[key] = n
                    return PathResult("budget_stopped", st.loc, st.pc, tainted=st.tainted,
                                      reason="loop_bound")
                st.loops[key] = n
            else:
                st.loops.pop(key, None)
        st.idx = target
        return None

    def branch(self, st, op, succ):
        c = self.cond(st, op.cond)
        t, f = succ
        if isinstance(c, BoolConst):
            stop = self._take(st, t if c.value else f)
            if stop is not None:
                raise _Halt(stop)
            return [st]
        out = []
        for formula, target, label in ((c, t, "T"), (not_(c), f, "F")):
            keep, tainted = self.feasible(st, formula)
            if not keep:
                res = PathResult("pruned_infeasible", st.loc, st.pc + (formula,))
                self.out.paths.append(res)
                continue
            child = st.fork()
            if formula not in st.pc:
                child.pc = st.pc + (formula,)
            child.tainted |= tainted
            child.edge = label
            stop = self._take(child, target)
            if stop is not None:
                self._finish(child, stop)
                continue
            out.append(child)
        return out

    def fire(self, st, op, nxt):
        machine = op.machine
        table = dict(op.dispatch)
        if op.binder is None:
            targets = [o for o, _ in op.dispatch]
            states = [st]
        else:
            p = self.ev(st, op.binder)
            states = []
            if p.obj is None or p.obj not in table:
                st.idx = nxt
                return [st]
            if p.nonnull == TRUE:
                states = [st]
            else:
                for formula, live in ((p.nonnull, True), (not_(p.nonnull), False)):
                    keep, tainted = self.feasible(st, formula)
                    if not keep:
                        continue
                    child = st.fork()
                    child.pc = st.pc + (formula,)
                    child.tainted |= tainted
                    child.edge = "T" if live else "F"
                    if not live:
                        child.idx = nxt
                        states.append(("skip", child))
                    else:
                        states.append(child)
            targets = [p.obj]
        out = []
        for s in states:
            if isinstance(s, tuple):
                out.append(s[1])
                continue
            for obj in targets:
                var = table[obj]
                cur = s.store[var][0]
                assert isinstance(cur, Const), "machine state must stay concrete"
                new, err = machine.fire_index(cur.value, op.label)
                if err is not None:
                    detail = (machine.name, obj, err, machine.messages[err])
                    res = self._terminal(s, "bug", detail)
                    if s is st and len(states) == 1:
                        raise _Halt(res)
                    self._finish(s, res)
                    break
                s.store[var][0] = Const(new)
            else:
                s.idx = nxt
                out.append(s)
        return out


def _ptr_eq(a: SPtr, b: SPtr) -> Formula:
    both_null = and_(not_(a.nonnull), not_(b.nonnull))
    if a.obj is None or b.obj is None or a.obj != b.obj:
        same = FALSE
    else:
        same = and_(a.nonnull, b.nonnull, cmp("==", a.off, b.off))
    return or_(both_null, same)


def _syms(t):
    from .expr import symbols
    return symbols(t)


def sym_execute(sp, entry: str, limits: Limits = Limits(), *, int_width=32,
                ptr_elems=DEFAULT_PTR_ELEMS, null_params=False, dump_tree=False,
                until=None) -> SymOutcome:
    """Explore ``sp`` (a SlicedProgram, InstrumentedProgram or ProgramCFG).

    ``until``, if given, is called with every completed PathResult in
    exploration order; returning True ends the search early.
    """
    cfg = sp if isinstance(sp, ProgramCFG) else sp.cfg
    eng = Engine(cfg, entry, limits, int_width=int_width, ptr_elems=ptr_elems,
                 null_params=null_params, dump_tree=dump_tree, until=until)
    return eng.run()
