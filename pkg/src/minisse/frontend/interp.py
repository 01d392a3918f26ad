"""Deterministic concrete interpreter over :class:`ProgramCFG`.

MiniC has no recursion, so every variable lives in one statically
allocated store object for the lifetime of the interpreter; locals are
reset to zero on each call.  Expressions are compiled once to closures over
the store cells, which keeps exhaustive input sweeps affordable.

Pointers are ``(MemObj, offset)`` tuples and NULL is ``None``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

from .cfg import LocationId, ProgramCFG
from .inputs import DEFAULT_PTR_ELEMS, EntryLayout
from .syntax import AddrOf, Binary, Deref, Index, Null, Num, Unary, Var

FAULT_KINDS = ("null-deref", "out-of-bounds", "assertion-failure", "div-unsupported")


def wrapper(bits):
    mask = (1 << bits) - 1
    sign = 1 << (bits - 1)
    full = 1 << bits

    def wrap(v):
        v &= mask
        return v - full if v & sign else v

    return wrap


class MemObj:
    __slots__ = ("name", "cells", "elem")

    def __init__(self, name, size, elem):
        self.name = name
        self.cells = [0] * size
        self.elem = elem

    def __repr__(self):
        return f"MemObj({self.name!r})"


class FaultSignal(Exception):
    def __init__(self, kind, detail=None):
        super().__init__(kind)
        self.kind = kind
        self.detail = detail


@dataclass(frozen=True)
class Fault:
    kind: str
    loc: LocationId
    detail: Optional[Tuple] = None  # assertion: (machine, target, error state, message)


@dataclass
class RunResult:
    outcome: str  # 'returned' | 'fault' | 'budget_exhausted'
    trace: List[LocationId]
    fault: Optional[Fault] = None
    return_value: Any = None
    steps: int = 0
    snapshots: List[Tuple] = field(default_factory=list)

    @property
    def terminated(self):
        return self.outcome != "budget_exhausted"


def show(v):
    """Render a runtime value as plain data (pointers become (name, off))."""
    if isinstance(v, tuple):
        return (v[0].name, v[1])
    return v


class Interpreter:
    """Compiled interpreter for one (program, entry, width) combination.

    ``run`` may be called repeatedly with different inputs.
    """

    def __init__(self, cfg: ProgramCFG, entry: str, *, int_width=32,
                 ptr_elems=DEFAULT_PTR_ELEMS, null_params=False):
        if int_width not in (8, 16, 32):
            raise ValueError("int_width must be 8, 16 or 32")
        self.cfg = cfg
        self.entry = entry
        self.layout = EntryLayout(cfg, entry, int_width=int_width, ptr_elems=ptr_elems,
                                  null_params=null_params)
        self.wrap_int = wrapper(int_width)
        self.wrap_char = wrapper(8)
        self.objs: Dict[str, MemObj] = {}
        for g in cfg.globals:
            size = g.ty.size if g.ty.is_array else 1
            self.objs[g.name] = MemObj(g.name, size, g.ty.base if g.ty.is_array else g.ty)
        for f in cfg.functions.values():
            for p in f.func.params + f.func.locals:
                q = f.func.qual(p.name)
                self.objs[q] = MemObj(q, 1, p.ty)
            self.objs[f"{f.name}.$ret"] = MemObj(f"{f.name}.$ret", 1, f.func.ret)
        for r in self.layout.regions.values():
            if r.obj not in self.objs:
                self.objs[r.obj] = MemObj(r.obj, r.size, r.elem)
        self._compiled = {name: self._compile_function(f) for name, f in cfg.functions.items()}
        self._expr_cache = {}
        self.frames = []
        self.loc = None
        self.steps = 0

    # ------------------------------------------------------------ helpers
    def wrap_for(self, ty):
        if ty.kind == "char":
            return self.wrap_char
        if ty.kind == "int":
            return self.wrap_int
        return None

    def value_of(self, name, index=0):
        return show(self.objs[name].cells[index])

    def snapshot(self):
        """Plain-data copy of the whole store."""
        return {n: [show(c) for c in o.cells] for n, o in self.objs.items()}

    def eval(self, expr):
        """Evaluate ``expr`` in the current store (for observers)."""
        key = id(expr)
        fn = self._expr_cache.get(key)
        if fn is None:
            fn = self._expr(expr)
            self._expr_cache[key] = (fn, expr)
        else:
            fn = fn[0]
        return fn()

    # ----------------------------------------------------------- compiler
    def _expr(self, e) -> Callable[[], Any]:
        if isinstance(e, Num):
            v = self.wrap_for(e.ty)(e.value) if e.ty.kind == "char" else self.wrap_int(e.value)
            return lambda: v
        if isinstance(e, Null):
            return lambda: None
        if isinstance(e, Var):
            obj = self.objs[e.qual]
            if e.ty.is_array:
                p = (obj, 0)
                return lambda: p
            cells = obj.cells
            return lambda: cells[0]
        if isinstance(e, AddrOf):
            p = (self.objs[e.var.qual], 0)
            return lambda: p
        if isinstance(e, (Deref, Index)):
            addr = self._address(e)

            def load():
                o, off = addr()
                return o.cells[off]

            return load
        if isinstance(e, Unary):
            a = self._expr(e.operand)
            if e.op == "-":
                w = self.wrap_int
                return lambda: w(-a())
            if e.operand.ty.decay().is_address:
                return lambda: 1 if a() is None else 0
            return lambda: 1 if a() == 0 else 0
        if isinstance(e, Binary):
            return self._binary(e)
        raise TypeError(f"cannot evaluate {type(e).__name__}")

    def _address(self, e):
        """Closure yielding a checked (MemObj, offset) for Deref/Index."""
        if isinstance(e, Deref):
            base = self._expr(e.ptr)
            idx = None
        else:
            base = self._expr(e.base)
            idx = self._expr(e.index)

        def addr():
            p = base()
            if p is None:
                raise FaultSignal("null-deref")
            o, off = p
            if idx is not None:
                off += idx()
            if off < 0 or off >= len(o.cells):
                raise FaultSignal("out-of-bounds", (o.name, off))
            return o, off

        return addr

    def _binary(self, e):
        a = self._expr(e.left)
        b = self._expr(e.right)
        op = e.op
        lt, rt = e.left.ty.decay(), e.right.ty.decay()
        w = self.wrap_int
        if op in ("+", "-") and (lt.is_ptr or rt.is_ptr):
            if rt.is_ptr:
                a, b = b, a
            sign = -1 if op == "-" else 1

            def ptr_add():
                p = a()
                i = b()
                if p is None:
                    raise FaultSignal("null-deref")
                o, off = p
                off += sign * i
                if off < 0 or off > len(o.cells):
                    raise FaultSignal("out-of-bounds", (o.name, off))
                return (o, off)

            return ptr_add
        if op == "+":
            return lambda: w(a() + b())
        if op == "-":
            return lambda: w(a() - b())
        if op == "*":
            return lambda: w(a() * b())
        if op == "<":
            return lambda: 1 if a() < b() else 0
        if op == "<=":
            return lambda: 1 if a() <= b() else 0
        if op == ">":
            return lambda: 1 if a() > b() else 0
        if op == ">=":
            return lambda: 1 if a() >= b() else 0
        if lt.is_address or rt.is_address:
            if op == "==":
                return lambda: 1 if _ptr_eq(a(), b()) else 0
            return lambda: 0 if _ptr_eq(a(), b()) else 1
        if op == "==":
            return lambda: 1 if a() == b() else 0
        if op == "!=":
            return lambda: 1 if a() != b() else 0
        raise TypeError(f"operator {op}")

    def _store(self, target, value_fn):
        wrap = self.wrap_for(target.ty)
        if isinstance(target, Var):
            cells = self.objs[target.qual].cells
            if wrap is None:
                def store():
                    cells[0] = value_fn()
            else:
                def store():
                    cells[0] = wrap(value_fn())
            return store
        addr = self._address(target)

        def store_mem():
            o, off = addr()
            v = value_fn()
            o.cells[off] = wrap(v) if wrap is not None else v

        return store_mem

    def _truth(self, e):
        f = self._expr(e)
        if e.ty.decay().is_address:
            return lambda: f() is not None
        return lambda: f() != 0

    def _compile_function(self, f):
        out = []
        ret_cells = self.objs[f"{f.name}.$ret"].cells
        for node in f.nodes:
            succ = f.succs[node.index]
            k = node.kind
            op = node.op
            if k in ("entry", "nop"):
                out.append(("goto", succ[0]))
            elif k == "exit":
                out.append(("exit", None))
            elif k == "assign":
                out.append(("do", self._store(op.target, self._expr(op.value)), succ[0]))
            elif k == "branch":
                out.append(("branch", self._truth(op.cond), succ[0], succ[1]))
            elif k == "return":
                if op.value is None:
                    out.append(("goto", succ[0]))
                else:
                    wrap = self.wrap_for(f.func.ret)
                    v = self._expr(op.value)
                    if wrap is None:
                        def ret(v=v):
                            ret_cells[0] = v()
                    else:
                        def ret(v=v, wrap=wrap):
                            ret_cells[0] = wrap(v())
                    out.append(("do", ret, succ[0]))
            elif k == "call":
                args = [self._expr(a) for a in op.args]
                callee = self.cfg.functions.get(op.func)
                if callee is None:
                    sig = self.cfg.signatures[op.func]
                    zero = None if sig.ret.is_ptr else 0
                    store = self._store(op.target, lambda z=zero: z) if op.target is not None else None

                    def ext(args=args, store=store):
                        for a in args:
                            a()
                        if store is not None:
                            store()

                    out.append(("do", ext, succ[0]))
                else:
                    cf = callee.func
                    pcells = []
                    for p in cf.params:
                        obj = self.objs[cf.qual(p.name)]
                        pcells.append((obj.cells, self.wrap_for(p.ty)))
                    lcells = [(self.objs[cf.qual(l.name)].cells, None if l.ty.is_integral else None,
                               0 if l.ty.is_integral else None) for l in cf.locals]
                    cret = self.objs[f"{cf.name}.$ret"].cells
                    cret_zero = 0 if cf.ret.is_integral else None

                    def enter(args=args, pcells=pcells, lcells=lcells, cret=cret, z=cret_zero):
                        vals = [a() for a in args]
                        for (cells, wrap), v in zip(pcells, vals):
                            cells[0] = wrap(v) if wrap is not None else v
                        for cells, _, zero in lcells:
                            cells[0] = zero
                        cret[0] = z

                    store = None
                    if op.target is not None:
                        store = self._store(op.target, lambda cret=cret: cret[0])
                    out.append(("call", enter, op.func, store, succ[0]))
            elif k == "fire":
                out.append(("do", self._fire(op), succ[0]))
            else:
                raise TypeError(f"unknown node kind {k}")
        return out

    def _fire(self, op):
        machine = op.machine
        label = op.label
        table = {obj: self.objs[var].cells for obj, var in op.dispatch}
        order = list(op.dispatch)
        binder = self._expr(op.binder) if op.binder is not None else None

        def fire():
            if binder is None:
                targets = order
            else:
                p = binder()
                if p is None or p[0].name not in table:
                    return
                targets = [(p[0].name, None)]
            for obj, _ in targets:
                cells = table[obj]
                new, err = machine.fire_index(cells[0], label)
                if err is not None:
                    raise FaultSignal("assertion-failure",
                                      (machine.name, obj, err, machine.messages[err]))
                cells[0] = new

        return fire

    # ---------------------------------------------------------------- run
    def reset(self, inputs):
        inputs = dict(inputs or {})
        for f in self.cfg.functions.values():
            for p in f.func.params + f.func.locals:
                self.objs[f.func.qual(p.name)].cells[0] = 0 if p.ty.is_integral else None
            self.objs[f"{f.name}.$ret"].cells[0] = 0 if f.func.ret.is_integral else None
        lay = self.layout
        for r in lay.regions.values():
            o = self.objs[r.obj]
            for k in range(r.size):
                if r.symbolic:
                    wrap = self.wrap_for(r.elem)
                    o.cells[k] = wrap(inputs.get(r.cell_name(k), 0))
                else:
                    o.cells[k] = 0 if r.elem.is_integral else None
        for b in lay.bindings:
            cells = self.objs[b.qual].cells
            if b.how == "const":
                cells[0] = b.value if b.value is None else self.wrap_for(b.ty)(b.value)
            elif b.how == "input":
                cells[0] = self.wrap_for(b.ty)(inputs.get(b.value, 0))
            elif b.how in ("region", "nullable"):
                owner = b.qual.split(".", 1)[1] if "." in b.qual else b.qual
                if owner in inputs and inputs[owner] is None:
                    cells[0] = None
                elif b.how == "nullable" and not inputs.get(b.flag, 0):
                    cells[0] = None
                else:
                    reg = lay.regions[b.region]
                    cells[0] = (self.objs[reg.obj], reg.aim)
            elif b.how == "zero":
                cells[0] = 0 if b.ty.is_integral else None

    def run(self, inputs=None, step_budget=10_000, *, watch=None, observer=None,
            record_trace=True) -> RunResult:
        """Run the entry function.

        ``watch`` lists object names whose first cell is snapshotted on
        arrival at every node; ``observer(loc, interp)`` is called on
        arrival, before the node executes.
        """
        if step_budget < 1:
            raise ValueError("step_budget must be >= 1")
        self.reset(inputs)
        watch_cells = [self.objs[w].cells for w in (watch or ())]
        trace = []
        snaps = []
        frames = []  # (fname, code, node index to resume, store for lhs)
        fname = self.entry
        code = self._compiled[fname]
        idx = 0
        steps = 0
        result = None
        while True:
            if steps >= step_budget:
                result = RunResult("budget_exhausted", trace)
                break
            loc = LocationId(fname, idx)
            self.loc = loc
            steps += 1
            self.steps = steps
            if record_trace:
                trace.append(loc)
            if watch_cells:
                snaps.append(tuple(show(c[0]) for c in watch_cells))
            if observer is not None:
                observer(loc, self)
            ins = code[idx]
            tag = ins[0]
            try:
                if tag == "goto":
                    idx = ins[1]
                elif tag == "do":
                    ins[1]()
                    idx = ins[2]
                elif tag == "branch":
                    idx = ins[2] if ins[1]() else ins[3]
                elif tag == "call":
                    ins[1]()
                    frames.append((fname, code, ins[4], ins[3]))
                    fname = ins[2]
                    code = self._compiled[fname]
                    idx = 0
                else:  # exit
                    if not frames:
                        rv = self.objs[f"{fname}.$ret"].cells[0]
                        result = RunResult("returned", trace, return_value=show(rv))
                        break
                    fname, code, idx, store = frames.pop()
                    if store is not None:
                        store()
            except FaultSignal as sig:
                result = RunResult("fault", trace, Fault(sig.kind, loc, sig.detail))
                break
        result.steps = steps
        result.snapshots = snaps
        return result


def _ptr_eq(p, q):
    if p is None or q is None:
        return p is None and q is None
    return p[0] is q[0] and p[1] == q[1]


def interpret(cfg: ProgramCFG, entry: str, inputs=None, step_budget=10_000, *,
              int_width=32, ptr_elems=DEFAULT_PTR_ELEMS, null_params=False,
              watch=None, observer=None) -> RunResult:
    """One-shot convenience wrapper around :class:`Interpreter`."""
    it = Interpreter(cfg, entry, int_width=int_width, ptr_elems=ptr_elems,
                     null_params=null_params)
    return it.run(inputs, step_budget, watch=watch, observer=observer)
