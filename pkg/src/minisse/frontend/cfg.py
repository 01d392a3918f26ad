"""Lowering of checked MiniC functions to control-flow graphs.

Each function gets an entry node (index 0) and an exit node (index 1);
statement nodes follow in source order.  ``&&``/``||`` are lowered into
chains of branch nodes so every branch tests a single atomic condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Dict, NamedTuple, Optional, Tuple

from .syntax import (
    INT, AddrOf, Assign, Binary, Block, CallStmt, Decl, Deref, Empty, Expr,
    Function, GlobalDecl, If, Index, MiniCProgram, Num, Return, Unary, Var,
    While, is_logical, walk,
)


class LocationId(NamedTuple):
    func: str
    index: int

    def __str__(self):
        return f"{self.func}:{self.index}"


@dataclass(frozen=True)
class AssignOp:
    target: Expr
    value: Expr


@dataclass(frozen=True)
class CallOp:
    target: Optional[Expr]
    func: str
    args: Tuple[Expr, ...]


@dataclass(frozen=True)
class ReturnOp:
    value: Optional[Expr]


@dataclass(frozen=True)
class BranchOp:
    cond: Expr


@dataclass(frozen=True)
class FireOp:
    """Fire one machine transition.

    ``binder`` is evaluated at run time; ``dispatch`` maps each tracked
    object to the global holding its machine state.  A ``None`` binder fires
    on every instance.
    """
    machine: object  # machines.MachineSpec
    label: str
    binder: Optional[Expr]
    dispatch: Tuple[Tuple[str, str], ...]


@dataclass(frozen=True)
class Node:
    index: int
    kind: str  # entry | exit | assign | call | return | branch | fire | nop
    op: object = None
    line: int = 0


@dataclass(frozen=True, eq=False)
class FunctionCFG:
    name: str
    func: Function
    nodes: Tuple[Node, ...]
    succs: Tuple[Tuple[int, ...], ...]
    # id(AST statement) -> node indices it lowered to; used by the printer.
    stmt_nodes: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))

    entry = 0
    exit = 1

    def __post_init__(self):
        preds = [[] for _ in self.nodes]
        for n, ss in enumerate(self.succs):
            for s in ss:
                if n not in preds[s]:
                    preds[s].append(n)
        object.__setattr__(self, "preds", tuple(tuple(p) for p in preds))

    def __len__(self):
        return len(self.nodes)

    def loc(self, index) -> LocationId:
        return LocationId(self.name, index)

    def branch_targets(self, n):
        """(true successor, false successor) of a branch node."""
        t, f = self.succs[n]
        return t, f

    def back_edges(self):
        """Edges (u, v) closing a cycle in a depth-first walk from entry."""
        colour = {}
        out = []
        stack = [(self.entry, iter(self.succs[self.entry]))]
        colour[self.entry] = 1
        while stack:
            n, it = stack[-1]
            for s in it:
                c = colour.get(s)
                if c is None:
                    colour[s] = 1
                    stack.append((s, iter(self.succs[s])))
                    break
                if c == 1:
                    out.append((n, s))
            else:
                colour[n] = 2
                stack.pop()
        return out

    def reverse_postorder(self):
        seen, order = set(), []
        stack = [(self.entry, iter(self.succs[self.entry]))]
        seen.add(self.entry)
        while stack:
            n, it = stack[-1]
            for s in it:
                if s not in seen:
                    seen.add(s)
                    stack.append((s, iter(self.succs[s])))
                    break
            else:
                order.append(n)
                stack.pop()
        order.reverse()
        return order


@dataclass(frozen=True, eq=False)
class ProgramCFG:
    program: MiniCProgram
    functions: Dict[str, FunctionCFG]
    globals: Tuple[GlobalDecl, ...]

    @property
    def signatures(self):
        return {f.name: f for f in self.program.functions}

    def is_extern(self, name):
        return name not in self.functions

    def node(self, loc: LocationId) -> Node:
        return self.functions[loc.func].nodes[loc.index]

    def locations(self):
        for f in self.functions.values():
            for n in f.nodes:
                yield f.loc(n.index)

    def global_decl(self, name) -> GlobalDecl:
        for g in self.globals:
            if g.name == name:
                return g
        raise KeyError(name)

    def call_graph(self):
        g = {name: [] for name in self.functions}
        for name, f in self.functions.items():
            for node in f.nodes:
                if node.kind == "call" and node.op.func in self.functions:
                    if node.op.func not in g[name]:
                        g[name].append(node.op.func)
        return g

    def callers(self, name):
        return [f for f, callees in self.call_graph().items() if name in callees]

    def topological_functions(self):
        """Defined functions, callers before callees, ties in source order."""
        g = self.call_graph()
        indeg = {f: 0 for f in g}
        for callees in g.values():
            for c in callees:
                indeg[c] += 1
        ready = [f for f in g if indeg[f] == 0]
        order = []
        while ready:
            f = ready.pop(0)
            order.append(f)
            for c in g[f]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        return order

    def reachable_functions(self, entry=None):
        """Defined functions reachable from ``entry`` (all of them if None)."""
        if entry is None:
            return list(self.functions)
        g = self.call_graph()
        seen, order, todo = {entry}, [], [entry]
        while todo:
            n = todo.pop(0)
            order.append(n)
            for m in g[n]:
                if m not in seen:
                    seen.add(m)
                    todo.append(m)
        return [f for f in self.functions if f in seen]

    def with_functions(self, functions, extra_globals=()):
        return ProgramCFG(self.program, functions, tuple(self.globals) + tuple(extra_globals))


class _Builder:
    def __init__(self, func: Function):
        self.func = func
        self.nodes = []  # (kind, op, line)
        self.succs = []
        self.stmt_nodes = {}
        self.new("entry", None, func.line)
        self.new("exit", None, func.end_line or func.line)

    def new(self, kind, op, line, stmt=None):
        idx = len(self.nodes)
        self.nodes.append((kind, op, line))
        self.succs.append([None, None] if kind == "branch" else ([] if kind == "exit" else [None]))
        if stmt is not None:
            self.stmt_nodes.setdefault(id(stmt), []).append(idx)
        return idx

    def connect(self, dangles, target):
        for n, slot in dangles:
            self.succs[n][slot] = target

    def cond(self, e: Expr, preds, stmt):
        """Lower a condition; returns (first node, true dangles, false dangles)."""
        if isinstance(e, Binary) and e.op == "&&":
            first, t, f = self.cond(e.left, preds, stmt)
            _, t2, f2 = self.cond(e.right, t, stmt)
            return first, t2, f + f2
        if isinstance(e, Binary) and e.op == "||":
            first, t, f = self.cond(e.left, preds, stmt)
            _, t2, f2 = self.cond(e.right, f, stmt)
            return first, t + t2, f2
        if isinstance(e, Unary) and e.op == "!" and is_logical(e.operand):
            first, t, f = self.cond(e.operand, preds, stmt)
            return first, f, t
        n = self.new("branch", BranchOp(e), e.line, stmt)
        self.connect(preds, n)
        return n, [(n, 0)], [(n, 1)]

    def assign(self, target, value, line, preds, stmt):
        if is_logical(value):
            _, t, f = self.cond(value, preds, stmt)
            a = self.new("assign", AssignOp(target, Num(1, ty=INT)), line, stmt)
            b = self.new("assign", AssignOp(target, Num(0, ty=INT)), line, stmt)
            self.connect(t, a)
            self.connect(f, b)
            return [(a, 0), (b, 0)]
        n = self.new("assign", AssignOp(target, value), line, stmt)
        self.connect(preds, n)
        return [(n, 0)]

    def stmt(self, s, preds):
        if isinstance(s, Block):
            for x in s.stmts:
                preds = self.stmt(x, preds)
            return preds
        if isinstance(s, Empty):
            return preds
        if isinstance(s, Decl):
            if s.init is None:
                return preds
            target = Var(s.name, qual=self.func.qual(s.name), ty=s.ty, line=s.line, col=s.col)
            return self.assign(target, s.init, s.line, preds, s)
        if isinstance(s, Assign):
            return self.assign(s.target, s.value, s.line, preds, s)
        if isinstance(s, CallStmt):
            n = self.new("call", CallOp(s.target, s.func, s.args), s.line, s)
            self.connect(preds, n)
            return [(n, 0)]
        if isinstance(s, Return):
            n = self.new("return", ReturnOp(s.value), s.line, s)
            self.connect(preds, n)
            self.succs[n][0] = 1
            return []
        if isinstance(s, If):
            _, t, f = self.cond(s.cond, preds, s)
            out = self.stmt(s.then, t)
            out_else = self.stmt(s.orelse, f) if s.orelse is not None else f
            return out + out_else
        if isinstance(s, While):
            first, t, f = self.cond(s.cond, preds, s)
            body_out = self.stmt(s.body, t)
            self.connect(body_out, first)
            return f
        raise TypeError(f"cannot lower {type(s).__name__}")

    def finish(self) -> FunctionCFG:
        out = self.stmt(self.func.body, [(0, 0)])
        self.connect(out, 1)
        # drop nodes unreachable from entry (code after return); keep exit
        reach = {0}
        todo = [0]
        while todo:
            n = todo.pop()
            for s in self.succs[n]:
                if s not in reach:
                    reach.add(s)
                    todo.append(s)
        reach.add(1)
        remap = {}
        for old in range(len(self.nodes)):
            if old in reach:
                remap[old] = len(remap)
        nodes, succs = [], []
        for old, new in remap.items():
            kind, op, line = self.nodes[old]
            nodes.append(Node(new, kind, op, line))
            succs.append(tuple(remap[s] for s in self.succs[old]))
        stmt_nodes = {
            k: tuple(remap[v] for v in vs if v in remap) for k, vs in self.stmt_nodes.items()
        }
        return FunctionCFG(self.func.name, self.func, tuple(nodes), tuple(succs),
                           MappingProxyType(stmt_nodes))


def build_cfg(program: MiniCProgram) -> ProgramCFG:
    functions = {}
    for f in program.functions:
        if not f.is_extern:
            functions[f.name] = _Builder(f).finish()
    return ProgramCFG(program, functions, tuple(program.globals))


def check_cfg(cfg: ProgramCFG):
    """Assert the structural invariants; returns a list of problems."""
    problems = []
    for name, f in cfg.functions.items():
        kinds = [n.kind for n in f.nodes]
        if kinds.count("entry") != 1 or kinds[0] != "entry":
            problems.append(f"{name}: entry must be unique and first")
        if kinds.count("exit") != 1 or kinds[1] != "exit":
            problems.append(f"{name}: exit must be unique and second")
        for n in f.nodes:
            if n.index != f.nodes.index(n):
                problems.append(f"{name}: non-dense index {n.index}")
            arity = len(f.succs[n.index])
            want = 2 if n.kind == "branch" else (0 if n.kind == "exit" else 1)
            if arity != want:
                problems.append(f"{name}:{n.index} {n.kind} has {arity} successors")
            if n.kind == "return" and f.succs[n.index] != (f.exit,):
                problems.append(f"{name}:{n.index} return not routed to exit")
        seen = {0}
        todo = [0]
        while todo:
            x = todo.pop()
            for s in f.succs[x]:
                if s not in seen:
                    seen.add(s)
                    todo.append(s)
        for n in f.nodes:
            if n.index not in seen and n.kind != "exit":
                problems.append(f"{name}:{n.index} unreachable")
    return problems


# ------------------------------------------------------------ def/use helpers


def reads(e: Expr):
    """Qualified names of variables whose value ``e`` reads directly.

    ``&x`` and array names do not read anything; memory read through
    pointers is reported separately by :func:`derefs`.
    """
    out = set()
    _reads(e, out)
    return out


def _reads(e, out):
    if isinstance(e, Var):
        if not e.ty.is_array:
            out.add(e.qual)
    elif isinstance(e, AddrOf):
        pass
    elif isinstance(e, Deref):
        _reads(e.ptr, out)
    elif isinstance(e, Index):
        _reads(e.base, out)
        _reads(e.index, out)
    elif isinstance(e, Unary):
        _reads(e.operand, out)
    elif isinstance(e, Binary):
        _reads(e.left, out)
        _reads(e.right, out)


def derefs(e: Expr):
    """Sub-expressions that load memory (``*p`` and ``p[i]``)."""
    return [x for x in walk(e) if isinstance(x, (Deref, Index))]


def base_pointer(e: Expr) -> Expr:
    """The address-valued expression a ``Deref``/``Index`` goes through."""
    return e.ptr if isinstance(e, Deref) else e.base
