"""Render a (possibly instrumented or sliced) ProgramCFG as MiniC source.

Statements are printed from the AST, and only when some node they lowered
to is still present in the CFG.  Fire nodes appear as calls to
``__fire_<label>`` pseudo-functions with matching prototypes, so the output
parses again.  In the re-parsed program those calls are no-op externs.
"""

from __future__ import annotations

from typing import Optional

from .frontend.cfg import ProgramCFG, reads
from .frontend.syntax import (
    AddrOf, Assign, Binary, Block, CallStmt, CType, Decl, Deref, Empty, If,
    Index, Null, Num, Return, Unary, Var, While, walk,
)

_PREC = {"||": 1, "&&": 2, "==": 3, "!=": 3, "<": 4, "<=": 4, ">": 4, ">=": 4,
         "+": 5, "-": 5, "*": 6}


def expr_str(e, parent=0) -> str:
    if isinstance(e, Num):
        return str(e.value)
    if isinstance(e, Null):
        return "NULL"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, AddrOf):
        return "&" + e.var.name
    if isinstance(e, Deref):
        return "*" + expr_str(e.ptr, 7)
    if isinstance(e, Index):
        return f"{expr_str(e.base, 8)}[{expr_str(e.index)}]"
    if isinstance(e, Unary):
        return e.op + expr_str(e.operand, 7)
    if isinstance(e, Binary):
        p = _PREC[e.op]
        s = f"{expr_str(e.left, p)} {e.op} {expr_str(e.right, p + 1)}"
        return f"({s})" if p < parent else s
    raise TypeError(type(e).__name__)


def decl_str(name, ty: CType) -> str:
    if ty.is_array:
        return f"{ty.base} {name}[{ty.size}]"
    stars = ""
    while ty.is_ptr:
        stars += "*"
        ty = ty.base
    return f"{ty} {stars}{name}"


def _fire_call(op):
    arg = expr_str(op.binder) if op.binder is not None else ""
    return f"__fire_{op.label}({arg});"


class _Printer:
    def __init__(self, cfg: ProgramCFG, cleanup: bool):
        self.cfg = cfg
        self.cleanup = cleanup
        self.lines = []
        self.used = set()
        self.called = set()
        self.fires = {}
        for f in cfg.functions.values():
            for n in f.nodes:
                for e in _node_exprs(n):
                    for x in walk(e):
                        if isinstance(x, Var):
                            self.used.add(x.qual)
                    self.used |= reads(e)
                if n.kind == "call":
                    self.called.add(n.op.func)
                if n.kind == "fire":
                    self.fires.setdefault(n.op.label, n.op)
                    self.used |= {v for _, v in n.op.dispatch}

    def emit(self, depth, text):
        self.lines.append("   " * depth + text)

    def program(self, header: Optional[str]):
        prog = self.cfg.program
        if header:
            for h in header.splitlines():
                self.emit(0, f"/* {h} */")
        protos = [f for f in prog.functions if f.is_extern
                  and (not self.cleanup or f.name in self.called)]
        for f in protos:
            self.emit(0, self.signature(f) + ";")
        for label, op in self.fires.items():
            if op.binder is not None:
                param = decl_str("x", op.binder.ty.decay())
            else:
                param = "void"
            self.emit(0, f"void __fire_{label}({param});")
        if protos or self.fires:
            self.emit(0, "")
        gl = [g for g in self.cfg.globals if not self.cleanup or g.name in self.used]
        for g in gl:
            init = ""
            if g.has_init:
                init = " = " + ("NULL" if g.init is None else str(g.init))
            self.emit(0, decl_str(g.name, g.ty) + init + ";")
        if gl:
            self.emit(0, "")
        for f in prog.functions:
            if f.is_extern or f.name not in self.cfg.functions:
                continue
            self.function(f)
            self.emit(0, "")
        while self.lines and not self.lines[-1]:
            self.lines.pop()
        return "\n".join(self.lines) + "\n"

    def signature(self, f):
        params = ", ".join(decl_str(p.name, p.ty) for p in f.params) or "void"
        return f"{decl_str(f.name, f.ret)}({params})"

    def function(self, f):
        self.g = self.cfg.functions[f.name]
        self.emit(0, self.signature(f) + " {")
        for l in f.locals:
            if not self.cleanup or f.qual(l.name) in self.used:
                self.emit(1, decl_str(l.name, l.ty) + ";")
        for s in f.body.stmts:
            self.stmt(s, 1)
        self.emit(0, "}")

    def nodes_of(self, s):
        idx = self.g.stmt_nodes.get(id(s), ())
        fires = [i for i in idx if self.g.nodes[i].kind == "fire"]
        rest = [i for i in idx if self.g.nodes[i].kind != "fire"]
        return fires, rest

    def stmt(self, s, d):
        if isinstance(s, Block):
            for x in s.stmts:
                self.stmt(x, d)
            return
        if isinstance(s, Empty):
            return
        fires, rest = self.nodes_of(s)
        for i in fires:
            self.emit(d, _fire_call(self.g.nodes[i].op))
        if isinstance(s, Decl):
            if rest and s.init is not None:
                self.emit(d, f"{s.name} = {expr_str(s.init)};")
        elif isinstance(s, Assign):
            if rest:
                self.emit(d, f"{expr_str(s.target)} = {expr_str(s.value)};")
        elif isinstance(s, CallStmt):
            if rest:
                call = f"{s.func}({', '.join(expr_str(a) for a in s.args)});"
                if s.target is not None:
                    call = f"{expr_str(s.target)} = {call}"
                self.emit(d, call)
        elif isinstance(s, Return):
            if rest:
                self.emit(d, "return;" if s.value is None else f"return {expr_str(s.value)};")
        elif isinstance(s, If):
            if not rest:
                self.stmt(s.then, d)
                if s.orelse is not None:
                    self.stmt(s.orelse, d)
                return
            self.emit(d, f"if ({expr_str(s.cond)}) {{")
            self.stmt(s.then, d + 1)
            if s.orelse is not None:
                self.emit(d, "} else {")
                self.stmt(s.orelse, d + 1)
            self.emit(d, "}")
        elif isinstance(s, While):
            if not rest:
                self.stmt(s.body, d)
                return
            self.emit(d, f"while ({expr_str(s.cond)}) {{")
            self.stmt(s.body, d + 1)
            self.emit(d, "}")


def _node_exprs(n):
    op = n.op
    if n.kind == "assign":
        return [op.target, op.value]
    if n.kind == "branch":
        return [op.cond]
    if n.kind == "return":
        return [op.value] if op.value is not None else []
    if n.kind == "call":
        return list(op.args) + ([op.target] if op.target is not None else [])
    if n.kind == "fire":
        return [op.binder] if op.binder is not None else []
    return []


def format_program(cfg: ProgramCFG, *, cleanup=False, header=None) -> str:
    """MiniC text for ``cfg``; ``cleanup`` drops declarations nothing uses."""
    return _Printer(cfg, cleanup).program(header)
