"""MiniC types and abstract syntax.

All nodes are frozen dataclasses.  The checker fills in ``ty`` on
expressions and ``qual`` on variable references by building new nodes with
:func:`dataclasses.replace`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple


@dataclass(frozen=True)
class CType:
    kind: str  # 'int' | 'char' | 'void' | 'ptr' | 'array' | 'null'
    base: Optional["CType"] = None
    size: Optional[int] = None

    def __str__(self):
        if self.kind == "ptr":
            return f"{self.base}*"
        if self.kind == "array":
            return f"{self.base}[{self.size}]"
        return self.kind

    @property
    def is_ptr(self):
        return self.kind == "ptr"

    @property
    def is_array(self):
        return self.kind == "array"

    @property
    def is_integral(self):
        return self.kind in ("int", "char")

    @property
    def is_address(self):
        return self.kind in ("ptr", "null")

    def decay(self):
        return CType("ptr", self.base) if self.kind == "array" else self


INT = CType("int")
CHAR = CType("char")
VOID = CType("void")
NULLT = CType("null")


def ptr(t: CType) -> CType:
    return CType("ptr", t)


# ---------------------------------------------------------------- expressions


@dataclass(frozen=True)
class Expr:
    line: int = field(default=0, compare=False, kw_only=True)
    col: int = field(default=0, compare=False, kw_only=True)
    ty: Optional[CType] = field(default=None, compare=False, kw_only=True)


@dataclass(frozen=True)
class Num(Expr):
    value: int


@dataclass(frozen=True)
class Null(Expr):
    pass


@dataclass(frozen=True)
class Var(Expr):
    name: str
    # Qualified object name: globals keep their name, locals/params become
    # ``func.name``.  Empty until checked.
    qual: str = ""


@dataclass(frozen=True)
class AddrOf(Expr):
    var: Var


@dataclass(frozen=True)
class Deref(Expr):
    ptr: Expr


@dataclass(frozen=True)
class Index(Expr):
    base: Expr
    index: Expr


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # '-' | '!'
    operand: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class CallExpr(Expr):
    func: str
    args: Tuple[Expr, ...]


LOGICAL_OPS = ("&&", "||")
COMPARE_OPS = ("<", "<=", ">", ">=", "==", "!=")
ARITH_OPS = ("+", "-", "*")


def is_logical(e: Expr) -> bool:
    """True if ``e`` needs short-circuit lowering."""
    if isinstance(e, Binary) and e.op in LOGICAL_OPS:
        return True
    if isinstance(e, Unary) and e.op == "!":
        return is_logical(e.operand)
    return False


def walk(e: Expr):
    """Pre-order iteration over an expression tree."""
    yield e
    if isinstance(e, AddrOf):
        yield from walk(e.var)
    elif isinstance(e, Deref):
        yield from walk(e.ptr)
    elif isinstance(e, Index):
        yield from walk(e.base)
        yield from walk(e.index)
    elif isinstance(e, Unary):
        yield from walk(e.operand)
    elif isinstance(e, Binary):
        yield from walk(e.left)
        yield from walk(e.right)
    elif isinstance(e, CallExpr):
        for a in e.args:
            yield from walk(a)


# ----------------------------------------------------------------- statements


@dataclass(frozen=True)
class Stmt:
    line: int = field(default=0, compare=False, kw_only=True)
    col: int = field(default=0, compare=False, kw_only=True)


@dataclass(frozen=True)
class Decl(Stmt):
    name: str
    ty: CType
    init: Optional[Expr] = None


@dataclass(frozen=True)
class Assign(Stmt):
    target: Expr
    value: Expr


@dataclass(frozen=True)
class CallStmt(Stmt):
    target: Optional[Expr]
    func: str
    args: Tuple[Expr, ...]


@dataclass(frozen=True)
class Block(Stmt):
    stmts: Tuple[Stmt, ...]
    end_line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class If(Stmt):
    cond: Expr
    then: Stmt
    orelse: Optional[Stmt] = None


@dataclass(frozen=True)
class While(Stmt):
    cond: Expr
    body: Stmt


@dataclass(frozen=True)
class Return(Stmt):
    value: Optional[Expr] = None


@dataclass(frozen=True)
class Empty(Stmt):
    pass


# -------------------------------------------------------------- declarations


@dataclass(frozen=True)
class GlobalDecl:
    name: str
    ty: CType
    init: Optional[int] = None  # constant; None means uninitialized
    has_init: bool = False
    line: int = 0


@dataclass(frozen=True)
class Param:
    name: str
    ty: CType


@dataclass(frozen=True)
class Function:
    name: str
    ret: CType
    params: Tuple[Param, ...]
    body: Optional[Block]  # None for extern declarations
    locals: Tuple[Param, ...] = ()
    line: int = 0
    end_line: int = 0

    @property
    def is_extern(self):
        return self.body is None

    def qual(self, name):
        return f"{self.name}.{name}"


@dataclass(frozen=True)
class MiniCProgram:
    globals: Tuple[GlobalDecl, ...] = ()
    functions: Tuple[Function, ...] = ()
    source: str = field(default="", compare=False, repr=False)

    def function(self, name) -> Function:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def global_decl(self, name) -> GlobalDecl:
        for g in self.globals:
            if g.name == name:
                return g
        raise KeyError(name)

    @property
    def defined(self):
        return tuple(f for f in self.functions if not f.is_extern)
