"""Symbolic values: fixed-width integer terms and boolean formulas.

Integer terms wrap at their ``width`` (``0`` means unbounded, used for
pointer offsets).  Smart constructors fold constants, so a term with no
symbols is always a :class:`Const` and a formula with no symbols is a
:class:`BoolConst`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Tuple, Union


def wrap(v: int, bits: int) -> int:
    if not bits:
        return v
    v &= (1 << bits) - 1
    return v - (1 << bits) if v >> (bits - 1) else v


class Term:
    __slots__ = ()


@dataclass(frozen=True)
class Const(Term):
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class Sym(Term):
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class BinOp(Term):
    op: str  # '+' | '-' | '*'
    a: Term
    b: Term
    width: int

    def __str__(self):
        return f"({self.a} {self.op} {self.b})"


@dataclass(frozen=True)
class Cast(Term):
    a: Term
    width: int

    def __str__(self):
        return f"(i{self.width})({self.a})"


@dataclass(frozen=True)
class Ite(Term):
    cond: "Formula"
    then: Term
    orelse: Term

    def __str__(self):
        return f"({self.cond} ? {self.then} : {self.orelse})"


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class BoolConst(Formula):
    value: bool

    def __str__(self):
        return "true" if self.value else "false"


@dataclass(frozen=True)
class Cmp(Formula):
    op: str  # '<' '<=' '>' '>=' '==' '!='
    a: Term
    b: Term

    def __str__(self):
        return f"{self.a} {self.op} {self.b}"


@dataclass(frozen=True)
class Not(Formula):
    a: Formula

    def __str__(self):
        return f"!({self.a})"


@dataclass(frozen=True)
class And(Formula):
    args: Tuple[Formula, ...]

    def __str__(self):
        return "(" + " && ".join(map(str, self.args)) + ")"


@dataclass(frozen=True)
class Or(Formula):
    args: Tuple[Formula, ...]

    def __str__(self):
        return "(" + " || ".join(map(str, self.args)) + ")"


TRUE = BoolConst(True)
FALSE = BoolConst(False)
Expr = Union[Term, Formula]

_CMP = {
    "<": lambda x, y: x < y, "<=": lambda x, y: x <= y,
    ">": lambda x, y: x > y, ">=": lambda x, y: x >= y,
    "==": lambda x, y: x == y, "!=": lambda x, y: x != y,
}
_NEGATE = {"<": ">=", ">=": "<", ">": "<=", "<=": ">", "==": "!=", "!=": "=="}
_FLIP = {"<": ">", ">": "<", "<=": ">=", ">=": "<=", "==": "==", "!=": "!="}


# ------------------------------------------------------------- constructors


def const(v: int, width: int = 0) -> Const:
    return Const(wrap(v, width))


def binop(op: str, a: Term, b: Term, width: int) -> Term:
    if isinstance(a, Const) and isinstance(b, Const):
        if op == "+":
            return Const(wrap(a.value + b.value, width))
        if op == "-":
            return Const(wrap(a.value - b.value, width))
        return Const(wrap(a.value * b.value, width))
    if op == "+":
        if isinstance(a, Const) and a.value == 0:
            return b
        if isinstance(b, Const) and b.value == 0:
            return a
    if op == "-" and isinstance(b, Const) and b.value == 0:
        return a
    if op == "*":
        for x, y in ((a, b), (b, a)):
            if isinstance(x, Const) and x.value == 0:
                return Const(0)
            if isinstance(x, Const) and x.value == 1:
                return y
    return BinOp(op, a, b, width)


def cast(a: Term, width: int) -> Term:
    if isinstance(a, Const):
        return Const(wrap(a.value, width))
    if isinstance(a, (BinOp, Cast)) and a.width and a.width <= width:
        return a
    if isinstance(a, Ite) and isinstance(a.then, Const) and isinstance(a.orelse, Const):
        return ite(a.cond, cast(a.then, width), cast(a.orelse, width))
    return Cast(a, width)


def ite(c: Formula, a: Term, b: Term) -> Term:
    if isinstance(c, BoolConst):
        return a if c.value else b
    if a == b:
        return a
    return Ite(c, a, b)


def cmp(op: str, a: Term, b: Term) -> Formula:
    if isinstance(a, Const) and isinstance(b, Const):
        return TRUE if _CMP[op](a.value, b.value) else FALSE
    if isinstance(a, Const):
        return cmp(_FLIP[op], b, a)
    # (c ? 1 : 0) compared against a constant folds into c or !c
    if isinstance(a, Ite) and isinstance(b, Const) and isinstance(a.then, Const) \
            and isinstance(a.orelse, Const):
        t = _CMP[op](a.then.value, b.value)
        f = _CMP[op](a.orelse.value, b.value)
        if t and f:
            return TRUE
        if not t and not f:
            return FALSE
        return a.cond if t else not_(a.cond)
    if a == b:
        return TRUE if op in ("==", "<=", ">=") else FALSE
    return Cmp(op, a, b)


def not_(f: Formula) -> Formula:
    if isinstance(f, BoolConst):
        return FALSE if f.value else TRUE
    if isinstance(f, Not):
        return f.a
    if isinstance(f, Cmp):
        return Cmp(_NEGATE[f.op], f.a, f.b)
    return Not(f)


def and_(*fs: Formula) -> Formula:
    out = []
    for f in fs:
        if f == TRUE:
            continue
        if f == FALSE:
            return FALSE
        out.extend(f.args if isinstance(f, And) else [f])
    if not out:
        return TRUE
    return out[0] if len(out) == 1 else And(tuple(out))


def or_(*fs: Formula) -> Formula:
    out = []
    for f in fs:
        if f == FALSE:
            continue
        if f == TRUE:
            return TRUE
        out.extend(f.args if isinstance(f, Or) else [f])
    if not out:
        return FALSE
    return out[0] if len(out) == 1 else Or(tuple(out))


def truth(t: Term) -> Formula:
    """The formula ``t != 0``."""
    return cmp("!=", t, Const(0))


def bool_term(f: Formula) -> Term:
    """0/1 integer value of a formula."""
    return ite(f, Const(1), Const(0))


# -------------------------------------------------------------- inspection


def evaluate(e: Expr, model: Dict[str, int]):
    """Value of ``e`` under ``model`` (missing symbols raise KeyError)."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Sym):
        return model[e.name]
    if isinstance(e, BinOp):
        x, y = evaluate(e.a, model), evaluate(e.b, model)
        v = x + y if e.op == "+" else (x - y if e.op == "-" else x * y)
        return wrap(v, e.width)
    if isinstance(e, Cast):
        return wrap(evaluate(e.a, model), e.width)
    if isinstance(e, Ite):
        return evaluate(e.then if evaluate(e.cond, model) else e.orelse, model)
    if isinstance(e, BoolConst):
        return e.value
    if isinstance(e, Cmp):
        return _CMP[e.op](evaluate(e.a, model), evaluate(e.b, model))
    if isinstance(e, Not):
        return not evaluate(e.a, model)
    if isinstance(e, And):
        return all(evaluate(a, model) for a in e.args)
    if isinstance(e, Or):
        return any(evaluate(a, model) for a in e.args)
    raise TypeError(type(e).__name__)


@lru_cache(maxsize=65536)
def symbols(e: Expr) -> frozenset:
    if isinstance(e, Sym):
        return frozenset([e.name])
    if isinstance(e, (Const, BoolConst)):
        return frozenset()
    out = set()
    for c in children(e):
        out |= symbols(c)
    return frozenset(out)


def constants(e: Expr) -> set:
    if isinstance(e, Const):
        return {e.value}
    out = set()
    for c in children(e):
        out |= constants(c)
    return out


def children(e: Expr):
    if isinstance(e, (BinOp,)):
        return (e.a, e.b)
    if isinstance(e, Cast):
        return (e.a,)
    if isinstance(e, Ite):
        return (e.cond, e.then, e.orelse)
    if isinstance(e, Cmp):
        return (e.a, e.b)
    if isinstance(e, Not):
        return (e.a,)
    if isinstance(e, (And, Or)):
        return e.args
    return ()
