"""Recursive-descent parser and type checker for MiniC."""

from __future__ import annotations

from dataclasses import replace

from ..errors import MiniCSyntaxError, MiniCTypeError, UnsupportedError
from .lexer import Token, tokenize
from .syntax import (
    ARITH_OPS, CHAR, COMPARE_OPS, INT, LOGICAL_OPS, NULLT, VOID,
    AddrOf, Assign, Binary, Block, CallExpr, CallStmt, CType, Decl, Deref,
    Empty, Expr, Function, GlobalDecl, If, Index, MiniCProgram, Null, Num,
    Param, Return, Stmt, Unary, Var, While, is_logical, ptr,
)

_BINARY_PREC = [
    ("||",),
    ("&&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("+", "-"),
    ("*",),
]


class _Parser:
    def __init__(self, source):
        self.toks = tokenize(source)
        self.i = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, *texts):
        t = self.tok
        return t.kind in ("op", "kw") and t.text in texts

    def advance(self):
        t = self.tok
        self.i += 1
        return t

    def expect(self, text):
        if not self.at(text):
            self.error(f"expected '{text}'")
        return self.advance()

    def expect_ident(self):
        if self.tok.kind != "ident":
            self.error("expected identifier")
        return self.advance()

    def error(self, msg, tok=None):
        t = tok or self.tok
        found = t.text or "end of input"
        raise MiniCSyntaxError(f"{msg}, found '{found}'", t.line, t.col)

    # -- top level
    def program(self):
        globals_, functions = [], []
        while self.tok.kind != "eof":
            self.top_level(globals_, functions)
        return globals_, functions

    def base_type(self):
        if not self.at("int", "char", "void"):
            self.error("expected type")
        t = self.advance()
        return {"int": INT, "char": CHAR, "void": VOID}[t.text]

    def pointers(self, ty):
        while self.at("*"):
            self.advance()
            ty = ptr(ty)
        return ty

    def top_level(self, globals_, functions):
        start = self.tok
        if self.at("extern"):
            self.advance()
        base = self.base_type()
        ty = self.pointers(base)
        name = self.expect_ident()
        if self.at("("):
            functions.append(self.function_rest(ty, name, start))
            return
        while True:
            globals_.append(self.global_declarator(base, ty, name))
            if self.at(","):
                self.advance()
                ty = self.pointers(base)
                name = self.expect_ident()
                continue
            self.expect(";")
            return

    def global_declarator(self, base, ty, name):
        if self.at("["):
            self.advance()
            if self.tok.kind != "num":
                self.error("expected array size")
            size = self.advance().value
            self.expect("]")
            if ty.kind not in ("int", "char") or size <= 0:
                raise MiniCTypeError("arrays must have int or char elements and positive size",
                                     name.line, name.col)
            ty = CType("array", ty, size)
        init, has_init = None, False
        if self.at("="):
            self.advance()
            init, has_init = self.constant(), True
        if ty.kind == "void":
            raise MiniCTypeError(f"variable '{name.text}' declared void", name.line, name.col)
        return (name, ty, init, has_init)

    def constant(self):
        neg = False
        if self.at("-"):
            self.advance()
            neg = True
        t = self.tok
        if t.kind in ("num", "char"):
            self.advance()
            return -t.value if neg else t.value
        if self.at("NULL") and not neg:
            self.advance()
            return None
        self.error("expected constant initializer")

    def function_rest(self, ret, name, start):
        self.expect("(")
        params = []
        if self.at("void") and self.peek().text == ")":
            self.advance()
        elif not self.at(")"):
            while True:
                pty = self.pointers(self.base_type())
                pname = self.expect_ident()
                if pty.kind == "void":
                    raise MiniCTypeError(f"parameter '{pname.text}' declared void",
                                         pname.line, pname.col)
                params.append((pname, pty))
                if self.at(","):
                    self.advance()
                    continue
                break
        self.expect(")")
        body = None
        if self.at(";"):
            self.advance()
        else:
            body = self.block()
        return (name, ret, params, body, start.line)

    # -- statements
    def block(self):
        lb = self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.error("expected '}'")
            stmts.extend(self.statement())
        rb = self.advance()
        return Block(tuple(stmts), end_line=rb.line, line=lb.line, col=lb.col)

    def statement(self):
        t = self.tok
        pos = dict(line=t.line, col=t.col)
        if self.at("{"):
            return [self.block()]
        if self.at(";"):
            self.advance()
            return [Empty(**pos)]
        if self.at("int", "char", "void"):
            return self.local_decls()
        if self.at("if"):
            self.advance()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            then = self.single_statement()
            orelse = None
            if self.at("else"):
                self.advance()
                orelse = self.single_statement()
            return [If(cond, then, orelse, **pos)]
        if self.at("while"):
            self.advance()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            return [While(cond, self.single_statement(), **pos)]
        if self.at("return"):
            self.advance()
            value = None if self.at(";") else self.expr()
            self.expect(";")
            return [Return(value, **pos)]
        return [self.simple_statement()]

    def single_statement(self):
        stmts = self.statement()
        if len(stmts) == 1:
            return stmts[0]
        t = self.tok
        return Block(tuple(stmts), end_line=t.line, line=stmts[0].line, col=stmts[0].col)

    def local_decls(self):
        base = self.base_type()
        out = []
        while True:
            ty = self.pointers(base)
            name = self.expect_ident()
            if self.at("["):
                raise UnsupportedError("arrays are only allowed at global scope",
                                       name.line, name.col)
            init = None
            if self.at("="):
                self.advance()
                init = self.expr()
            if isinstance(init, CallExpr):
                out.append(Decl(name.text, ty, None, line=name.line, col=name.col))
                out.append(CallStmt(Var(name.text, line=name.line, col=name.col), init.func,
                                    init.args, line=name.line, col=name.col))
            else:
                out.append(Decl(name.text, ty, init, line=name.line, col=name.col))
            if self.at(","):
                self.advance()
                continue
            self.expect(";")
            return out

    def simple_statement(self):
        t = self.tok
        pos = dict(line=t.line, col=t.col)
        lhs = self.expr()
        if self.at("="):
            self.advance()
            rhs = self.expr()
            self.expect(";")
            if isinstance(rhs, CallExpr):
                return CallStmt(lhs, rhs.func, rhs.args, **pos)
            return Assign(lhs, rhs, **pos)
        if self.at("+=", "-="):
            op = self.advance().text[0]
            rhs = self.expr()
            self.expect(";")
            return Assign(lhs, Binary(op, lhs, rhs, line=t.line, col=t.col), **pos)
        if self.at("++", "--"):
            op = self.advance().text[0]
            self.expect(";")
            return Assign(lhs, Binary(op, lhs, Num(1, line=t.line, col=t.col),
                                      line=t.line, col=t.col), **pos)
        self.expect(";")
        if isinstance(lhs, CallExpr):
            return CallStmt(None, lhs.func, lhs.args, **pos)
        raise UnsupportedError("expression statement without effect", t.line, t.col)

    # -- expressions
    def expr(self, level=0):
        if level == len(_BINARY_PREC):
            return self.unary()
        left = self.expr(level + 1)
        while self.tok.kind == "op" and self.tok.text in _BINARY_PREC[level]:
            op = self.advance()
            right = self.expr(level + 1)
            left = Binary(op.text, left, right, line=op.line, col=op.col)
        return left

    def unary(self):
        t = self.tok
        pos = dict(line=t.line, col=t.col)
        if self.at("-"):
            self.advance()
            operand = self.unary()
            if isinstance(operand, Num):
                return Num(-operand.value, **pos)
            return Unary("-", operand, **pos)
        if self.at("!"):
            self.advance()
            return Unary("!", self.unary(), **pos)
        if self.at("*"):
            self.advance()
            return Deref(self.unary(), **pos)
        if self.at("&"):
            self.advance()
            operand = self.unary()
            if not isinstance(operand, Var):
                raise UnsupportedError("'&' applies to plain variables only", t.line, t.col)
            return AddrOf(operand, **pos)
        if self.at("++", "--"):
            raise UnsupportedError("prefix increment is not part of MiniC", t.line, t.col)
        return self.postfix()

    def postfix(self):
        e = self.primary()
        while self.at("["):
            t = self.advance()
            idx = self.expr()
            self.expect("]")
            e = Index(e, idx, line=t.line, col=t.col)
        return e

    def primary(self):
        t = self.tok
        pos = dict(line=t.line, col=t.col)
        if t.kind == "num":
            self.advance()
            return Num(t.value, **pos)
        if t.kind == "char":
            self.advance()
            return Num(t.value, ty=CHAR, **pos)
        if self.at("NULL"):
            self.advance()
            return Null(**pos)
        if t.kind == "ident":
            self.advance()
            if self.at("("):
                self.advance()
                args = []
                if not self.at(")"):
                    while True:
                        args.append(self.expr())
                        if self.at(","):
                            self.advance()
                            continue
                        break
                self.expect(")")
                return CallExpr(t.text, tuple(args), **pos)
            return Var(t.text, **pos)
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        self.error("expected expression")


# ---------------------------------------------------------------- checker


def _assignable(dst: CType, src: CType) -> bool:
    if dst.is_integral:
        return src.is_integral
    if dst.is_ptr:
        src = src.decay()
        return src.kind == "null" or src == dst
    return False


class _Checker:
    def __init__(self, globals_, functions):
        self.raw_globals = globals_
        self.raw_functions = functions
        self.globals = {}
        self.sigs = {}

    def run(self):
        gdecls = []
        for name, ty, init, has_init in self.raw_globals:
            if name.text in self.globals:
                raise MiniCTypeError(f"redeclaration of '{name.text}'", name.line, name.col)
            if has_init:
                if ty.is_array:
                    raise UnsupportedError("array initializers are not supported",
                                           name.line, name.col)
                if init is None and not ty.is_ptr:
                    raise MiniCTypeError("NULL initializer for non-pointer", name.line, name.col)
                if init is not None and ty.is_ptr:
                    raise MiniCTypeError("pointer globals may only be initialized to NULL",
                                         name.line, name.col)
            g = GlobalDecl(name.text, ty, init, has_init, name.line)
            self.globals[name.text] = g
            gdecls.append(g)

        order = []
        for name, ret, params, body, line in self.raw_functions:
            fname = name.text
            if fname in self.globals:
                raise MiniCTypeError(f"'{fname}' redeclared as function", name.line, name.col)
            ps = tuple(Param(p.text, t) for p, t in params)
            seen = set()
            for p, _ in params:
                if p.text in seen:
                    raise MiniCTypeError(f"duplicate parameter '{p.text}'", p.line, p.col)
                seen.add(p.text)
            prev = self.sigs.get(fname)
            if prev is not None:
                if prev[0] != ret or tuple(p.ty for p in prev[1]) != tuple(p.ty for p in ps):
                    raise MiniCTypeError(f"conflicting types for '{fname}'", name.line, name.col)
                if prev[2] and body is not None:
                    raise MiniCTypeError(f"redefinition of '{fname}'", name.line, name.col)
                self.sigs[fname] = (ret, ps, prev[2] or body is not None)
            else:
                self.sigs[fname] = (ret, ps, body is not None)
                order.append(fname)

        bodies = {}
        for name, ret, params, body, line in self.raw_functions:
            if body is not None:
                bodies[name.text] = (body, line)

        functions = []
        for fname in order:
            ret, ps, _ = self.sigs[fname]
            if fname in bodies:
                body, line = bodies[fname]
                functions.append(self.check_function(fname, ret, ps, body, line))
            else:
                functions.append(Function(fname, ret, ps, None))
        self.check_recursion(functions)
        return gdecls, functions

    # -- functions
    def check_function(self, fname, ret, params, body, line):
        self.fname = fname
        self.ret = ret
        self.scope = {}
        for p in params:
            if p.name in self.globals or p.name in self.sigs:
                raise MiniCTypeError(f"parameter '{p.name}' shadows a global", line, 1)
            self.scope[p.name] = p.ty
        self.locals = []
        checked = self.stmt(body)
        return Function(fname, ret, params, checked, tuple(self.locals), line, body.end_line)

    def stmt(self, s: Stmt):
        if isinstance(s, Block):
            return replace(s, stmts=tuple(self.stmt(x) for x in s.stmts))
        if isinstance(s, Empty):
            return s
        if isinstance(s, Decl):
            if s.name in self.scope or s.name in self.globals or s.name in self.sigs:
                raise MiniCTypeError(f"redeclaration of '{s.name}'", s.line, s.col)
            if s.ty.kind == "void":
                raise MiniCTypeError(f"variable '{s.name}' declared void", s.line, s.col)
            self.scope[s.name] = s.ty
            self.locals.append(Param(s.name, s.ty))
            init = None
            if s.init is not None:
                init = self.value_or_logical(s.init)
                self.require_assignable(s.ty, init.ty, s)
            return replace(s, init=init)
        if isinstance(s, Assign):
            target = self.lvalue(s.target)
            value = self.value_or_logical(s.value)
            self.require_assignable(target.ty, value.ty, s)
            return replace(s, target=target, value=value)
        if isinstance(s, CallStmt):
            return self.call(s)
        if isinstance(s, If):
            return replace(s, cond=self.cond(s.cond), then=self.stmt(s.then),
                           orelse=None if s.orelse is None else self.stmt(s.orelse))
        if isinstance(s, While):
            return replace(s, cond=self.cond(s.cond), body=self.stmt(s.body))
        if isinstance(s, Return):
            if s.value is None:
                if self.ret.kind != "void":
                    raise MiniCTypeError("non-void function must return a value", s.line, s.col)
                return s
            if self.ret.kind == "void":
                raise MiniCTypeError("void function cannot return a value", s.line, s.col)
            if isinstance(s.value, CallExpr):
                raise UnsupportedError("call in return expression; assign it first",
                                       s.line, s.col)
            v = self.value(s.value)
            self.require_assignable(self.ret, v.ty, s)
            return replace(s, value=v)
        raise UnsupportedError(f"unsupported statement {type(s).__name__}", s.line, s.col)

    def call(self, s: CallStmt):
        sig = self.sigs.get(s.func)
        if sig is None:
            raise MiniCTypeError(f"'{s.func}' undeclared", s.line, s.col)
        ret, params, _ = sig
        if len(params) != len(s.args):
            raise MiniCTypeError(
                f"'{s.func}' expects {len(params)} arguments, got {len(s.args)}", s.line, s.col)
        args = []
        for p, a in zip(params, s.args):
            av = self.value(a)
            self.require_assignable(p.ty, av.ty, a)
            args.append(av)
        target = None
        if s.target is not None:
            target = self.lvalue(s.target)
            if ret.kind == "void":
                raise MiniCTypeError(f"'{s.func}' returns void", s.line, s.col)
            self.require_assignable(target.ty, ret, s)
        return replace(s, target=target, args=tuple(args))

    def require_assignable(self, dst, src, node):
        if not _assignable(dst, src):
            raise MiniCTypeError(f"cannot assign {src} to {dst}", node.line, node.col)

    def check_recursion(self, functions):
        graph = {f.name: set() for f in functions}
        for f in functions:
            if f.body is not None:
                for s in _iter_stmts(f.body):
                    if isinstance(s, CallStmt):
                        graph[f.name].add(s.func)
        state = {}

        def visit(n, stack):
            state[n] = 1
            for m in sorted(graph.get(n, ())):
                if state.get(m) == 1:
                    cycle = " -> ".join(stack[stack.index(m):] + [m])
                    raise UnsupportedError(f"recursion is not supported: {cycle}")
                if m not in state:
                    visit(m, stack + [m])
            state[n] = 2

        for f in functions:
            if f.name not in state:
                visit(f.name, [f.name])

    # -- expressions
    def lvalue(self, e: Expr):
        if isinstance(e, Var):
            v = self.var(e)
            if v.ty.is_array:
                raise MiniCTypeError("array is not assignable", e.line, e.col)
            return v
        if isinstance(e, (Deref, Index)):
            return self.value(e)
        raise MiniCTypeError("expression is not assignable", e.line, e.col)

    def cond(self, e: Expr):
        """Check a branch condition; logical operators are allowed anywhere."""
        if isinstance(e, Binary) and e.op in LOGICAL_OPS:
            return replace(e, left=self.cond(e.left), right=self.cond(e.right), ty=INT)
        if isinstance(e, Unary) and e.op == "!" and is_logical(e.operand):
            return replace(e, operand=self.cond(e.operand), ty=INT)
        v = self.value(e)
        if not (v.ty.is_integral or v.ty.is_address):
            raise MiniCTypeError(f"condition of type {v.ty}", e.line, e.col)
        return v

    def value_or_logical(self, e: Expr):
        return self.cond(e) if is_logical(e) else self.value(e)

    def var(self, e: Var):
        if e.name in self.scope:
            return replace(e, qual=f"{self.fname}.{e.name}", ty=self.scope[e.name])
        if e.name in self.globals:
            return replace(e, qual=e.name, ty=self.globals[e.name].ty)
        raise MiniCTypeError(f"'{e.name}' undeclared", e.line, e.col)

    def value(self, e: Expr) -> Expr:
        if isinstance(e, Num):
            return replace(e, ty=e.ty or INT)
        if isinstance(e, Null):
            return replace(e, ty=NULLT)
        if isinstance(e, Var):
            return self.var(e)
        if isinstance(e, CallExpr):
            raise UnsupportedError("calls are only allowed as statements or assignment "
                                   "right-hand sides", e.line, e.col)
        if isinstance(e, AddrOf):
            v = self.var(e.var)
            if v.ty.is_array:
                raise UnsupportedError("address of an array; use the array name",
                                       e.line, e.col)
            return replace(e, var=v, ty=ptr(v.ty))
        if isinstance(e, Deref):
            p = self.value(e.ptr)
            pt = p.ty.decay()
            if not pt.is_ptr or pt.base.kind == "void":
                raise MiniCTypeError(f"cannot dereference {p.ty}", e.line, e.col)
            return replace(e, ptr=p, ty=pt.base)
        if isinstance(e, Index):
            b = self.value(e.base)
            i = self.value(e.index)
            bt = b.ty.decay()
            if not bt.is_ptr or bt.base.kind == "void":
                raise MiniCTypeError(f"cannot index {b.ty}", e.line, e.col)
            if not i.ty.is_integral:
                raise MiniCTypeError("array index must be an integer", e.index.line, e.index.col)
            return replace(e, base=b, index=i, ty=bt.base)
        if isinstance(e, Unary):
            if is_logical(e):
                raise UnsupportedError("'&&'/'||' only in conditions or as a whole "
                                       "assignment value", e.line, e.col)
            o = self.value(e.operand)
            if e.op == "-":
                if not o.ty.is_integral:
                    raise MiniCTypeError(f"operand of unary '-' has type {o.ty}", e.line, e.col)
            elif not (o.ty.is_integral or o.ty.decay().is_address):
                raise MiniCTypeError(f"operand of '!' has type {o.ty}", e.line, e.col)
            return replace(e, operand=o, ty=INT)
        if isinstance(e, Binary):
            if e.op in LOGICAL_OPS:
                raise UnsupportedError("'&&'/'||' only in conditions or as a whole "
                                       "assignment value", e.line, e.col)
            lt_e = self.value(e.left)
            rt_e = self.value(e.right)
            lt, rt = lt_e.ty.decay(), rt_e.ty.decay()
            if e.op in ARITH_OPS:
                if lt.is_integral and rt.is_integral:
                    ty = INT
                elif e.op in "+-" and lt.is_ptr and rt.is_integral:
                    ty = lt
                elif e.op == "+" and lt.is_integral and rt.is_ptr:
                    ty = rt
                else:
                    raise MiniCTypeError(f"invalid operands to '{e.op}' ({lt} and {rt})",
                                         e.line, e.col)
                return replace(e, left=lt_e, right=rt_e, ty=ty)
            if e.op in COMPARE_OPS:
                if lt.is_integral and rt.is_integral:
                    pass
                elif lt.is_address and rt.is_address:
                    if e.op not in ("==", "!="):
                        raise UnsupportedError("pointers can only be compared for equality",
                                               e.line, e.col)
                    if lt.is_ptr and rt.is_ptr and lt != rt:
                        raise MiniCTypeError(f"comparison of {lt} and {rt}", e.line, e.col)
                else:
                    raise MiniCTypeError(f"invalid operands to '{e.op}' ({lt} and {rt})",
                                         e.line, e.col)
                return replace(e, left=lt_e, right=rt_e, ty=INT)
        raise UnsupportedError(f"unsupported expression {type(e).__name__}", e.line, e.col)


def _iter_stmts(s: Stmt):
    yield s
    if isinstance(s, Block):
        for x in s.stmts:
            yield from _iter_stmts(x)
    elif isinstance(s, If):
        yield from _iter_stmts(s.then)
        if s.orelse is not None:
            yield from _iter_stmts(s.orelse)
    elif isinstance(s, While):
        yield from _iter_stmts(s.body)


iter_stmts = _iter_stmts


def parse(source: str, filename=None) -> MiniCProgram:
    """Parse and check MiniC source.

    Raises :class:`MiniCSyntaxError`, :class:`MiniCTypeError` or
    :class:`UnsupportedError`; each carries the offending line and column.
    """
    try:
        raw_globals, raw_functions = _Parser(source).program()
        gdecls, functions = _Checker(raw_globals, raw_functions).run()
    except (MiniCSyntaxError, MiniCTypeError, UnsupportedError) as exc:
        exc.filename = exc.filename or filename
        raise
    return MiniCProgram(tuple(gdecls), tuple(functions), source)


def parse_file(path) -> MiniCProgram:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), filename=str(path))

