"""A small exact-when-possible constraint solver for path conditions.

Steps: fold constants, split the conjunction into clusters that share no
symbols, narrow each symbol's interval with its ``sym op const`` atoms,
filter small domains through the remaining one-symbol constraints, then
backtrack over the cluster.  A search that covers every value of every
symbol proves UNSAT.  When a domain is too large to enumerate (32-bit
inputs), only guided candidate values are tried, and failure is UNKNOWN.

Budget units are candidate assignments plus constraint evaluations, so
results are deterministic for a given (pc, budget).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .expr import (
    FALSE, TRUE, And, BinOp, BoolConst, Cast, Cmp, Const, Formula, Ite, Not, Or, Sym,
    binop, cmp, constants, evaluate, ite, not_, and_, or_, symbols,
)

DEFAULT_BUDGET = 200_000
# one-symbol constraints are filtered value by value up to this domain size
ENUM_LIMIT = 1 << 16


@dataclass(frozen=True)
class SolverResult:
    status: str  # 'SAT' | 'UNSAT' | 'UNKNOWN'
    model: Optional[Dict[str, int]] = None
    cost: int = 0

    @property
    def sat(self):
        return self.status == "SAT"


SAT = "SAT"
UNSAT = "UNSAT"
UNKNOWN = "UNKNOWN"


class _Budget:
    def __init__(self, units):
        self.left = units
        self.used = 0

    def spend(self, n=1):
        self.left -= n
        self.used += n
        return self.left >= 0


@dataclass
class _Dom:
    lo: int
    hi: int
    excluded: set = field(default_factory=set)
    values: Optional[List[int]] = None  # exact filtered list when known

    def size(self):
        if self.values is not None:
            return len(self.values)
        return self.hi - self.lo + 1


def _atom(f: Formula):
    """``(name, op, k)`` if ``f`` compares a bare symbol with a constant."""
    if isinstance(f, Cmp) and isinstance(f.a, Sym) and isinstance(f.b, Const):
        return f.a.name, f.op, f.b.value
    return None


def _narrow(d: _Dom, op, k):
    if op == "<":
        d.hi = min(d.hi, k - 1)
    elif op == "<=":
        d.hi = min(d.hi, k)
    elif op == ">":
        d.lo = max(d.lo, k + 1)
    elif op == ">=":
        d.lo = max(d.lo, k)
    elif op == "==":
        d.lo, d.hi = max(d.lo, k), min(d.hi, k)
    elif op == "!=":
        d.excluded.add(k)


def _fits(lo, hi, width):
    return -(1 << (width - 1)) <= lo and hi < (1 << (width - 1))


def strip_casts(e, domains):
    """Drop casts that cannot change the value of their operand.

    A cast of a symbol whose whole domain fits the target width is the
    identity, and removing it lets interval narrowing see ``n < k``.
    """
    if isinstance(e, (Const, Sym, BoolConst)):
        return e
    if isinstance(e, Cast):
        a = strip_casts(e.a, domains)
        if isinstance(a, Sym):
            lo, hi = domains.get(a.name, (-(1 << 31), (1 << 31) - 1))
            if _fits(lo, hi, e.width):
                return a
        return Cast(a, e.width) if a is not e.a else e
    if isinstance(e, BinOp):
        return binop(e.op, strip_casts(e.a, domains), strip_casts(e.b, domains), e.width)
    if isinstance(e, Ite):
        return ite(strip_casts(e.cond, domains), strip_casts(e.then, domains),
                   strip_casts(e.orelse, domains))
    if isinstance(e, Cmp):
        return cmp(e.op, strip_casts(e.a, domains), strip_casts(e.b, domains))
    if isinstance(e, Not):
        return not_(strip_casts(e.a, domains))
    if isinstance(e, And):
        return and_(*(strip_casts(a, domains) for a in e.args))
    if isinstance(e, Or):
        return or_(*(strip_casts(a, domains) for a in e.args))
    raise TypeError(type(e).__name__)


def _clusters(constraints: Sequence[Formula]):
    parent = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for c in constraints:
        names = sorted(symbols(c))
        for n in names:
            parent.setdefault(n, n)
        for n in names[1:]:
            a, b = find(names[0]), find(n)
            if a != b:
                parent[max(a, b)] = min(a, b)
    groups: Dict[str, Tuple[List[str], List[Formula]]] = {}
    for n in sorted(parent):
        groups.setdefault(find(n), ([], []))[0].append(n)
    for c in constraints:
        names = symbols(c)
        root = find(min(names))
        groups[root][1].append(c)
    return list(groups.values())


def _closeness(v):
    # models read best with small values: 0, 1, -1, 2, -2, ...
    return abs(v), v < 0


def _candidates(d: _Dom, consts, limit=64):
    out = []
    seed = [d.lo, d.hi, 0, 1, -1]
    for k in sorted(consts):
        seed += [k, k - 1, k + 1]
    for v in seed:
        if d.lo <= v <= d.hi and v not in d.excluded and v not in out:
            out.append(v)
    # a few evenly spaced probes
    span = d.hi - d.lo
    for i in range(1, 8):
        v = d.lo + span * i // 8
        if v not in d.excluded and v not in out:
            out.append(v)
    return out[:limit]


def _solve_cluster(names, cons, domains, budget: _Budget):
    doms = {}
    for n in names:
        lo, hi = domains.get(n, (-(1 << 31), (1 << 31) - 1))
        doms[n] = _Dom(lo, hi)
    rest = []
    for c in cons:
        a = _atom(c)
        if a is not None:
            _narrow(doms[a[0]], a[1], a[2])
        else:
            rest.append(c)
    for d in doms.values():
        if d.lo > d.hi:
            return UNSAT, None
    unary: Dict[str, List[Formula]] = {n: [] for n in names}
    multi = []
    for c in rest:
        s = symbols(c)
        if len(s) == 1:
            unary[next(iter(s))].append(c)
        else:
            multi.append(c)
    exact = True
    for n in names:
        d = doms[n]
        if d.size() <= ENUM_LIMIT:
            if not budget.spend(d.size()):
                return UNKNOWN, None
            vals = []
            for v in range(d.lo, d.hi + 1):
                if v in d.excluded:
                    continue
                m = {n: v}
                if all(evaluate(c, m) for c in unary[n]):
                    vals.append(v)
            if not vals:
                return UNSAT, None
            d.values = sorted(vals, key=_closeness)
        else:
            consts = set()
            for c in unary[n] + multi:
                consts |= constants(c)
            cands = [v for v in _candidates(d, consts)
                     if all(evaluate(c, {n: v}) for c in unary[n])]
            if not budget.spend(len(cands) + 1):
                return UNKNOWN, None
            d.values = sorted(cands, key=_closeness)
            exact = False
    order = sorted(names, key=lambda n: (doms[n].size(), n))
    pos = {n: i for i, n in enumerate(order)}
    # check each multi-symbol constraint once its last symbol is assigned
    checks: Dict[str, List[Formula]] = {n: [] for n in order}
    for c in multi:
        last = max(symbols(c), key=lambda n: pos[n])
        checks[last].append(c)

    model: Dict[str, int] = {}

    def search(i):
        if i == len(order):
            return True
        n = order[i]
        for v in doms[n].values:
            if not budget.spend():
                raise _OutOfBudget
            model[n] = v
            if all(evaluate(c, model) for c in checks[n]) and search(i + 1):
                return True
        model.pop(n, None)
        return False

    try:
        found = search(0)
    except _OutOfBudget:
        return UNKNOWN, None
    if found:
        return SAT, dict(model)
    return (UNSAT if exact else UNKNOWN), None


class _OutOfBudget(Exception):
    pass


_CACHE: Dict[tuple, SolverResult] = {}


def solve(pc: Sequence[Formula], budget: int = DEFAULT_BUDGET,
          domains: Optional[Dict[str, Tuple[int, int]]] = None) -> SolverResult:
    """Decide the conjunction ``pc``.

    ``domains`` gives each symbol's inclusive value range; unknown symbols
    default to signed 32-bit.  SAT models assign every symbol of ``pc`` and
    are checked by substitution before being returned.
    """
    domains = domains or {}
    cons = []
    for f in pc:
        f = strip_casts(f, domains)
        if isinstance(f, BoolConst):
            if not f.value:
                return SolverResult(UNSAT)
            continue
        cons.append(f)
    key = (tuple(cons), tuple(sorted((n, domains.get(n)) for c in cons for n in symbols(c))),
           budget)
    hit = _CACHE.get(key)
    if hit is not None:
        return hit
    b = _Budget(budget)
    model: Dict[str, int] = {}
    status = SAT
    for names, group in _clusters(cons):
        st, m = _solve_cluster(names, group, domains, b)
        if st == UNSAT:
            status = UNSAT
            break
        if st == UNKNOWN:
            status = UNKNOWN
        else:
            model.update(m)
    if status == SAT:
        if not check_model(pc, model):
            raise AssertionError("solver produced a model that violates the path condition")
        res = SolverResult(SAT, model, b.used)
    else:
        res = SolverResult(status, None, b.used)
    if len(_CACHE) > 50_000:
        _CACHE.clear()
    _CACHE[key] = res
    return res


def check_model(pc: Sequence[Formula], model: Dict[str, int]) -> bool:
    """Substitute ``model`` into every conjunct (missing symbols count as 0)."""
    names = set()
    for c in pc:
        names |= symbols(c)
    full = {n: model.get(n, 0) for n in names}
    return all(evaluate(c, full) for c in pc)


__all__ = ["solve", "check_model", "SolverResult", "SAT", "UNSAT", "UNKNOWN",
           "DEFAULT_BUDGET", "TRUE", "FALSE"]
