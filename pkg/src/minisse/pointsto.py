"""Inclusion-based (Andersen) points-to analysis.

Flow-, context- and field-insensitive.  Abstract objects are globals,
locals and parameters (each is statically allocated, MiniC has no
recursion) plus the regions synthesized for unknown pointers at entry.
"""

from __future__ import annotations

from collections import deque
from typing import Dict, FrozenSet, Iterable

from .errors import EmptyTargetSet
from .frontend.cfg import ProgramCFG
from .frontend.inputs import EntryLayout
from .frontend.syntax import AddrOf, Binary, Deref, Index, Null, Var


NULL_OBJ = "$null"


class PointsToMap:
    def __init__(self, sets: Dict[str, FrozenSet[str]], nullable=()):
        self._sets = {k: frozenset(v) for k, v in sorted(sets.items())}
        self.nullable = frozenset(nullable)

    def __getitem__(self, var) -> FrozenSet[str]:
        return self._sets.get(var, frozenset())

    def __contains__(self, var):
        return var in self._sets

    def __len__(self):
        return len(self._sets)

    def __eq__(self, other):
        return isinstance(other, PointsToMap) and self._sets == other._sets

    def items(self):
        return self._sets.items()

    def objects_of(self, e) -> FrozenSet[str]:
        """Objects an address-valued expression may evaluate to."""
        if isinstance(e, Null):
            return frozenset()
        if isinstance(e, Var):
            if e.ty.is_array:
                return frozenset([e.qual])
            return self[e.qual]
        if isinstance(e, AddrOf):
            return frozenset([e.var.qual])
        if isinstance(e, (Deref, Index)):
            base = e.ptr if isinstance(e, Deref) else e.base
            out = set()
            for o in self.objects_of(base):
                out |= self[o]
            return frozenset(out)
        if isinstance(e, Binary):
            ptr_side = e.left if e.left.ty.decay().is_address else e.right
            return self.objects_of(ptr_side)
        return frozenset()

    def may_be_null(self, e) -> bool:
        """Whether an address-valued expression may evaluate to NULL."""
        if isinstance(e, Null):
            return True
        if isinstance(e, AddrOf):
            return False
        if isinstance(e, Var):
            return not e.ty.is_array and e.qual in self.nullable
        if isinstance(e, (Deref, Index)):
            base = e.ptr if isinstance(e, Deref) else e.base
            return any(o in self.nullable for o in self.objects_of(base))
        if isinstance(e, Binary):
            ptr_side = e.left if e.left.ty.decay().is_address else e.right
            return self.may_be_null(ptr_side)
        return True

    def memory_of(self, e) -> FrozenSet[str]:
        """Objects a ``*p``/``p[i]`` expression may read or write."""
        base = e.ptr if isinstance(e, Deref) else e.base
        return self.objects_of(base)

    def dump(self):
        return "\n".join(f"{v} -> {{{','.join(sorted(s))}}}" for v, s in sorted(self._sets.items()))


def targets_of(pts: PointsToMap, site_arguments: Iterable) -> FrozenSet[str]:
    """Union of the objects the given binder expressions may denote."""
    out = set()
    for e in site_arguments:
        out |= pts.objects_of(e)
    if not out:
        raise EmptyTargetSet("binder may not point to any object")
    return frozenset(out)


class _Solver:
    def __init__(self):
        self.pts: Dict[str, set] = {}
        self.edges: Dict[str, set] = {}
        self.loads: Dict[str, list] = {}
        self.stores: Dict[str, list] = {}
        self.ntemp = 0

    def node(self, name):
        self.pts.setdefault(name, set())
        self.edges.setdefault(name, set())
        return name

    def temp(self):
        self.ntemp += 1
        return self.node(f"$t{self.ntemp}")

    def value(self, e):
        """Graph node holding the value of address-typed ``e`` (None for NULL)."""
        if isinstance(e, Null):
            t = self.temp()
            self.pts[t].add(NULL_OBJ)
            return t
        if isinstance(e, Var):
            if e.ty.is_array:
                t = self.temp()
                self.pts[t].add(e.qual)
                return t
            return self.node(e.qual)
        if isinstance(e, AddrOf):
            t = self.temp()
            self.pts[t].add(e.var.qual)
            return t
        if isinstance(e, (Deref, Index)):
            base = self.value(e.ptr if isinstance(e, Deref) else e.base)
            t = self.temp()
            if base is not None:
                self.loads.setdefault(base, []).append(t)
            return t
        if isinstance(e, Binary):
            ptr_side = e.left if e.left.ty.decay().is_address else e.right
            return self.value(ptr_side)
        return None

    def assign(self, target, value_node):
        if value_node is None:
            return
        if isinstance(target, Var):
            self.edges[value_node].add(self.node(target.qual))
        else:
            base = self.value(target.ptr if isinstance(target, Deref) else target.base)
            if base is not None:
                self.stores.setdefault(base, []).append(value_node)

    def solve(self):
        work = deque(sorted(n for n, s in self.pts.items() if s))
        queued = set(work)
        while work:
            n = work.popleft()
            queued.discard(n)
            for o in sorted(self.pts[n]):
                self.node(o)
                for t in self.loads.get(n, ()):
                    if t not in self.edges[o]:
                        self.edges[o].add(t)
                        if self._flow(o, t) and t not in queued:
                            work.append(t)
                            queued.add(t)
                for s in self.stores.get(n, ()):
                    if o not in self.edges[s]:
                        self.edges[s].add(o)
                        if self._flow(s, o) and o not in queued:
                            work.append(o)
                            queued.add(o)
            for m in sorted(self.edges[n]):
                if self._flow(n, m) and m not in queued:
                    work.append(m)
                    queued.add(m)

    def _flow(self, src, dst):
        before = len(self.pts[dst])
        self.pts[dst] |= self.pts[src]
        return len(self.pts[dst]) != before


def andersen(cfg: ProgramCFG, entry=None, *, ptr_elems=16, null_params=False) -> PointsToMap:
    """Solve the inclusion constraints of every function reachable from
    ``entry`` (every function when ``entry`` is None).

    With an entry, its pointer parameters and the uninitialized pointer
    globals are seeded with their synthesized regions.  NULL is tracked as a
    pseudo-object and reported only through ``nullable``.
    """
    s = _Solver()
    funcs = cfg.reachable_functions(entry)
    address_vars = set()
    for g in cfg.globals:
        if g.ty.is_ptr:
            address_vars.add(g.name)
            s.node(g.name)
            if g.has_init or entry is None:
                s.pts[g.name].add(NULL_OBJ)
    if entry is not None:
        layout = EntryLayout(cfg, entry, ptr_elems=ptr_elems, null_params=null_params)
        for b in layout.bindings:
            if b.how in ("region", "nullable"):
                s.node(b.qual)
                s.pts[b.qual].add(b.region)
                if b.how == "nullable":
                    s.pts[b.qual].add(NULL_OBJ)
                if layout.regions[b.region].elem.is_ptr:
                    s.node(b.region)
                    s.pts[b.region].add(NULL_OBJ)
    for name in funcs:
        f = cfg.functions[name]
        for p in f.func.params + f.func.locals:
            if p.ty.is_ptr:
                q = f.func.qual(p.name)
                address_vars.add(q)
                s.node(q)
                if p in f.func.locals or (entry is None and not cfg.callers(name)):
                    s.pts[q].add(NULL_OBJ)
        if f.func.ret.is_ptr:
            address_vars.add(f"{name}.$ret")
            s.node(f"{name}.$ret")
            s.pts[f"{name}.$ret"].add(NULL_OBJ)
        for node in f.nodes:
            op = node.op
            if node.kind == "assign" and op.target.ty.is_ptr:
                s.assign(op.target, s.value(op.value))
            elif node.kind == "return" and op.value is not None and op.value.ty.decay().is_address:
                s.edges[s.node(f"{name}.$ret")]  # ensure node
                v = s.value(op.value)
                if v is not None:
                    s.edges[v].add(f"{name}.$ret")
            elif node.kind == "call":
                callee = cfg.functions.get(op.func)
                if callee is None:
                    if op.target is not None and op.target.ty.is_ptr:
                        t = s.temp()
                        s.pts[t].add(NULL_OBJ)
                        s.assign(op.target, t)
                    continue
                for p, a in zip(callee.func.params, op.args):
                    if p.ty.is_ptr:
                        v = s.value(a)
                        if v is not None:
                            s.edges[v].add(s.node(callee.func.qual(p.name)))
                if op.target is not None and op.target.ty.is_ptr:
                    s.assign(op.target, s.node(f"{op.func}.$ret"))
    s.solve()
    out = {}
    nullable = set()
    for n, objs in s.pts.items():
        if n.startswith("$"):
            continue
        if NULL_OBJ in objs:
            nullable.add(n)
            objs = objs - {NULL_OBJ}
        if n in address_vars or objs:
            out[n] = objs
    return PointsToMap(out, nullable)
