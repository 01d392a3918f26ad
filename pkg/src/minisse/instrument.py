"""Instrument a program with one typestate machine instance per target.

Every match site gets a fire node spliced in front of it.  The fire node
evaluates the binder, looks up the state variable of the object it points
to, and applies the transition; an error destination traps.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Dict, List, Optional, Tuple

from .errors import EmptyTargetSet, NoTargets
from .frontend.cfg import FireOp, FunctionCFG, LocationId, Node, ProgramCFG
from .frontend.syntax import INT, GlobalDecl
from .machines import MachineSpec, MatchSite
from .pointsto import PointsToMap, targets_of


class ErrorTransition(Exception):
    """Raised by :func:`fire` when a transition enters an error state."""

    def __init__(self, state, message):
        super().__init__(message)
        self.state = state
        self.message = message


def fire(spec: MachineSpec, state: str, label: str) -> str:
    new, err = spec.fire(state, label)
    if err is not None:
        raise ErrorTransition(err, spec.messages[err])
    return new


@dataclass(frozen=True)
class FireSite:
    loc: LocationId
    label: str
    binder: Optional[object]
    matched: LocationId  # the original statement it guards


@dataclass(frozen=True, eq=False)
class InstrumentedProgram:
    cfg: ProgramCFG
    original: ProgramCFG
    spec: MachineSpec
    machine_vars: Tuple[Tuple[str, str, MachineSpec], ...]
    dispatch: Dict[str, str]
    fire_sites: Tuple[FireSite, ...]
    error_check_locations: Tuple[LocationId, ...]
    targets: Tuple[str, ...]
    all_targets: Tuple[str, ...]
    site_targets: Dict[LocationId, frozenset] = field(default_factory=dict)
    skipped_sites: Tuple[LocationId, ...] = ()

    @property
    def state_vars(self):
        return tuple(v for _, v, _ in self.machine_vars)

    def target_of_var(self, var):
        for t, v, _ in self.machine_vars:
            if v == var:
                return t
        raise KeyError(var)

    def is_fire(self, loc: LocationId) -> bool:
        return self.cfg.node(loc).kind == "fire"


def _identifiers(cfg: ProgramCFG):
    names = {g.name for g in cfg.globals}
    for f in cfg.program.functions:
        names.add(f.name)
        names.update(p.name for p in f.params)
        names.update(p.name for p in f.locals)
    return names


def state_var_name(target: str, taken) -> str:
    if re.fullmatch(r"[A-Za-z_]\w*", target):
        base = "sm" + target
    else:
        base = "sm_" + re.sub(r"\W+", "_", target).strip("_")
    name, k = base, 1
    while name in taken:
        k += 1
        name = f"{base}_{k}"
    return name


def resolve_targets(sites, pts: PointsToMap, targets=None):
    """Objects manipulated at each site and the chosen target tuple.

    Returns ``(site_targets, all_targets, chosen, skipped)``; sites whose
    binder can never point at an object are skipped with a warning.
    """
    site_targets = {}
    skipped = []
    for s in sites:
        if s.binder is None:
            continue
        try:
            site_targets[s.loc] = targets_of(pts, [s.binder])
        except EmptyTargetSet:
            skipped.append(s.loc)
            warnings.warn(f"match site {s.loc} can never touch a tracked object; skipped",
                          stacklevel=3)
    all_targets = tuple(sorted(set().union(*site_targets.values()))) if site_targets else ()
    if targets is None:
        chosen = all_targets
    else:
        unknown = set(targets) - set(all_targets)
        if unknown:
            raise ValueError(f"targets not manipulated by any match site: {sorted(unknown)}")
        chosen = tuple(sorted(set(targets)))
    return site_targets, all_targets, chosen, tuple(skipped)


def instrument(cfg: ProgramCFG, spec: MachineSpec, sites: List[MatchSite],
               pts: PointsToMap, targets=None) -> InstrumentedProgram:
    site_targets, all_targets, chosen, skipped = resolve_targets(sites, pts, targets)
    if not chosen:
        raise NoTargets("no object is manipulated by any match site")

    taken = _identifiers(cfg)
    machine_vars = []
    for t in chosen:
        v = state_var_name(t, taken)
        taken.add(v)
        machine_vars.append((t, v, spec))
    dispatch = tuple((t, v) for t, v, _ in machine_vars)
    init = spec.index(spec.initial)
    new_globals = [GlobalDecl(v, INT, init, True) for _, v, _ in machine_vars]

    by_func = {}
    for s in sites:
        if s.loc in skipped:
            continue
        by_func.setdefault(s.loc.func, []).append(s)

    functions = {}
    fire_sites = []
    checks = []
    for name, f in cfg.functions.items():
        fsites = by_func.get(name)
        if not fsites:
            functions[name] = f
            continue
        nodes = list(f.nodes)
        succs = [list(x) for x in f.succs]
        stmt_nodes = {k: tuple(v) for k, v in f.stmt_nodes.items()}
        owner = {i: k for k, v in stmt_nodes.items() for i in v}
        for s in fsites:
            m = s.loc.index
            fi = len(nodes)
            op = FireOp(spec, s.label, s.binder, dispatch)
            nodes.append(Node(fi, "fire", op, s.line))
            for u in range(len(succs)):
                if u == fi:
                    continue
                succs[u] = [fi if x == m else x for x in succs[u]]
            succs.append([m])
            if m in owner:  # the printer shows fires with their statement
                stmt_nodes[owner[m]] = (fi,) + stmt_nodes[owner[m]]
            loc = LocationId(name, fi)
            fire_sites.append(FireSite(loc, s.label, s.binder, s.loc))
            if spec.can_error(s.label):
                checks.append(loc)
        functions[name] = FunctionCFG(name, f.func, tuple(nodes),
                                      tuple(tuple(x) for x in succs),
                                      MappingProxyType(stmt_nodes))
    new_cfg = cfg.with_functions(functions, new_globals)
    return InstrumentedProgram(
        new_cfg, cfg, spec, tuple(machine_vars), dict(dispatch), tuple(fire_sites),
        tuple(checks), chosen, all_targets, site_targets, tuple(skipped))
