"""Shared machinery for the exhaustive corpus properties.

Every corpus program carries a header::

    // machine: lock | file
    // entry: main
    // inputs: n m          (at most three; all other input slots stay 0)

For each program we run, over every assignment of the listed inputs at
8-bit width, the original program, the instrumented program and its slice,
and collect violations of four properties:

* slicing equivalence: criterion observations agree between the
  instrumented program and its slice whenever the former terminates,
* metal soundness: every concrete machine state lies in the state sets,
* symexec exactness: symbolic and concrete bug sets agree on acyclic slices,
* instrumentation transparency: the original variables evolve identically.

Results are cached per program so the property tests and the acceptance
suite share one pass.
"""

from __future__ import annotations

import functools
import itertools
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List

from minisse import (
    andersen, build_cfg, instrument, load_machine, match_sites, metal_fixpoint, parse,
)
from minisse.frontend.interp import Interpreter
from minisse.slicer import criteria_from_instrumentation, slice_program
from minisse.symexec import Limits, check_model, sym_execute

HERE = Path(__file__).parent
CORPUS = HERE / "corpus"
DATA = HERE.parent / "src" / "minisse" / "data"
MACHINES = {"lock": DATA / "lock.sm", "file": CORPUS / "file.sm"}
WIDTH = 8
STEP_BUDGET = 10_000
MAX_INPUTS = 3


def _header(text, key):
    m = re.search(rf"^//\s*{key}:(.*)$", text, re.M)
    if m is None:
        raise ValueError(f"corpus program lacks a '{key}:' header")
    return m.group(1).split()


@dataclass
class CorpusProgram:
    name: str
    path: Path
    machine: str
    entry: str
    inputs: List[str]

    @functools.cached_property
    def source(self):
        return self.path.read_text()

    @functools.cached_property
    def pipeline(self):
        cfg = build_cfg(parse(self.source, filename=str(self.path)))
        spec = load_machine(MACHINES[self.machine])
        pts = andersen(cfg, self.entry)
        sites = match_sites(cfg, spec, self.entry)
        ip = instrument(cfg, spec, sites, pts)
        sp = slice_program(ip, criteria_from_instrumentation(ip), pts)
        ssm = metal_fixpoint(cfg, spec, sites, pts, entry=self.entry)
        return cfg, spec, pts, sites, ip, sp, ssm

    def assignments(self):
        it = Interpreter(self.pipeline[0], self.entry, int_width=WIDTH)
        slots = it.layout.slots
        for n in self.inputs:
            if n not in slots:
                raise ValueError(f"{self.name}: '{n}' is not an input slot")
        ranges = [range(slots[n].domain[0], slots[n].domain[1] + 1) for n in self.inputs]
        for values in itertools.product(*ranges):
            yield dict(zip(self.inputs, values))

    @property
    def slice_acyclic(self):
        sp = self.pipeline[5]
        return all(not f.back_edges() for f in sp.cfg.functions.values())


def load_corpus() -> List[CorpusProgram]:
    out = []
    for path in sorted(CORPUS.glob("*.mc")):
        text = path.read_text()
        inputs = _header(text, "inputs")
        if len(inputs) > MAX_INPUTS:
            raise ValueError(f"{path.name}: more than {MAX_INPUTS} inputs")
        out.append(CorpusProgram(path.stem, path, _header(text, "machine")[0],
                                 _header(text, "entry")[0], inputs))
    return out


@dataclass
class PropertyReport:
    runs: int = 0
    skipped: Dict[str, int] = field(default_factory=dict)
    slicing: List[str] = field(default_factory=list)
    metal: List[str] = field(default_factory=list)
    transparency: List[str] = field(default_factory=list)
    symexec: List[str] = field(default_factory=list)
    symexec_checked: bool = False
    concrete_bugs: frozenset = frozenset()
    symbolic_bugs: frozenset = frozenset()

    def skip(self, why):
        self.skipped[why] = self.skipped.get(why, 0) + 1


def _snapshot(it, names):
    from minisse.frontend.interp import show
    return tuple(tuple(show(c) for c in it.objs[n].cells) for n in names)


def _post(spec, states, labels):
    """States possible after the labels fire, weakly (old states survive)."""
    out = set(states)
    for label in labels:
        for st in list(out):
            new, err = spec.fire(st, label)
            if err is None:
                out.add(new)
    return out


@functools.lru_cache(maxsize=None)
def check_program(name: str) -> PropertyReport:
    prog = next(p for p in load_corpus() if p.name == name)
    cfg, spec, pts, sites, ip, sp, ssm = prog.pipeline
    rep = PropertyReport()

    orig_it = Interpreter(cfg, prog.entry, int_width=WIDTH)
    ins_it = Interpreter(ip.cfg, prog.entry, int_width=WIDTH)
    sl_it = Interpreter(sp.cfg, prog.entry, int_width=WIDTH)
    orig_names = sorted(orig_it.objs)
    fire_matched = {s.loc: s.matched for s in ip.fire_sites}
    site_labels: Dict[object, List[str]] = {}
    for fs in ip.fire_sites:
        site_labels.setdefault(fs.matched, []).append(fs.label)
    state_vars = [(t, v) for t, v, _ in ip.machine_vars]
    checks = set(ip.error_check_locations)
    sl_checks = set(sp.program.error_check_locations)
    concrete_me = set()

    for inputs in prog.assignments():
        rep.runs += 1
        tag = f"{prog.name} {inputs}"

        # original program: original-variable snapshots at every node
        orig_obs = []
        r_orig = orig_it.run(inputs, STEP_BUDGET, record_trace=False,
                             observer=lambda loc, it: orig_obs.append(
                                 (loc, _snapshot(it, orig_names))))

        # instrumented program: snapshots, machine states and criteria
        ins_obs, ins_crit, metal_bad = [], [], []

        def ins_observer(loc, it):
            states = [it.objs[v].cells[0] for _, v in state_vars]
            matched = fire_matched.get(loc)
            for (t, _), idx in zip(state_vars, states):
                s = spec.states[idx]
                if matched is not None:
                    allowed = ssm.before(matched, t)
                elif loc in site_labels:
                    # the fire node in front of it has already moved the machine
                    allowed = _post(spec, ssm.before(loc, t), site_labels[loc])
                else:
                    allowed = ssm.before(loc, t)
                if s not in allowed:
                    metal_bad.append(f"{tag}: state {s} of {t} at {loc} not in "
                                     f"{sorted(allowed)}")
            if matched is None:
                ins_obs.append((loc, _snapshot(it, orig_names)))
            if loc in checks:
                ins_crit.append((loc, tuple(states)))

        r_ins = ins_it.run(inputs, STEP_BUDGET, record_trace=False, observer=ins_observer)
        rep.metal.extend(metal_bad[:3])
        if r_ins.outcome == "fault" and r_ins.fault.kind == "assertion-failure":
            _, target, err, _ = r_ins.fault.detail
            where = fire_matched[r_ins.fault.loc]
            if err not in ssm.after(where, target):
                rep.metal.append(f"{tag}: error {err} of {target} missing at {where}")

        # transparency: identical up to the first assertion fault
        if r_ins.outcome == "fault" and r_ins.fault.kind == "assertion-failure":
            if orig_obs[:len(ins_obs)] != ins_obs:
                rep.transparency.append(f"{tag}: observations diverge before the fault")
        elif r_orig.outcome == "budget_exhausted" or r_ins.outcome == "budget_exhausted":
            # both runs count steps differently; compare the common prefix
            k = min(len(orig_obs), len(ins_obs))
            if orig_obs[:k] != ins_obs[:k]:
                rep.transparency.append(f"{tag}: observations diverge (nonterminating)")
        elif orig_obs != ins_obs or r_orig.outcome != r_ins.outcome:
            rep.transparency.append(f"{tag}: {r_orig.outcome} vs {r_ins.outcome}")

        # slicing equivalence on criterion observations
        sl_crit = []
        r_sl = sl_it.run(inputs, STEP_BUDGET, record_trace=False,
                         observer=lambda loc, it: sl_crit.append(
                             (sp.origin(loc), tuple(it.objs[v].cells[0] for _, v in state_vars)))
                         if loc in sl_checks else None)
        if r_sl.outcome == "fault" and r_sl.fault.kind != "assertion-failure":
            concrete_me.add(r_sl.fault.kind)
        if r_ins.outcome == "budget_exhausted":
            rep.skip("original does not terminate")
        elif r_ins.outcome == "fault" and r_ins.fault.kind != "assertion-failure":
            # a memory fault in a sliced-away statement stops only the original
            if sl_crit[:len(ins_crit)] != ins_crit:
                rep.slicing.append(f"{tag}: slice disagrees before the memory fault")
            rep.skip("original has a memory fault (prefix compared)")
        elif sl_crit != ins_crit:
            rep.slicing.append(f"{tag}: {ins_crit} != {sl_crit}")

        if r_sl.outcome == "fault" and r_sl.fault.kind == "assertion-failure":
            rep.concrete_bugs |= {(r_sl.fault.detail[1], r_sl.fault.detail[2])}

    # symexec exactness on acyclic slices with at most two inputs
    if prog.slice_acyclic and len(prog.inputs) <= 2:
        rep.symexec_checked = True
        out = sym_execute(sp, prog.entry, Limits(step_budget=STEP_BUDGET), int_width=WIDTH)
        if not out.exhaustive:
            rep.symexec.append(f"{prog.name}: exploration not exhaustive")
        sym_bugs = out.bug_set()
        rep.symbolic_bugs = frozenset(sym_bugs)
        rep.concrete_bugs = frozenset(rep.concrete_bugs)
        if sym_bugs != set(rep.concrete_bugs):
            rep.symexec.append(f"{prog.name}: symbolic {sorted(sym_bugs)} != concrete "
                               f"{sorted(rep.concrete_bugs)}")
        sym_me = {p.detail[0] for p in out.memory_errors if p.model is not None}
        if sym_me != concrete_me:
            rep.symexec.append(f"{prog.name}: memory errors {sorted(sym_me)} != "
                               f"{sorted(concrete_me)}")
        for p in out.paths:
            if p.model is not None and not check_model(p.pc, p.model):
                rep.symexec.append(f"{prog.name}: model {p.model} violates its path condition")
    return rep
