"""Typestate machine specifications and syntactic match sites.

Spec files are line oriented, ``#`` starts a comment::

    machine lock_sm
    states U L DU DL RL
    initial U
    error DU "double unlock"
    trans U -> L  on call lock($x@1)
    trans L -> RL on return
    scope copy            # optional: restrict return patterns

``$x@K`` binds the tracked object to the K-th (1-based) call argument.
"""

from __future__ import annotations

import re
import shlex
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from .errors import SpecError
from .frontend.cfg import LocationId, ProgramCFG


@dataclass(frozen=True)
class Pattern:
    kind: str  # 'call' | 'return'
    func: Optional[str] = None
    arg: Optional[int] = None  # 1-based binder position; None binds nothing

    @property
    def label(self) -> str:
        return "return" if self.kind == "return" else self.func

    @property
    def binds(self) -> bool:
        return self.arg is not None

    def __str__(self):
        if self.kind == "return":
            return "return"
        return f"call {self.func}({'$x@%d' % self.arg if self.arg else ''})"


@dataclass(frozen=True)
class Transition:
    src: str
    dst: str
    pattern: Pattern


@dataclass(frozen=True)
class MachineSpec:
    name: str
    states: Tuple[str, ...]
    initial: str
    errors: Tuple[Tuple[str, str], ...]  # (state, message)
    transitions: Tuple[Transition, ...]
    scope: Optional[Tuple[str, ...]] = None

    # -- lookups
    @property
    def error_states(self):
        return tuple(s for s, _ in self.errors)

    @property
    def messages(self) -> Dict[str, str]:
        return dict(self.errors)

    @property
    def labels(self):
        out = []
        for t in self.transitions:
            if t.pattern.label not in out:
                out.append(t.pattern.label)
        return tuple(out)

    def patterns(self):
        out = []
        for t in self.transitions:
            if t.pattern not in out:
                out.append(t.pattern)
        return out

    def index(self, state) -> int:
        return self.states.index(state)

    def step(self, state: str, label: str) -> str:
        """Successor of ``state`` on ``label``; no transition means no change."""
        for t in self.transitions:
            if t.src == state and t.pattern.label == label:
                return t.dst
        return state

    def fire(self, state: str, label: str):
        """Return ``(next_state, error_state_or_None)``.

        An error destination leaves the state unchanged and reports the error.
        Error states are absorbing: firing from one changes nothing.
        """
        if state in self.error_states:
            return state, None
        dst = self.step(state, label)
        if dst in self.error_states:
            return state, dst
        return dst, None

    def fire_index(self, idx: int, label: str):
        new, err = self.fire(self.states[idx], label)
        return self.index(new), err

    def can_error(self, label) -> bool:
        errs = self.error_states
        return any(t.pattern.label == label and t.dst in errs for t in self.transitions)

    def is_deterministic(self) -> bool:
        seen = set()
        for t in self.transitions:
            key = (t.src, t.pattern.label)
            if key in seen:
                return False
            seen.add(key)
        return True


_TRANS_RE = re.compile(r"^(\w+)\s*->\s*(\w+)\s+on\s+(.*)$")
_CALL_RE = re.compile(r"^call\s+([A-Za-z_]\w*)\s*\(\s*(?:\$x@(\d+))?\s*\)$")


def _pattern(text, lineno):
    text = text.strip()
    if text == "return":
        return Pattern("return")
    m = _CALL_RE.match(text)
    if m is None:
        raise SpecError(f"bad pattern '{text}'", lineno)
    arg = int(m.group(2)) if m.group(2) else None
    if arg is not None and arg < 1:
        raise SpecError("binder position is 1-based", lineno)
    return Pattern("call", m.group(1), arg)


def parse_machine(spec: str, filename=None) -> MachineSpec:
    name = None
    states = None
    initial = None
    errors = []
    trans = []
    scope = None
    try:
        for lineno, raw in enumerate(spec.splitlines(), 1):
            line = raw.split("#", 1)[0].strip() if '"' not in raw else _strip_comment(raw)
            if not line:
                continue
            word, _, rest = line.partition(" ")
            rest = rest.strip()
            if word == "machine":
                if not rest:
                    raise SpecError("machine needs a name", lineno)
                name = rest
            elif word == "states":
                states = tuple(rest.split())
                if len(set(states)) != len(states):
                    raise SpecError("duplicate state", lineno)
            elif word == "initial":
                initial = rest
            elif word == "error":
                parts = shlex.split(rest)
                if len(parts) != 2:
                    raise SpecError('expected: error STATE "message"', lineno)
                errors.append((parts[0], parts[1], lineno))
            elif word == "trans":
                m = _TRANS_RE.match(rest)
                if m is None:
                    raise SpecError("expected: trans A -> B on PATTERN", lineno)
                trans.append((m.group(1), m.group(2), _pattern(m.group(3), lineno), lineno))
            elif word == "scope":
                scope = tuple(rest.split())
            else:
                raise SpecError(f"unknown directive '{word}'", lineno)

        if name is None:
            raise SpecError("missing 'machine' line")
        if not states:
            raise SpecError("missing 'states' line")
        if initial is None:
            raise SpecError("missing initial state")
        if initial not in states:
            raise SpecError(f"unknown initial state '{initial}'")
        err_names = []
        for s, _, lineno in errors:
            if s not in states:
                raise SpecError(f"unknown error state '{s}'", lineno)
            if s in err_names:
                raise SpecError(f"duplicate error state '{s}'", lineno)
            err_names.append(s)
        if initial in err_names:
            raise SpecError("initial state cannot be an error state")
        seen = set()
        transitions = []
        for src, dst, pat, lineno in trans:
            for s in (src, dst):
                if s not in states:
                    raise SpecError(f"unknown state '{s}' in transition", lineno)
            if src in err_names:
                raise SpecError(f"error state '{src}' has an outgoing transition", lineno)
            key = (src, pat.label)
            if key in seen:
                raise SpecError(f"duplicate transition from '{src}' on '{pat.label}'", lineno)
            seen.add(key)
            transitions.append(Transition(src, dst, pat))
        # one label must always bind the same argument
        binders = {}
        for t in transitions:
            prev = binders.setdefault(t.pattern.label, t.pattern)
            if prev != t.pattern:
                raise SpecError(f"inconsistent patterns for label '{t.pattern.label}'")
    except SpecError as exc:
        exc.filename = exc.filename or filename
        raise
    return MachineSpec(name, states, initial, tuple((s, m) for s, m, _ in errors),
                       tuple(transitions), scope)


def _strip_comment(raw):
    out, quoted = [], False
    for ch in raw:
        if ch == '"':
            quoted = not quoted
        elif ch == "#" and not quoted:
            break
        out.append(ch)
    return "".join(out).strip()


def load_machine(path) -> MachineSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_machine(fh.read(), filename=str(path))


@dataclass(frozen=True)
class MatchSite:
    loc: LocationId
    pattern: Pattern
    label: str
    binder: Optional[object] = None  # argument Expr; None for return patterns
    line: int = 0


def match_sites(cfg: ProgramCFG, spec: MachineSpec, entry=None):
    """All statements matching some transition pattern, in location order.

    Call patterns match any call to the named function; return patterns
    match every explicit ``return`` in scope (the spec's ``scope`` line, or
    the functions reachable from ``entry``, or every function).
    """
    calls = {p.func: p for p in spec.patterns() if p.kind == "call"}
    ret_pat = next((p for p in spec.patterns() if p.kind == "return"), None)
    if spec.scope is not None:
        ret_scope = set(spec.scope)
    else:
        ret_scope = set(cfg.reachable_functions(entry))
    call_scope = set(cfg.reachable_functions(entry))
    sites = []
    for fname, f in cfg.functions.items():
        for node in f.nodes:
            if node.kind == "call" and node.op.func in calls and fname in call_scope:
                pat = calls[node.op.func]
                binder = None
                if pat.arg is not None:
                    if pat.arg > len(node.op.args):
                        continue
                    binder = node.op.args[pat.arg - 1]
                sites.append(MatchSite(f.loc(node.index), pat, pat.label, binder, node.line))
            elif node.kind == "return" and ret_pat is not None and fname in ret_scope:
                sites.append(MatchSite(f.loc(node.index), ret_pat, "return", None, node.line))
    return sites
