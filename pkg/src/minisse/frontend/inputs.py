"""Synthesis of the starting state for an entry function.

The same layout drives the concrete interpreter (inputs given as a
name -> int model) and the symbolic engine (every slot becomes a fresh
symbol), so a model found symbolically replays concretely unchanged.

Input names:

``n``            integer/char parameter or uninitialized integer global
``p[k]``         cell ``k`` of the region a pointer ``p`` is aimed at,
                 relative to the aim point (``k`` may be negative)
``p.nonnull``    0/1 flag choosing NULL or the region (uninitialized pointer
                 globals always; entry pointer parameters only when
                 ``null_params`` is set)
``a[k]``         cell ``k`` of an uninitialized global array
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .cfg import ProgramCFG

DEFAULT_PTR_ELEMS = 16


def region_name(owner: str) -> str:
    """Abstract object name of the region synthesized for pointer ``owner``."""
    return f"*{owner}"


@dataclass(frozen=True)
class Slot:
    name: str
    kind: str  # 'int' | 'flag'
    width: int  # bits; flags use 1

    @property
    def domain(self) -> Tuple[int, int]:
        if self.kind == "flag":
            return (0, 1)
        half = 1 << (self.width - 1)
        return (-half, half - 1)


@dataclass(frozen=True)
class Region:
    obj: str
    owner: str  # input-name prefix used for its cells
    elem: object  # CType
    size: int
    aim: int  # offset the owner points at
    symbolic: bool  # cells are inputs (False for pointer-element regions)

    def cell_name(self, k: int) -> str:
        return f"{self.owner}[{k - self.aim}]"


@dataclass(frozen=True)
class Binding:
    """How one program variable is initialized at entry.

    ``how`` is one of ``const`` (value), ``input`` (slot name),
    ``region`` (always points at region), ``nullable`` (flag chooses),
    ``cells`` (array whose cells are inputs), ``zero``.
    """
    qual: str
    ty: object
    how: str
    value: object = None
    region: Optional[str] = None
    flag: Optional[str] = None


class EntryLayout:
    def __init__(self, cfg: ProgramCFG, entry: str, *, int_width=32,
                 ptr_elems=DEFAULT_PTR_ELEMS, null_params=False):
        if entry not in cfg.functions:
            raise KeyError(f"entry function '{entry}' is not defined")
        self.cfg = cfg
        self.entry = entry
        self.int_width = int_width
        self.ptr_elems = ptr_elems
        self.null_params = null_params
        self.slots: Dict[str, Slot] = {}
        self.regions: Dict[str, Region] = {}
        self.bindings: List[Binding] = []
        func = cfg.functions[entry].func
        for g in cfg.globals:
            self._bind(g.name, g.name, g.ty, g.has_init, g.init, nullable=True)
        for p in func.params:
            self._bind(func.qual(p.name), p.name, p.ty, False, None,
                       nullable=null_params)

    def width_of(self, ty) -> int:
        return 8 if ty.kind == "char" else self.int_width

    def _slot(self, name, kind, width):
        self.slots[name] = Slot(name, kind, width)
        return name

    def _bind(self, qual, owner, ty, has_init, init, nullable):
        if has_init:
            self.bindings.append(Binding(qual, ty, "const", init))
        elif ty.is_integral:
            self.bindings.append(Binding(qual, ty, "input", self._slot(owner, "int", self.width_of(ty))))
        elif ty.is_array:
            reg = Region(qual, owner, ty.base, ty.size, 0, True)
            self.regions[qual] = reg
            for k in range(ty.size):
                self._slot(reg.cell_name(k), "int", self.width_of(ty.base))
            self.bindings.append(Binding(qual, ty, "cells", region=qual))
        elif ty.is_ptr:
            elem = ty.base
            symbolic = elem.is_integral
            reg = Region(region_name(owner if qual == owner else qual), owner, elem,
                         self.ptr_elems, self.ptr_elems // 2, symbolic)
            self.regions[reg.obj] = reg
            if symbolic:
                for k in range(reg.size):
                    self._slot(reg.cell_name(k), "int", self.width_of(elem))
            if nullable:
                flag = self._slot(f"{owner}.nonnull", "flag", 1)
                self.bindings.append(Binding(qual, ty, "nullable", region=reg.obj, flag=flag))
            else:
                self.bindings.append(Binding(qual, ty, "region", region=reg.obj))
        else:
            self.bindings.append(Binding(qual, ty, "zero"))

    def binding(self, qual) -> Binding:
        for b in self.bindings:
            if b.qual == qual:
                return b
        raise KeyError(qual)

    def param_inputs(self):
        """Slot names belonging to entry parameters (not their regions)."""
        func = self.cfg.functions[self.entry].func
        return [p.name for p in func.params if p.name in self.slots]
