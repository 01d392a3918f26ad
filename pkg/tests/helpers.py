"""Small builders shared by the unit tests."""

from minisse import (
    andersen, build_cfg, instrument, match_sites, metal_fixpoint, parse,
)
from minisse.slicer import criteria_from_instrumentation, slice_program

LOCK_DECLS = "void lock(int *x);\nvoid unlock(int *x);\n"


def cfg_of(src):
    return build_cfg(parse(src))


def pipeline(src, spec, entry, targets=None):
    cfg = cfg_of(src)
    pts = andersen(cfg, entry)
    sites = match_sites(cfg, spec, entry)
    ip = instrument(cfg, spec, sites, pts, targets)
    sp = slice_program(ip, criteria_from_instrumentation(ip), pts)
    return cfg, pts, sites, ip, sp


def metal_of(src, spec, entry):
    cfg = cfg_of(src)
    pts = andersen(cfg, entry)
    sites = match_sites(cfg, spec, entry)
    return cfg, metal_fixpoint(cfg, spec, sites, pts, entry=entry)
