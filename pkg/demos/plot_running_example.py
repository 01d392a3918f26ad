"""
Running example, phase by phase
===============================

The lock/unlock program from the package data is pushed through every
phase of the pipeline: metal dataflow, instrumentation, slicing and
symbolic execution.  Metal reports two candidate errors per lock; only the
return-in-locked-state error survives symbolic execution.
"""

from importlib import resources

from minisse import (
    andersen, build_cfg, criteria_from_instrumentation, instrument, load_machine,
    match_sites, metal_fixpoint, metal_reports, parse, slice_program, sym_execute,
)
from minisse.printer import format_program

data = resources.files("minisse") / "data"
source = (data / "running_example.mc").read_text()
spec = load_machine(data / "lock.sm")
cfg = build_cfg(parse(source))

###############################################################################
# Metal view of ``copy`` on its own, one machine for the lock parameter.

pts = andersen(cfg, "copy")
ssm = metal_fixpoint(cfg, spec, match_sites(cfg, spec, "copy"), pts, entry="copy")
print(ssm.annotate("copy", ssm.targets[0]))
for r in metal_reports(ssm, spec):
    print(f"candidate: {r.error_state} at line {r.line} ({r.message})")

###############################################################################
# From ``foo`` the lock parameter points to both globals, so the program
# gets one state variable per lock.

pts = andersen(cfg, "foo")
sites = match_sites(cfg, spec, "foo")
ip = instrument(cfg, spec, sites, pts)
print("\npts(copy.L) =", sorted(pts["copy.L"]))
print("state variables:", [v for _, v, _ in ip.machine_vars])

###############################################################################
# Slicing with respect to the error checks drops the copy loop.

sp = slice_program(ip, criteria_from_instrumentation(ip), pts)
print()
print(format_program(sp.cfg, cleanup=True))
print(f"removed {sp.removed} of {sp.total} statements")

###############################################################################
# The slice has few enough paths to explore them all.

out = sym_execute(sp, "foo")
print(f"\n{len(out.completed)} completed paths, exhaustive={out.exhaustive}")
for p in out.bugs:
    print(f"  bug {p.detail[1]}/{p.detail[2]} with inputs {p.model}")
