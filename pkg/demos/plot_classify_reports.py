"""
Classifying metal's candidate reports
=====================================

Every candidate report from the dataflow pass is checked on its own: the
program is instrumented for the report's target only, sliced, and explored
without a loop bound.  A confirmed path gives BUG; an exhaustive search
that never reaches the error gives FP.
"""

from importlib import resources

from minisse import (
    RunConfig, andersen, build_cfg, load_machine, match_sites, metal_fixpoint,
    metal_reports, parse_file, run_classify,
)

data = resources.files("minisse") / "data"
example, machine = str(data / "running_example.mc"), str(data / "lock.sm")

cfg = build_cfg(parse_file(example))
spec = load_machine(machine)
ssm = metal_fixpoint(cfg, spec, match_sites(cfg, spec, "foo"), andersen(cfg, "foo"),
                     entry="foo")
reports = metal_reports(ssm, spec)

config = RunConfig(example, machine, "foo", int_width=8)
for r in reports:
    v = run_classify(config, r)
    extra = v.model if v.model is not None else (v.fp_caveat or v.to_reason)
    print(f"{r.target:3} {r.error_state:3} line {r.line:2}: {v.verdict:4} {extra}")

###############################################################################
# The DU reports are false positives: unlock only runs when ``len > 0``,
# and then the lock was taken.  The FP verdict carries the one caveat of
# the approach, that slicing assumes the original program terminates.
