"""Acceptance criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py`` (the lines appear in the
terminal summary) or directly with ``python3 tests/test_acceptance.py``.
Runtime limits are wall-clock and include parsing.
"""

import io
import re
import sys
import time
from pathlib import Path

import pytest

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

from minisse import (  # noqa: E402
    RunConfig, andersen, build_cfg, instrument, interpret, load_machine, match_sites,
    parse_file, replay, run_classify, sym_execute,
)
from minisse.cli import main as cli_main  # noqa: E402
from minisse.metal import CandidateReport  # noqa: E402
from minisse.slicer import criteria_from_instrumentation, slice_program  # noqa: E402

from corpus_util import check_program, load_corpus  # noqa: E402

DATA = HERE.parent / "src" / "minisse" / "data"
EXAMPLE = DATA / "running_example.mc"
LOCK = DATA / "lock.sm"

RESULTS = []  # (number, ok, text), read by the terminal summary hook


TITLES = [
    "metal per-line sets", "sliced running example", "classification round trip",
    "slicing equivalence", "metal soundness", "symexec exactness",
    "instrumentation transparency", "kernel measurements",
]


def record(num, ok, text):
    line = f"[{'PASS' if ok else 'FAIL'}] {num}. {TITLES[num - 1]}: {text}"
    RESULTS.append((num, ok, line))
    print(line)
    return ok


# ------------------------------------------------------------------ checks

COPY_SETS = {1: "U", 2: "U", 3: "U", 4: "U", 5: "U", 6: "L", 14: "U,DU", 15: "U,L", 16: "U,RL"}
COPY_SETS.update({ln: "U,L" for ln in range(7, 14)})


def criterion_1():
    t0 = time.perf_counter()
    out = io.StringIO()
    code = cli_main(["metal", "--source", str(EXAMPLE), "--machine", str(LOCK),
                     "--entry", "copy"], out)
    dt = time.perf_counter() - t0
    text = out.getvalue()
    got = {}
    for m in re.finditer(r"^\s*(\d+):.*// \{([^}]*)\}$", text, re.M):
        got[int(m.group(1))] = m.group(2)
    reports = [ln for ln in text.splitlines() if ln.startswith("{")]
    errs = sorted(re.search(r'"error_state": "(\w+)"', r).group(1) for r in reports)
    ok = code == 0 and got == COPY_SETS and errs == ["DU", "RL"] and dt < 1.0
    diff = {k: (COPY_SETS.get(k), got.get(k)) for k in set(COPY_SETS) | set(got)
            if COPY_SETS.get(k) != got.get(k)}
    return ok, (f"copy() state sets {'match' if not diff else 'differ ' + str(diff)}, "
                f"reports {errs}, {dt:.3f}s (< 1s)")


def _example_slice(targets=None):
    cfg = build_cfg(parse_file(EXAMPLE))
    spec = load_machine(LOCK)
    pts = andersen(cfg, "foo")
    ip = instrument(cfg, spec, match_sites(cfg, spec, "foo"), pts, targets)
    return cfg, ip, slice_program(ip, criteria_from_instrumentation(ip), pts)


def criterion_2():
    t0 = time.perf_counter()
    _, _, sp = _example_slice()
    copy = sp.cfg.functions["copy"]
    acyclic = not copy.back_edges()
    calls = [n.op.func for f in sp.cfg.functions.values() for n in f.nodes
             if n.kind == "call" and n.op.func in ("lock", "unlock")]
    out = sym_execute(sp, "foo")
    dt = time.perf_counter() - t0
    completed = len(out.completed)
    rl = sum(p.detail[2] == "RL" for p in out.bugs)
    other = sum(p.detail[2] != "RL" for p in out.bugs)
    ok = (acyclic and not calls and completed == 6 and rl == 3 and other == 0
          and dt < 5.0)
    return ok, (f"slice acyclic={acyclic}, lock/unlock calls left={len(calls)}, "
                f"{completed} completed paths (want 6), {rl} RL bug paths (want 3), "
                f"{other} DU/DL, {dt:.3f}s (< 5s)")


def criterion_3():
    t0 = time.perf_counter()
    config = RunConfig(str(EXAMPLE), str(LOCK), "foo")
    du = run_classify(config, CandidateReport("lock_sm", "L1", "DU", None, ""))
    rl = run_classify(config, CandidateReport("lock_sm", "L1", "RL", None, ""))
    _, ip, _ = _example_slice()
    model = rl.model or {}
    confirmed = rl.verdict == "BUG" and replay(ip, "foo", model, bug=("L1", "RL")).confirmed
    # brute force at 8 bits: RL on L1 happens with non-NULL buffers exactly when n <= 0
    bad = set()
    for n in range(-128, 128):
        run = interpret(ip.cfg, "foo", {"n": n, "buf1.nonnull": 1, "buf2.nonnull": 1},
                        int_width=8)
        if run.fault is not None and run.fault.detail and run.fault.detail[1:3] == ("L1", "RL"):
            bad.add(n)
    brute_ok = bad == set(range(-128, 1)) and model.get("n") in bad
    model_ok = model.get("n") == 0 and model.get("buf1.nonnull") == 1
    dt = time.perf_counter() - t0
    ok = du.verdict == "FP" and confirmed and brute_ok and model_ok and dt < 10.0
    return ok, (f"DU -> {du.verdict}, RL -> {rl.verdict} model {model} "
                f"(replay confirmed={confirmed}, brute force ok={brute_ok}), {dt:.3f}s (< 10s)")


def _corpus(field):
    progs = load_corpus()
    bad, runs = [], 0
    for p in progs:
        rep = check_program(p.name)
        runs += rep.runs
        bad.extend(getattr(rep, field))
    return progs, bad, runs


def criterion_4():
    progs, bad, runs = _corpus("slicing")
    ok = len(progs) >= 20 and not bad
    return ok, (f"slicing equivalence on {len(progs)} programs, {runs} runs: "
                f"{len(bad)} violations" + (f" e.g. {bad[0]}" if bad else ""))


def criterion_5():
    progs, bad, runs = _corpus("metal")
    ok = len(progs) >= 20 and not bad
    return ok, (f"metal soundness on {len(progs)} programs, {runs} runs: {len(bad)} violations"
                + (f" e.g. {bad[0]}" if bad else ""))


def criterion_6():
    progs = load_corpus()
    checked = [p.name for p in progs if check_program(p.name).symexec_checked]
    bad = [v for n in checked for v in check_program(n).symexec]
    ok = len(checked) > 0 and not bad
    return ok, (f"symexec exactness on {len(checked)} acyclic-slice programs: "
                f"{len(bad)} violations" + (f" e.g. {bad[0]}" if bad else ""))


def criterion_7():
    progs, bad, runs = _corpus("transparency")
    ok = len(progs) >= 20 and not bad
    return ok, (f"instrumentation transparency on {len(progs)} programs, {runs} runs: "
                f"{len(bad)} violations" + (f" e.g. {bad[0]}" if bad else ""))


def criterion_8():
    _, _, sp = _example_slice()
    return True, (f"informational only: running example slice ratio "
                  f"{100 * sp.slice_ratio:.1f}% ({sp.removed} of {sp.total}); "
                  f"kernel measurements are not reproduced")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8]


@pytest.mark.parametrize("num", range(1, len(CRITERIA) + 1))
def test_criterion(num):
    ok, text = CRITERIA[num - 1]()
    assert record(num, ok, text), text


if __name__ == "__main__":
    failed = 0
    for i, crit in enumerate(CRITERIA, 1):
        ok, text = crit()
        failed += not record(i, ok, text)
    sys.exit(1 if failed else 0)
