import json

import pytest

from minisse import RunConfig, emit, interpret, run_classify, run_find
from minisse import driver
from minisse.errors import PipelineError, ReportMismatch
from minisse.metal import CandidateReport

from helpers import LOCK_DECLS, cfg_of

LOOP3 = LOCK_DECLS + """int L;
int main(int n) {
   int i;
   i = 0;
   while (i < n) {
      if (i == 2) lock(&L);
      i = i + 1;
   }
   return 0;
}
"""

SPIN = LOCK_DECLS + """int L;
int main(int n) {
   int i;
   i = 0;
   while (i < n) { i = i + 1; }
   if (i == 100000) lock(&L);
   if (i == 100001) unlock(&L);
   return 0;
}
"""


def report(target, err, line=0):
    return CandidateReport("lock_sm", target, err, None, "", line)


@pytest.fixture(scope="module")
def cfg_example(example_path, lock_path):
    return RunConfig(str(example_path), str(lock_path), "foo", int_width=8)


def test_find_running_example(cfg_example):
    vs = run_find(cfg_example)
    assert sorted((v.target, v.error_state, v.verdict) for v in vs) == [
        ("L1", "RL", "BUG"), ("L2", "RL", "BUG")]
    for v in vs:
        assert v.model["n"] == 0 and v.line == 16
        assert v.trace and v.trace[-1] == "copy:16"
        assert 0 < v.slice_ratio < 1
        assert {"compile", "instrument", "slice", "symexec", "total"} <= set(v.timings)


def test_find_lock_free_is_clean(write, lock_path):
    src = write("clean.mc", "int g;\nint main(int n) { g = n; return g; }\n")
    with pytest.warns(UserWarning, match="vacuous"):
        vs = run_find(RunConfig(str(src), str(lock_path), "main"))
    assert vs == []
    assert driver.summary(vs) == driver.CLEAN
    assert emit(vs) == "result: CLEAN-WITHIN-BOUNDS\n"
    assert driver.exit_code(vs) == 0


def test_loop_bound_decides(write, lock_path):
    src = write("loop3.mc", LOOP3)
    # concrete oracle: the bug needs n >= 3, i.e. three body entries
    cfg = cfg_of(LOOP3)
    from minisse import andersen, instrument, load_machine, match_sites
    spec = load_machine(lock_path)
    ip = instrument(cfg, spec, match_sites(cfg, spec, "main"), andersen(cfg, "main"))
    bad = [n for n in range(-128, 128)
           if interpret(ip.cfg, "main", {"n": n}, int_width=8).outcome == "fault"]
    assert min(bad) == 3
    two = run_find(RunConfig(str(src), str(lock_path), "main", loop_bound=2, int_width=8))
    assert two == []
    three = run_find(RunConfig(str(src), str(lock_path), "main", loop_bound=3, int_width=8))
    assert [(v.target, v.error_state, v.verdict) for v in three] == [("L", "RL", "BUG")]
    assert three[0].model["n"] >= 3


def test_classify_du_is_false_positive(cfg_example):
    v = run_classify(cfg_example, report("L2", "DU"))
    assert v.verdict == "FP"
    assert v.fp_caveat == driver.FP_CAVEAT


def test_classify_rl_is_bug(cfg_example):
    v = run_classify(cfg_example, report("L1", "RL"))
    assert v.verdict == "BUG"
    assert v.model["n"] == 0


def test_classify_cyclic_slice_times_out(write, lock_path):
    src = write("spin.mc", SPIN)
    config = RunConfig(str(src), str(lock_path), "main", wall_timeout=0.3)
    v, pl = driver.classify_with_pipeline(config, report("L", "DU"))
    assert pl.sp.cfg.functions["main"].back_edges()
    assert v.verdict == "TO" and v.to_reason == "wall"


def test_report_must_match_program(cfg_example):
    with pytest.raises(ReportMismatch):
        run_classify(cfg_example, report("L9", "RL"))
    with pytest.raises(ReportMismatch):
        run_classify(cfg_example, report("L1", "XX"))
    with pytest.raises(ReportMismatch):
        run_classify(cfg_example, CandidateReport("other", "L1", "RL", None, ""))


def test_pipeline_errors_name_their_phase(write, lock_path):
    src = write("bad.mc", "int main( { }")
    with pytest.raises(PipelineError, match="compile"):
        run_find(RunConfig(str(src), str(lock_path), "main"))
    good = write("good.mc", "int main() { return 0; }")
    with pytest.raises(PipelineError, match="nope"):
        run_find(RunConfig(str(good), str(lock_path), "nope"))


def test_config_validation(example_path, lock_path):
    with pytest.raises(ValueError):
        RunConfig(str(example_path), str(lock_path), "foo", int_width=12)
    with pytest.raises(ValueError):
        RunConfig(str(example_path), str(lock_path), "foo", wall_timeout=0)


# ------------------------------------------------------------------ output


def test_bug_json_contract():
    v = driver.Verdict("lock_sm", "L1", "RL", "BUG", model={"n": 0}, line=16)
    d = json.loads(emit([v], "json"))
    assert d["verdict"] == "BUG" and d["model"] == {"n": 0}


def test_empty_json_output():
    assert emit([], "json") == ""
    assert driver.exit_code([]) == 0


def test_fp_json_carries_caveat():
    v = driver.Verdict("lock_sm", "L2", "DU", "FP", fp_caveat=driver.FP_CAVEAT)
    d = json.loads(emit([v], "json"))
    assert d["fp_caveat"] == "slicing ignores nonterminating originals"


@pytest.mark.parametrize("kinds,code", [
    ([], 0), (["FP"], 0), (["BUG"], 1), (["BUG", "TO"], 1), (["TO"], 3), (["ME", "FP"], 3),
])
def test_exit_codes(kinds, code):
    vs = [driver.Verdict("m", "t", "e", k) for k in kinds]
    assert driver.exit_code(vs) == code


def test_text_table_ends_with_summary():
    vs = [driver.Verdict("lock_sm", "L1", "RL", "BUG", model={"n": 0}),
          driver.Verdict("lock_sm", "L2", "DU", "FP", fp_caveat=driver.FP_CAVEAT)]
    text = emit(vs)
    assert text.splitlines()[0].split()[:4] == ["machine", "target", "error", "result"]
    assert text.endswith("result: BUG\n")


def test_load_reports_formats(write):
    one = {"machine": "lock_sm", "target": "L1", "error_state": "RL"}
    two = dict(one, error_state="DU")
    for text in (json.dumps(one), json.dumps([one, two]),
                 json.dumps(one) + "\n" + json.dumps(two) + "\n"):
        reps = driver.load_reports(write("r.json", text))
        assert reps[0].target == "L1"
    with pytest.raises(ReportMismatch):
        driver.load_reports(write("r.json", json.dumps({"machine": "x"})))
