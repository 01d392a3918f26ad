import pytest

from minisse import LocationId, interpret
from minisse.slicer import SlicingCriterion, criteria_from_instrumentation, slice_program

from helpers import LOCK_DECLS, pipeline


@pytest.fixture(scope="module")
def example(example_src, lock_spec):
    return pipeline(example_src, lock_spec, "foo")


def test_criteria_of_running_example(example):
    ip = example[3]
    crit = criteria_from_instrumentation(ip)
    assert len(crit) == 3
    assert all(c.variables == {"smL1", "smL2"} for c in crit)
    assert [ip.cfg.node(c.loc).line for c in crit] == [6, 14, 16]


def test_single_target_criteria(example_src, lock_spec):
    ip = pipeline(example_src, lock_spec, "foo", targets=["L2"])[3]
    crit = criteria_from_instrumentation(ip)
    assert crit and all(c.variables == {"smL2"} for c in crit)


def test_one_criterion_per_check_for_one_error_machine():
    from minisse import parse_machine
    spec = parse_machine("machine once\nstates A B\ninitial A\nerror B \"twice\"\n"
                         "trans A -> B on call lock($x@1)\n")
    src = LOCK_DECLS + "int L;\nvoid f() { lock(&L); lock(&L); }"
    ip = pipeline(src, spec, "f")[3]
    crit = criteria_from_instrumentation(ip)
    assert len(crit) == len(ip.error_check_locations) == 2


def test_running_example_slice(example):
    sp = example[4]
    copy = sp.cfg.functions["copy"]
    assert not copy.back_edges()
    calls = [n.op.func for n in copy.nodes if n.kind == "call"]
    assert "lock" not in calls and "unlock" not in calls
    assert len(sp.program.fire_sites) == 3
    assert sum(n.kind == "branch" for n in copy.nodes) == 3  # && adds one
    kept_lines = {n.line for n in copy.nodes if n.kind == "assign"}
    assert 5 in kept_lines  # len = n
    assert (sp.removed, sp.total) == (7, 17)


def test_maximal_criteria_keep_everything(example):
    _, pts, _, ip, _ = example
    names = set(ip.state_vars) | {g.name for g in ip.cfg.program.globals}
    for f in ip.cfg.functions.values():
        names |= {f.func.qual(p.name) for p in f.func.params + f.func.locals}
    crit = [SlicingCriterion(loc, frozenset(names)) for loc in ip.cfg.locations()]
    sp = slice_program(ip, crit, pts)
    assert sp.removed == 0


def test_straight_line_relevance(lock_spec):
    src = LOCK_DECLS + ("int a; int b; int c; int L;\n"
                        "void f() { lock(&L); a = 1; b = 2; c = a; unlock(&L); }\n")
    _, pts, _, ip, _ = pipeline(src, lock_spec, "f")
    sp = slice_program(ip, [SlicingCriterion(LocationId("f", 1), frozenset({"c"}))], pts)
    targets = {n.op.target.name for n in sp.cfg.functions["f"].nodes if n.kind == "assign"}
    assert targets == {"a", "c"}
    # the observed value survives
    for prog in (ip.cfg, sp.cfg):
        res = interpret(prog, "f", {}, watch=["c"])
        assert res.outcome == "returned"


def test_provenance_maps_back(example):
    sp = example[4]
    for loc in sp.cfg.locations():
        orig = sp.origin(loc)
        assert orig in sp.kept
        assert sp.cfg.node(loc).kind == sp.source.cfg.node(orig).kind


def test_empty_criteria_rejected(example):
    with pytest.raises(ValueError):
        slice_program(example[3], [], example[1])
