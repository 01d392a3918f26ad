import itertools

import pytest

from minisse import Limits, interpret, replay, solve, sym_execute
from minisse.symexec import SAT, UNSAT, check_model
from minisse.symexec.expr import Const, Sym, and_, cmp, not_

from helpers import LOCK_DECLS, cfg_of, pipeline

W8 = (-128, 127)


@pytest.fixture(scope="module")
def example(example_src, lock_spec):
    return pipeline(example_src, lock_spec, "foo")


# ------------------------------------------------------------------ solver


def test_contradiction_is_unsat():
    n = Sym("n")
    res = solve([cmp(">", n, Const(0)), cmp("<=", n, Const(0))], domains={"n": W8})
    assert res.status == UNSAT


def test_empty_conjunction_is_sat():
    res = solve([])
    assert res.status == SAT and res.model == {}


def test_leftmost_bug_path_condition():
    n, src, dst = Sym("n"), Sym("src.nonnull"), Sym("dst.nonnull")
    pc = [cmp("!=", src, Const(0)), cmp("!=", dst, Const(0)), not_(cmp(">", n, Const(0)))]
    doms = {"n": W8, "src.nonnull": (0, 1), "dst.nonnull": (0, 1)}
    res = solve(pc, domains=doms)
    assert res.status == SAT
    assert res.model == {"n": 0, "src.nonnull": 1, "dst.nonnull": 1}
    brute = [v for v in range(-128, 128)
             if check_model(pc, {"n": v, "src.nonnull": 1, "dst.nonnull": 1})]
    assert brute == list(range(-128, 1))


def test_exhaustive_two_symbol_unsat():
    a, b = Sym("a"), Sym("b")
    pc = [cmp("==", a, b), cmp("!=", a, b)]
    assert solve(pc, domains={"a": W8, "b": W8}).status == UNSAT


def test_budget_exhaustion_is_unknown():
    a, b = Sym("a"), Sym("b")
    from minisse.symexec.expr import binop
    pc = [cmp("==", binop("*", a, b, 32), Const(1_000_003)), cmp(">", a, Const(1)),
          cmp(">", b, Const(1))]
    res = solve(pc, budget=50)
    assert res.status in ("UNKNOWN", UNSAT)
    assert res.status != SAT


def test_solver_is_deterministic():
    n = Sym("n")
    pc = [and_(cmp(">", n, Const(3)), cmp("<", n, Const(9)))]
    assert solve(pc, domains={"n": W8}) == solve(pc, domains={"n": W8})


# ------------------------------------------------------------------ engine


def test_sliced_example_paths(example):
    cfg, _, _, ip, sp = example
    out = sym_execute(sp, "foo", int_width=8)
    assert len(out.completed) == 6
    assert out.exhaustive
    assert {p.detail[2] for p in out.bugs} == {"RL"}
    assert out.bug_set() == {("L1", "RL"), ("L2", "RL")}
    for p in out.bugs:
        assert check_model(p.pc, p.model)
        assert p.model["n"] == 0
        r = replay(ip, "foo", p.model, bug=(p.detail[1], "RL"), int_width=8)
        assert r.confirmed


def test_concrete_bug_set_matches(example):
    """Brute force: which (target, error) pairs are reachable at all."""
    cfg, _, _, ip, sp = example
    seen = set()
    for n, b1, b2 in itertools.product(range(-128, 128), (0, 1), (0, 1)):
        r = interpret(sp.cfg, "foo", {"n": n, "buf1.nonnull": b1, "buf2.nonnull": b2},
                      int_width=8)
        if r.outcome == "fault":
            seen.add(r.fault.detail[1:3])
    assert seen == sym_execute(sp, "foo", int_width=8).bug_set()


def test_unsliced_program_has_more_paths(example):
    ip = example[3]
    out = sym_execute(ip, "foo", int_width=8)
    assert len(out.completed) > 6


def test_straight_line_entry_has_one_path():
    cfg = cfg_of("int g;\nint f(int a) { g = a + 1; return g; }")
    out = sym_execute(cfg, "f")
    assert len(out.paths) == 1 and out.paths[0].kind == "returned"
    assert out.solver_calls <= 1


def test_out_of_range_region_access():
    cfg = cfg_of("int f(int *p) { return p[16]; }")
    out = sym_execute(cfg, "f", ptr_elems=16)
    assert [p.kind for p in out.paths] == ["memory_error"]
    me = out.paths[0]
    assert me.detail[0] == "out-of-bounds" and me.model is not None
    r = interpret(cfg, "f", me.model)
    assert r.outcome == "fault" and r.fault.kind == "out-of-bounds"


def test_symbolic_index_splits_in_and_out_of_range():
    cfg = cfg_of("int f(int *p, int k) { return p[k]; }")
    out = sym_execute(cfg, "f", int_width=8)
    kinds = sorted(p.kind for p in out.completed)
    assert "returned" in kinds and "memory_error" in kinds
    for p in out.memory_errors:
        assert interpret(cfg, "f", p.model, int_width=8).fault.kind == "out-of-bounds"


def test_null_parameter_policy():
    cfg = cfg_of("int f(int *p) { return *p; }")
    assert not sym_execute(cfg, "f").memory_errors
    out = sym_execute(cfg, "f", null_params=True)
    assert [p.detail[0] for p in out.memory_errors] == ["null-deref"]


def test_loop_bound_prunes(lock_spec):
    src = LOCK_DECLS + ("int L;\nint main(int n) {\n   int i;\n   i = 0;\n"
                        "   while (i < n) {\n      if (i == 2) lock(&L);\n      i = i + 1;\n"
                        "   }\n   return 0;\n}\n")
    sp = pipeline(src, lock_spec, "main")[4]
    two = sym_execute(sp, "main", Limits(loop_bound=2), int_width=8)
    three = sym_execute(sp, "main", Limits(loop_bound=3), int_width=8)
    assert two.bug_set() == set()
    assert two.budget_stopped and all(p.reason == "loop_bound" for p in two.budget_stopped)
    assert three.bug_set() == {("L", "RL")}


def test_wall_timeout_flags_outcome(lock_spec):
    src = LOCK_DECLS + ("int L;\nint main(int n) {\n   int i;\n   i = 0;\n"
                        "   while (i < n) { i = i + 1; }\n   if (i == 100000) lock(&L);\n"
                        "   return 0;\n}\n")
    sp = pipeline(src, lock_spec, "main")[4]
    assert sp.cfg.functions["main"].back_edges()
    out = sym_execute(sp, "main", Limits(wall_timeout=0.2))
    assert out.wall_timeout and not out.exhaustive


def test_until_stops_early(example):
    sp = example[4]
    out = sym_execute(sp, "foo", int_width=8, until=lambda p: p.kind == "bug")
    assert out.stopped_early
    assert len(out.bugs) == 1


def test_dot_tree(example):
    out = sym_execute(example[4], "foo", int_width=8, dump_tree=True)
    assert out.tree.startswith("digraph")
    assert 'label="T"' in out.tree and 'label="F"' in out.tree


def test_limits_validation():
    with pytest.raises(ValueError):
        Limits(step_budget=0)
    with pytest.raises(ValueError):
        Limits(loop_bound=-1)


# ------------------------------------------------------------------ replay


def test_replay_confirms_rl(example):
    ip = example[3]
    r = replay(ip, "foo", {"n": 0, "buf1.nonnull": 1, "src.nonnull": 1}, bug=("L1", "RL"))
    assert r.confirmed


def test_replay_wrong_kind_is_not_confirmed(example):
    ip = example[3]
    r = replay(ip, "foo", {"n": 0, "buf1.nonnull": 1}, bug=("L1", "DU"))
    assert not r.confirmed


def test_replay_budget(example):
    ip = example[3]
    r = replay(ip, "foo", {"n": 5, "buf1.nonnull": 1, "src.nonnull": 1},
               bug=("L1", "RL"), step_budget=3)
    assert r.status == "not_confirmed" and r.reason == "budget"


def test_replay_needs_exactly_one_expectation(example):
    with pytest.raises(ValueError):
        replay(example[3], "foo", {})
