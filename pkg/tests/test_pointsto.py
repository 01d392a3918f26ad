from minisse import andersen, match_sites
from minisse.pointsto import targets_of

from helpers import LOCK_DECLS, cfg_of


def closure(addr, copies):
    """Reference inclusion-constraint solution by naive iteration."""
    pts = {v: set(o) for v, o in addr.items()}
    changed = True
    while changed:
        changed = False
        for dst, src in copies:
            new = pts.get(src, set()) - pts.setdefault(dst, set())
            if new:
                pts[dst] |= new
                changed = True
    return pts


def test_lock_parameter_points_to_both_locks(example_src):
    pts = andersen(cfg_of(example_src), "foo")
    assert pts["copy.L"] == {"L1", "L2"}


def test_no_pointers_no_entries():
    pts = andersen(cfg_of("int a; int b;\nvoid f() { a = b + 1; }"), "f")
    assert len(pts) == 0
    assert pts.dump() == ""


def test_copy_chain_matches_closure():
    src = ("int a; int b;\n"
           "void f() { int *p; int *q; int *r; p = &a; q = p; r = &b; q = r; }")
    pts = andersen(cfg_of(src), "f")
    want = closure({"p": {"a"}, "r": {"b"}}, [("q", "p"), ("q", "r")])
    for v in "pqr":
        assert pts[f"f.{v}"] == want[v]
    assert pts["f.q"] == {"a", "b"}


def binder_objects(src, spec):
    cfg = cfg_of(LOCK_DECLS + src)
    pts = andersen(cfg, "f")
    return [targets_of(pts, [s.binder]) for s in match_sites(cfg, spec, "f") if s.binder]


def test_targets_of_address_literal(lock_spec):
    assert binder_objects("int L1;\nvoid f() { lock(&L1); }", lock_spec) == [{"L1"}]


def test_targets_of_parameter(example_src, lock_spec):
    cfg = cfg_of(example_src)
    pts = andersen(cfg, "foo")
    sites = [s for s in match_sites(cfg, lock_spec, "foo") if s.binder is not None]
    assert {targets_of(pts, [s.binder]) for s in sites} == {frozenset({"L1", "L2"})}


def test_targets_of_two_level_deref(lock_spec):
    src = "int a;\nvoid f() { int *p; int **pp; p = &a; pp = &p; lock(*pp); }"
    assert binder_objects(src, lock_spec) == [{"a"}]
    cfg = cfg_of(LOCK_DECLS + src)
    pts = andersen(cfg, "f")
    assert pts["f.pp"] == {"f.p"} and pts["f.p"] == {"a"}


def test_uninitialized_global_pointer_keeps_its_input_region(lock_spec):
    src = "int a; int *p;\nvoid f() { p = &a; lock(p); }"
    assert binder_objects(src, lock_spec) == [{"a", "*p"}]
