import pytest

from minisse import andersen, instrument, interpret, match_sites
from minisse.errors import NoTargets

from helpers import cfg_of


@pytest.fixture(scope="module")
def example(example_src, lock_spec):
    cfg = cfg_of(example_src)
    pts = andersen(cfg, "foo")
    return cfg, pts, match_sites(cfg, lock_spec, "foo")


def test_one_state_variable_per_lock(example, lock_spec):
    cfg, pts, sites = example
    ip = instrument(cfg, lock_spec, sites, pts)
    assert [(t, v) for t, v, _ in ip.machine_vars] == [("L1", "smL1"), ("L2", "smL2")]
    assert len(ip.fire_sites) == 3
    assert {fs.loc.func for fs in ip.fire_sites} == {"copy"}
    assert [fs.label for fs in ip.fire_sites] == ["lock", "unlock", "return"]


def test_no_sites_means_no_targets(lock_spec):
    cfg = cfg_of("int g;\nvoid f() { g = 1; }")
    with pytest.raises(NoTargets):
        instrument(cfg, lock_spec, match_sites(cfg, lock_spec, "f"), andersen(cfg, "f"))


def test_unknown_target_rejected(example, lock_spec):
    cfg, pts, sites = example
    with pytest.raises(ValueError, match="L3"):
        instrument(cfg, lock_spec, sites, pts, ["L3"])


def test_single_target_instrumentation(example, lock_spec):
    cfg, pts, sites = example
    ip = instrument(cfg, lock_spec, sites, pts, ["L1"])
    assert ip.state_vars == ("smL1",)
    assert "smL2" not in {g.name for g in ip.cfg.program.globals}
    # second copy() call locks L2: its fires dispatch to nothing
    res = interpret(ip.cfg, "foo", {"n": 1, "buf1.nonnull": 0, "buf2.nonnull": 1,
                                    "src.nonnull": 1})
    assert res.outcome == "returned"
    # first call with a lock: smL1 goes U -> L -> RL on return
    res = interpret(ip.cfg, "foo", {"n": 0, "buf1.nonnull": 1, "src.nonnull": 1})
    assert res.outcome == "fault"
    assert res.fault.detail[1:3] == ("L1", "RL")


def test_transparency_on_running_example(example, lock_spec):
    cfg, pts, sites = example
    ip = instrument(cfg, lock_spec, sites, pts)
    for n in (0, 1, 3):
        inputs = {"n": n, "buf1.nonnull": 1, "buf2.nonnull": 1, "src.nonnull": 1}
        a = interpret(cfg, "foo", inputs)
        b = interpret(ip.cfg, "foo", inputs)
        if b.outcome == "returned":
            assert a.outcome == "returned"
        else:
            assert b.fault.kind == "assertion-failure"
