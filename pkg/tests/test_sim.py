import random

import pytest

from dynweight.core import ConfigError, SystemConfig, client, server
from dynweight.scenario import ScenarioScript, make_action
from dynweight.sim import (
    CrashPoint,
    IdealRegisterArray,
    Schedule,
    Simulator,
    _BoundedPool,
    _FairPool,
    run,
    step_limit_from_env,
)
from dynweight.tracefile import dumps

CFG = SystemConfig(4, 1)


def script(*steps, cfg=CFG, crash_plan=()):
    return ScenarioScript("t", "rpwr", cfg, tuple(steps), crash_plan)


def transfer_s1():
    return make_action(0, "s1", "transfer", dest="s2", delta="1/10")


def test_empty_scenario_has_only_bookkeeping_records():
    tr = run(CFG, Schedule(1), script())
    assert [r["kind"] for r in tr.records] == ["Init", "End"]
    assert tr.quiescent


def test_small_transfer_completes_with_its_debit():
    # 1 > 1/10 + 2/3, so the transfer must be effective
    tr = run(CFG, Schedule(1), script(transfer_s1()))
    (resp,) = tr.of_kind("Respond")
    assert resp["from"] == "s1"
    assert resp["payload"]["complete"] == ["s1", 2, "s1", "-1/10"]
    assert resp["payload"]["effective"] is True


def test_crashed_server_never_responds():
    plan = (CrashPoint(server(0), 0),)
    tr = run(CFG, Schedule(1, crash_plan=plan), script(transfer_s1(), crash_plan=plan))
    assert not tr.of_kind("Respond")
    (skip,) = tr.of_kind("Skip")
    assert skip["from"] == "s1" and skip["payload"]["reason"] == "crashed"


def test_crash_plan_may_not_exceed_f():
    plan = (CrashPoint(server(0), 0), CrashPoint(server(1), 5))
    with pytest.raises(ConfigError, match="f=1"):
        Simulator(CFG, Schedule(1, crash_plan=plan))


def test_crash_is_idempotent_and_bounded():
    sim = Simulator(CFG, Schedule(1))
    sim.crash(server(2))
    sim.crash(server(2))
    assert [r["kind"] for r in sim.records] == ["Crash"]
    with pytest.raises(ConfigError):
        sim.crash(server(3))


def test_mid_event_crash_sends_only_a_prefix():
    plan = (CrashPoint(server(0), 0, after_sends=1),)
    tr = run(CFG, Schedule(2, crash_plan=plan), script(transfer_s1(), crash_plan=plan))
    sends = [r for r in tr.of_kind("Send") if r["from"] == "s1"]
    assert len(sends) == 1
    (crash,) = tr.of_kind("Crash")
    assert crash["payload"]["mid_event"] is True
    # the relayed copy still reaches every correct server
    delivered = {r["from"] for r in tr.of_kind("RBDeliver")}
    if {"s2", "s3", "s4"} & delivered:
        assert {"s2", "s3", "s4"} <= delivered


def test_registers_are_single_writer():
    regs = IdealRegisterArray(3)
    regs.write(server(1), 1, "v")
    assert regs.read(1) == "v"
    with pytest.raises(ConfigError):
        regs.write(server(0), 1, "w")
    with pytest.raises(ConfigError):
        regs.write(client(1), 1, "w")


@pytest.mark.parametrize("fairness", ["fair", "bounded"])
def test_same_inputs_same_bytes(fairness):
    sc = script(transfer_s1(), make_action(0, "s3", "transfer", dest="s4", delta="1/5"),
                make_action(3, "c1", "read_changes", target="s2"))
    a = run(CFG, Schedule(9, fairness), sc)
    b = run(CFG, Schedule(9, fairness), sc)
    assert dumps([a]) == dumps([b])


def test_different_seeds_interleave_differently():
    sc = script(transfer_s1(), make_action(0, "s3", "transfer", dest="s4", delta="1/5"))
    traces = {dumps([run(CFG, Schedule(s), sc)]) for s in range(1, 6)}
    assert len(traces) > 1


def test_step_limit_is_reported():
    sim = Simulator(CFG, Schedule(1), step_limit=5)
    from dynweight.scenario import build_processes

    acts = (transfer_s1(),)
    build_processes(sim, "rpwr", acts)
    sim.load_actions(acts)
    assert sim.run_loop() == "step_limit"
    assert sim.records[-1]["payload"]["status"] == "step_limit"
    assert sim.records[-1]["payload"]["open_ops"] == ["s1"]


def test_step_limit_env(monkeypatch):
    monkeypatch.setenv("DYNWEIGHT_STEP_LIMIT", "500")
    assert step_limit_from_env() == 500
    monkeypatch.setenv("DYNWEIGHT_STEP_LIMIT", "-3")
    with pytest.raises(ConfigError):
        step_limit_from_env()
    monkeypatch.setenv("DYNWEIGHT_STEP_LIMIT", "lots")
    with pytest.raises(ConfigError):
        step_limit_from_env()


def test_schedule_rejects_unknown_fairness():
    with pytest.raises(ConfigError):
        Schedule(1, "whimsical")
    assert Schedule(1, "bounded", 8).label == "adversarial-bounded(8)"


def test_bounded_pool_serves_overdue_items_first():
    pool = _BoundedPool(random.Random(0), bound=3)
    pool.push("old", 0)
    for step in range(1, 3):
        pool.push(f"new{step}", step)
    assert pool.pop(3) == "old"


def test_bounded_pool_no_item_waits_forever():
    rng = random.Random(4)
    pool = _BoundedPool(rng, bound=8)
    waited = {}
    step = 0
    for i in range(200):
        pool.push(i, step)
        waited[i] = step
        if rng.random() < 0.6:
            step += 1
            got = pool.pop(step)
            assert step - waited.pop(got) <= 8 + len(pool) + 1
    while len(pool):
        step += 1
        pool.pop(step)


def test_fair_pool_eventually_serves_everything():
    pool = _FairPool(random.Random(1))
    for i in range(50):
        pool.push(i, 0)
    assert sorted(pool.pop(0) for _ in range(50)) == list(range(50))
