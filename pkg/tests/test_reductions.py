from fractions import Fraction
from itertools import combinations

import pytest
from hypothesis import given, settings, strategies as st

from dynweight.checkers import check_consensus, monitor_integrity
from dynweight.cli import run_seed
from dynweight.core import Change, ConfigError, SystemConfig, server, weight_of
from dynweight.reductions import (
    PwrOracle,
    WrOracle,
    intra_f_target,
    oracle_reassign,
    oracle_transfer,
    reduction_config,
    reduction_weights,
)
from dynweight.scenario import ScenarioScript, load_scenario, make_action, validate_actions
from dynweight.sim import CrashPoint, Schedule, run

S = server


def all_weights(o):
    return [weight_of(o.changes, s) for s in o.cfg.servers]


def test_example1_replay():
    o = WrOracle(SystemConfig(4, 1))
    c = oracle_reassign(o, S(0), S(0), Fraction(3, 2))
    assert c == Change(S(0), 2, S(0), Fraction(3, 2))
    assert weight_of(o.read_changes(S(0)), S(0)) == Fraction(5, 2)
    c = oracle_reassign(o, S(2), S(1), Fraction(-1, 2))
    assert c == Change(S(2), 2, S(1), 0)
    assert sum(all_weights(o)) == Fraction(5, 2) + 1 + 1 + 1
    assert o.read_changes(S(1)) == {Change(S(1), 1, S(1), 1)}


def test_example1_scenario():
    tr = run_seed(load_scenario("example1"), 1)
    effective = [r["payload"]["effective"] for r in tr.of_kind("Respond") if r["payload"]["op"] == "reassign"]
    assert effective == [True, False]
    assert monitor_integrity(tr).ok


def test_huge_reassign_is_null():
    o = WrOracle(SystemConfig(4, 1))
    assert oracle_reassign(o, S(0), S(0), 100).delta == 0
    assert all_weights(o) == [1, 1, 1, 1]


def test_zero_delta_rejected():
    with pytest.raises(ConfigError):
        WrOracle(SystemConfig(4, 1)).reassign(S(0), S(0), 0)


@pytest.mark.parametrize("n, f", [(3, 1), (4, 1), (5, 1), (5, 2), (7, 2), (7, 3)])
def test_alg1_weights_admit_exactly_one_reassign(n, f):
    cfg = reduction_config(n, f)
    assert sum(cfg.initial_weights) == n
    # F sits half a unit below the line: any first +-1/2 is fine, none after it
    for i in range(n):
        for j in range(n):
            o = WrOracle(cfg)
            d1 = Fraction(1, 2) if i < f else Fraction(-1, 2)
            d2 = Fraction(1, 2) if j < f else Fraction(-1, 2)
            assert o.reassign(S(i), S(i), d1).delta == d1
            assert o.reassign(S(j), S(j), d2).delta == 0


def test_reduction_weights_values():
    assert reduction_weights(7, 2) == [Fraction(3, 2)] * 2 + [Fraction(4, 5)] * 5
    with pytest.raises(ConfigError):
        reduction_weights(4, 0)


def test_alg2_intra_f_transfers_always_effective():
    cfg = reduction_config(7, 2)
    o = PwrOracle(cfg)
    for i in range(cfg.f):
        debit, _ = oracle_transfer(o, S(i), S(i), S(intra_f_target(i, cfg.f)), Fraction(1, 10))
        assert debit.delta != 0
    assert sum(all_weights(o)) == 7


def test_alg2_second_transfer_into_s1_is_null():
    cfg = reduction_config(7, 2)
    o = PwrOracle(cfg)
    first, _ = o.transfer(S(2), S(2), S(0), Fraction(2, 5))
    second, _ = o.transfer(S(3), S(3), S(0), Fraction(2, 5))
    assert first.delta == Fraction(-2, 5) and second.delta == 0
    assert sum(all_weights(o)) == 7


def test_intra_f_target_wraps():
    assert [intra_f_target(i, 3) for i in range(3)] == [1, 2, 0]
    assert intra_f_target(0, 1) == 0


def brute_available(ws, f):
    total = sum(ws)
    return all(2 * sum(c) < total for c in combinations(ws, f))


weights_st = st.lists(st.integers(1, 12), min_size=3, max_size=7).map(lambda xs: [Fraction(x, 4) for x in xs])


@settings(max_examples=200, deadline=None)
@given(weights_st, st.data())
def test_transfer_outcome_matches_enumeration(ws, data):
    n = len(ws)
    f = data.draw(st.integers(0, (n - 1) // 2))
    if not brute_available(ws, f):
        return
    o = PwrOracle(SystemConfig(n, f, ws))
    src = data.draw(st.integers(0, n - 1))
    dst = data.draw(st.integers(0, n - 1).filter(lambda d: d != src))
    delta = data.draw(st.sampled_from([ws[src], ws[src] / 2, Fraction(1, 4)]))
    after = list(ws)
    after[src] -= delta
    after[dst] += delta
    debit, credit = o.transfer(S(src), S(src), S(dst), delta)
    assert (debit.delta != 0) == brute_available(after, f)
    assert sum(all_weights(o)) == sum(ws)


@pytest.mark.parametrize("scenario", ["alg1-demo", "alg2-demo"])
@pytest.mark.parametrize("seed", range(1, 21))
def test_demo_consensus(scenario, seed):
    v = check_consensus(run_seed(load_scenario(scenario), seed))
    assert v.ok, v.detail
    assert v.stats.get("effective") == 1


@pytest.mark.parametrize("mode, n, f", [("demo-wr", 4, 1), ("demo-wr", 5, 2), ("demo-pwr", 7, 2)])
def test_same_proposal_is_decided(mode, n, f):
    cfg = reduction_config(n, f)
    steps = tuple(make_action(i, s, "propose", value="b") for i, s in enumerate(cfg.servers))
    tr = run(cfg, Schedule(3), ScenarioScript("t", mode, cfg, steps))
    decided = [r["payload"]["decided"] for r in tr.of_kind("Respond")]
    assert decided == ["b"] * n


@pytest.mark.parametrize("seed", range(1, 6))
def test_alg1_decides_after_f_early_crashes(seed):
    cfg = reduction_config(5, 2)
    steps = tuple(make_action(1, s, "propose", value=f"v{i}") for i, s in enumerate(cfg.servers))
    plan = (CrashPoint(S(0), 0), CrashPoint(S(3), 0))
    tr = run(cfg, Schedule(seed, crash_plan=plan), ScenarioScript("t", "demo-wr", cfg, steps))
    deciders = {r["from"] for r in tr.of_kind("Respond")}
    assert deciders == {"s2", "s3", "s5"}
    assert check_consensus(tr).ok


def test_alg2_f_transfers_all_effective():
    sc = load_scenario("alg2-demo")
    for seed in range(1, 21):
        tr = run_seed(sc, seed)
        f_recs = [r for r in tr.of_kind("Oracle") if r["payload"]["group"] == "F"]
        assert all(r["payload"]["effective"] for r in f_recs)


@pytest.mark.parametrize("mode, cfg, steps, msg", [
    ("demo-wr", SystemConfig(4, 1), [make_action(0, "s1", "propose", value="a")], "reduction"),
    ("demo-pwr", reduction_config(5, 1), [make_action(0, "s1", "propose", value="a")], "f >= 2"),
    ("demo-wr", reduction_config(4, 1), [make_action(0, "s1", "reassign", target="s1", delta="1/10"),
                                         make_action(1, "s1", "propose", value="a")], "first"),
    ("demo-wr", SystemConfig(4, 1), [make_action(0, "s1", "reassign", target="s1", delta="0")], "non-zero"),
])
def test_demo_validation(mode, cfg, steps, msg):
    with pytest.raises(ConfigError, match=msg):
        validate_actions(cfg, mode, steps)
