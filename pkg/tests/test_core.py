from fractions import Fraction
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynweight.core import (
    BOTTOM_PID,
    BOTTOM_TAG,
    Change,
    ConfigError,
    ProcessId,
    SystemConfig,
    Tag,
    as_weight,
    changes_for,
    check_availability,
    client,
    group_complete,
    is_quorum,
    merge,
    min_weight_threshold,
    quorums,
    server,
    smallest_quorum_size,
    tag_less,
    weight_of,
    weights,
)

s1, s2, s3, s4 = (server(i) for i in range(4))


def test_process_ids_are_one_based_in_text():
    assert str(server(0)) == "s1"
    assert str(client(2)) == "c3"
    assert ProcessId.parse("s7") == server(6)
    assert ProcessId.parse("_") == BOTTOM_PID
    for bad in ("s0", "x1", "s", "sx"):
        with pytest.raises(ConfigError):
            ProcessId.parse(bad)


def test_weights_are_exact():
    assert as_weight("0.7") == Fraction(7, 10)
    assert as_weight("3/4") == Fraction(3, 4)
    with pytest.raises(TypeError):
        as_weight(0.7)


def test_empty_change_set_weighs_nothing():
    assert weight_of(frozenset(), s1) == 0


def test_initial_weight_is_a_self_change():
    cfg = SystemConfig(4, 1)
    assert weight_of(cfg.initial_changes, s1) == 1
    assert Change(s1, 1, s1, Fraction(1)) in cfg.initial_changes


def test_threshold_for_seven_unit_servers():
    assert min_weight_threshold(SystemConfig(7, 2)) == Fraction(7, 10)


def test_threshold_needs_more_servers_than_faults():
    cfg = SystemConfig(3, 1)
    cfg.f = 3  # bypass construction checks to reach the guard
    with pytest.raises(ConfigError):
        min_weight_threshold(cfg)


def test_config_rejects_unavailable_weights():
    with pytest.raises(ConfigError, match="availability"):
        SystemConfig(3, 1, ["2", "1", "1"])
    with pytest.raises(ConfigError):
        SystemConfig(3, 3)
    with pytest.raises(ConfigError):
        SystemConfig(3, 1, ["1", "1"])
    with pytest.raises(ConfigError):
        SystemConfig(3, 1, ["1", "0", "1"])


def test_minority_becomes_quorum_after_example_transfers():
    cfg = SystemConfig(7, 2)
    cs = set(cfg.initial_changes)
    for k, (src, dst) in enumerate([(3, 0), (4, 1), (5, 2)]):
        d = Fraction(1, 4)
        cs |= {Change(server(src), 2, server(src), -d), Change(server(src), 2, server(dst), d)}
    cs = frozenset(cs)
    assert is_quorum(cs, [s1, s2, s3], cfg)
    assert not is_quorum(cfg.initial_changes, [s1, s2, s3], cfg)


def test_skewed_weights_smallest_quorum_without_two_heaviest():
    ws = [Fraction(x) for x in ("1.6", "1.4", "0.8", "0.8", "0.8", "0.8", "0.8")]
    total = sum(ws)
    assert smallest_quorum_size(ws, total, among=range(2, 7)) == 5
    assert 2 * (ws[0] + ws[1] + ws[2]) > total


def test_merge_and_restriction():
    a = frozenset({Change(s1, 1, s1, Fraction(1))})
    b = frozenset({Change(s2, 1, s2, Fraction(1))})
    assert merge(a, b) == a | b
    assert merge(a, frozenset()) is a
    assert changes_for(a | b, s2) == b


def test_group_completeness():
    d = Fraction(1, 10)
    debit, credit = Change(s1, 2, s1, -d), Change(s1, 2, s2, d)
    assert group_complete([debit, credit])
    assert not group_complete([debit])
    assert not group_complete([credit])
    assert group_complete([Change(s3, 1, s3, Fraction(1))])
    assert not group_complete([debit, Change(s1, 2, s2, 2 * d)])


def test_tags_order_by_timestamp_then_writer():
    assert tag_less(BOTTOM_TAG, Tag(0, client(0)))
    assert tag_less(Tag(1, client(5)), Tag(2, client(0)))
    assert tag_less(Tag(2, client(0)), Tag(2, client(1)))
    assert (Tag(2, client(0)) < Tag(2, client(1))) == tag_less(Tag(2, client(0)), Tag(2, client(1)))


# -- properties -------------------------------------------------------------------

weight_st = st.fractions(min_value=Fraction(1, 20), max_value=Fraction(5), max_denominator=20)


@st.composite
def weight_vectors(draw, max_n=7):
    n = draw(st.integers(1, max_n))
    ws = draw(st.lists(weight_st, min_size=n, max_size=n))
    f = draw(st.integers(0, n - 1))
    return ws, f


def _available_by_enumeration(ws, f):
    total = sum(ws)
    return all(2 * sum(ws[i] for i in F) < total for F in combinations(range(len(ws)), f))


@given(weight_vectors())
def test_availability_matches_enumeration_of_f_subsets(case):
    ws, f = case
    n = len(ws)
    cs = frozenset(Change(server(i), 1, server(i), w) for i, w in enumerate(ws))
    expected = _available_by_enumeration(ws, f)
    try:
        cfg = SystemConfig(n, f, ws)
    except ConfigError:
        assert not expected
        return
    assert expected and check_availability(cs, cfg)


@given(weight_vectors())
def test_quorums_pairwise_intersect(case):
    ws, _ = case
    qs = quorums(ws, sum(ws))
    assert all(a & b for a, b in combinations(qs, 2))


@given(st.data())
@settings(max_examples=200)
def test_weights_above_floor_imply_availability(data):
    n = data.draw(st.integers(2, 7))
    f = data.draw(st.integers(1, n - 1))
    cfg = SystemConfig(n, 0)
    floor = cfg.total_weight / (2 * (n - f))
    # random weights strictly above the floor that still sum to the initial total
    extra = cfg.total_weight - n * floor
    cuts = sorted(data.draw(st.lists(st.fractions(0, 1, max_denominator=50), min_size=n - 1, max_size=n - 1)))
    parts = [b - a for a, b in zip([0] + cuts, cuts + [1])]
    ws = [floor + extra * p for p in parts]
    if any(w <= floor for w in ws):
        return
    assert _available_by_enumeration(ws, f)


@given(weight_vectors(max_n=6))
def test_smallest_quorum_matches_enumeration(case):
    ws, _ = case
    total = sum(ws)
    sizes = [len(c) for k in range(1, len(ws) + 1) for c in combinations(range(len(ws)), k)
             if 2 * sum(ws[i] for i in c) > total]
    assert smallest_quorum_size(ws, total) == min(sizes)


@given(weight_vectors())
def test_weights_sum_per_target(case):
    ws, _ = case
    servers = [server(i) for i in range(len(ws))]
    cs = frozenset(Change(s, 1, s, w) for s, w in zip(servers, ws))
    assert weights(cs, servers) == ws
