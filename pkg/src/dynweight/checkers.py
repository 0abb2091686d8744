"""Trace checkers. Every checker is a pure function of a trace.

Time is the trace's record index ``t``: the checkers stand outside the
simulated system, so they may use a global clock the processes never see.
An operation *completes* at its ``Respond`` record (or, for the reduction
demos, at the ``Oracle`` record of the access); those records carry the
changes they created in their ``ledger`` field.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Optional

from .core import (
    BOTTOM_PID,
    Change,
    ProcessId,
    SystemConfig,
    Tag,
    _available,
    group_complete,
)
from .sim import Trace

MAX_BRUTEFORCE_OPS = 12


class TraceError(ValueError):
    """The trace is not something the checker can interpret."""


@dataclass
class Verdict:
    check: str
    ok: bool
    detail: str = ""
    counterexample: Optional[dict] = None
    stats: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.ok

    def record(self) -> dict:
        return {
            "kind": "Verdict",
            "check": self.check,
            "ok": self.ok,
            "detail": self.detail,
            "counterexample": self.counterexample,
            "stats": self.stats,
        }

    def line(self) -> str:
        head = f"{'PASS' if self.ok else 'FAIL'} {self.check}"
        return f"{head}: {self.detail}" if self.detail else head


def _pass(check: str, detail: str = "", **stats) -> Verdict:
    return Verdict(check, True, detail, None, stats)


def _fail(check: str, detail: str, counterexample: dict, **stats) -> Verdict:
    return Verdict(check, False, detail, counterexample, stats)


# -- trace access -----------------------------------------------------------------


def parse_change(raw) -> Change:
    try:
        issuer, counter, target, delta = raw
        return Change(ProcessId.parse(issuer), int(counter), ProcessId.parse(target), Fraction(delta))
    except (TypeError, ValueError) as e:
        raise TraceError(f"malformed change {raw!r}: {e}") from None


def parse_changes(raw: Iterable) -> frozenset:
    return frozenset(parse_change(c) for c in raw)


def init_record(trace: Trace) -> dict:
    if not trace.records or trace.records[0].get("kind") != "Init":
        raise TraceError("trace does not start with an Init record")
    return trace.records[0]


def mode_of(trace: Trace) -> str:
    return init_record(trace)["payload"]["mode"]


def config_of(trace: Trace) -> SystemConfig:
    p = init_record(trace)["payload"]
    try:
        return SystemConfig(p["n"], p["f"], p["weights"])
    except KeyError as e:
        raise TraceError(f"Init record lacks {e.args[0]!r}") from None


def crashed_of(trace: Trace) -> set:
    return {r["from"] for r in trace.records if r["kind"] == "Crash"}


@dataclass
class CompletionLedger:
    """Changes of completed operations, grouped by the record that completed them."""

    entries: list = field(default_factory=list)  # (t, frozenset of changes)

    def append(self, t: int, changes: frozenset) -> None:
        if self.entries and t <= self.entries[-1][0]:
            raise TraceError(f"ledger time must increase (t={t} after {self.entries[-1][0]})")
        self.entries.append((t, changes))

    def prefixes(self):
        """Yield ``(t, cumulative change set)`` after each entry."""
        acc: frozenset = frozenset()
        for t, cs in self.entries:
            acc = acc | cs
            yield t, acc

    def completed_before(self, t: int) -> frozenset:
        acc: frozenset = frozenset()
        for te, cs in self.entries:
            if te >= t:
                break
            acc = acc | cs
        return acc

    @classmethod
    def from_trace(cls, trace: Trace) -> "CompletionLedger":
        led = cls()
        for r in trace.records:
            if r.get("ledger") and r["kind"] in ("Init", "Respond", "Oracle"):
                led.append(r["t"], parse_changes(r["ledger"]))
        return led


def stored_ledger(trace: Trace, closure: bool = False) -> CompletionLedger:
    """Completion at the first moment ``n - f`` servers store an operation's changes.

    An issuer stores its pair when it broadcasts it; others when they apply
    it. Completed responses and oracle steps also complete their changes.
    Any ``read_changes`` that starts afterwards reads from ``f + 1`` servers
    and so meets one of them, and the issuer's own response comes no earlier.

    With ``closure``, completing an operation also completes every operation
    its issuer had stored when it broadcast, transitively: those are the
    weights the issuer's precondition was checked against.
    """
    cfg = config_of(trace)
    need = cfg.n - cfg.f
    led = CompletionLedger()
    local = {str(s): set() for s in cfg.servers}
    holders: dict = {}
    groups: dict = {}
    deps: dict = {}
    done: set = set()

    def complete(key, t, out):
        stack = [key]
        while stack:
            k = stack.pop()
            if k in done or k not in groups:
                continue
            done.add(k)
            out |= groups[k]
            if closure:
                stack.extend(deps.get(k, ()))

    def hold(who, cs, t, out):
        by_key: dict = {}
        for c in cs:
            by_key.setdefault(c.key, set()).add(c)
        for k, g in by_key.items():
            groups[k] = groups.get(k, frozenset()) | frozenset(g)
            local[who].add(k)
            holders.setdefault(k, set()).add(who)
            if len(holders[k]) >= need:
                complete(k, t, out)

    for r in trace.records:
        kind, t = r["kind"], r["t"]
        out: set = set()
        if kind == "Init":
            cs = parse_changes(r["ledger"])
            for who in local:
                hold(who, cs, t, out)
            for c in cs:
                complete(c.key, t, out)
        elif kind == "RBBroadcast":
            who = r["from"]
            cs = parse_changes(r["payload"]["inner"]["changes"])
            key = next(iter(cs)).key
            deps[key] = frozenset(local[who])
            hold(who, cs, t, out)
        elif kind == "Apply":
            hold(r["from"], parse_changes(r["payload"]["changes"]), t, out)
        elif kind in ("Respond", "Oracle") and r.get("ledger"):
            cs = parse_changes(r["ledger"])
            for c in cs:
                groups[c.key] = groups.get(c.key, frozenset()) | {c}
            for k in {c.key for c in cs}:
                complete(k, t, out)
        if out:
            led.append(t, frozenset(out))
    return led


def existing_changes_ledger(trace: Trace) -> CompletionLedger:
    """Every operation's changes at the first moment any server holds them.

    Broader than the completion ledger: it includes transfers whose issuer
    crashed before completing.
    """
    led = CompletionLedger()
    seen: set = set()
    for r in trace.records:
        kind = r["kind"]
        if kind == "Init":
            raw = r["ledger"]
        elif kind == "RBBroadcast":
            raw = r["payload"]["inner"]["changes"]
        elif kind == "Apply":
            raw = r["payload"]["changes"]
        elif kind in ("Respond", "Oracle") and r.get("ledger"):
            raw = r["ledger"]
        else:
            continue
        new = parse_changes(raw) - seen
        if new:
            seen |= new
            led.append(r["t"], frozenset(new))
    return led


def _weights(cs: frozenset, cfg: SystemConfig) -> list:
    m: dict = {}
    for c in cs:
        m[c.target] = m.get(c.target, 0) + c.delta
    return [Fraction(m.get(s, 0)) for s in cfg.servers]


# -- integrity ---------------------------------------------------------------------------


def _integrity_over(name: str, led: CompletionLedger, cfg: SystemConfig, mode: str) -> Verdict:
    w0 = cfg.total_weight
    threshold = w0 / (2 * (cfg.n - cfg.f))
    min_seen = None
    for t, cs in led.prefixes():
        ws = _weights(cs, cfg)
        total = sum(ws, Fraction(0))
        low = min(ws)
        min_seen = low if min_seen is None else min(min_seen, low)
        fields = {"t": t, "weights": [f"{w.numerator}/{w.denominator}" for w in ws]}
        if mode in ("rpwr", "dwas", "demo-pwr") and total != w0:
            return _fail(name, f"total weight not conserved at t={t}: {total} != {w0}", fields)
        if mode in ("rpwr", "dwas"):
            if low <= threshold:
                who = ws.index(low)
                return _fail(name, f"weight of {cfg.servers[who]} is {low}, not above {threshold} (t={t})",
                             fields, threshold=str(threshold))
        elif not _available(ws, cfg.f):
            return _fail(name, f"the {cfg.f} heaviest servers hold half the total or more at t={t}", fields)
    stats = {"entries": len(led.entries)}
    if min_seen is not None:
        stats["min_weight"] = str(min_seen)
    if mode in ("rpwr", "dwas"):
        stats["threshold"] = str(threshold)
    return _pass(name, f"{len(led.entries)} ledger prefixes", **stats)


def monitor_integrity(trace: Trace, cfg: Optional[SystemConfig] = None) -> Verdict:
    """Per-server floor plus conservation (protocol runs) or availability (oracle runs).

    Both the completion ledger (closed under what issuers had seen) and the
    wider set of changes that exist anywhere are replayed.
    """
    cfg = cfg or config_of(trace)
    mode = mode_of(trace)
    v = _integrity_over("integrity", stored_ledger(trace, closure=True), cfg, mode)
    if not v.ok:
        return v
    w = _integrity_over("integrity", existing_changes_ledger(trace), cfg, mode)
    if not w.ok:
        w.detail = "among changes held by some server: " + w.detail
        return w
    return v


# -- transfer outcomes --------------------------------------------------------------------


def _paired_ops(trace: Trace, op: Optional[str] = None) -> list:
    """``(invoke record, respond record or None)`` per operation, in invocation order."""
    open_: dict = {}
    out = []
    for r in trace.records:
        if r["kind"] == "Invoke":
            if r["from"] in open_:
                raise TraceError(f"{r['from']} invoked a second operation at t={r['t']} before responding")
            entry = [r, None]
            open_[r["from"]] = entry
            out.append(entry)
        elif r["kind"] == "Respond":
            entry = open_.pop(r["from"], None)
            if entry is None:
                raise TraceError(f"response without invocation at t={r['t']}")
            entry[1] = r
    return [tuple(e) for e in out if op is None or e[0]["payload"]["op"] == op]


def check_effectiveness(trace: Trace) -> Verdict:
    """A transfer is null exactly when its local precondition failed at invocation."""
    name = "effectiveness"
    n_eff = n_null = 0
    for inv, resp in _paired_ops(trace, "transfer"):
        if resp is None:
            continue
        p = inv["payload"]
        if "weight" not in p:
            continue  # oracle transfers carry no local precondition
        pre = Fraction(p["weight"]) > Fraction(p["delta"]) + Fraction(p["threshold"])
        eff = resp["payload"]["effective"]
        if eff != pre:
            what = "null although the precondition held" if pre else "effective although the precondition failed"
            return _fail(name, f"transfer by {inv['from']} at t={inv['t']} was {what}",
                         {"invoke": inv, "respond": resp})
        n_eff += eff
        n_null += not eff
    return _pass(name, f"{n_eff} effective, {n_null} null", effective=n_eff, null=n_null)


def check_validity_i(trace: Trace) -> Verdict:
    """Effective transfers broadcast a matching debit/credit pair; null ones broadcast nothing."""
    name = "validity1"
    broadcasts = {}
    for r in trace.of_kind("RBBroadcast"):
        cs = parse_changes(r["payload"]["inner"]["changes"])
        for c in cs:
            broadcasts[(r["from"], c.counter)] = (r["t"], cs)
    for inv, resp in _paired_ops(trace, "transfer"):
        if resp is None or "counter" not in inv["payload"]:
            continue
        who, counter = inv["from"], inv["payload"]["counter"]
        complete = parse_change(resp["payload"]["complete"])
        got = broadcasts.get((who, counter))
        if resp["payload"]["effective"]:
            dest = ProcessId.parse(inv["payload"]["dest"])
            delta = Fraction(inv["payload"]["delta"])
            me = ProcessId.parse(who)
            want = frozenset({Change(me, counter, me, -delta), Change(me, counter, dest, delta)})
            if got is None or got[1] != want or got[0] > resp["t"]:
                return _fail(name, f"effective transfer by {who} (counter {counter}) lacks its broadcast pair",
                             {"respond": resp})
            if complete not in want:
                return _fail(name, f"Complete of {who} does not name its debit", {"respond": resp})
        else:
            if got is not None:
                return _fail(name, f"null transfer by {who} (counter {counter}) broadcast changes",
                             {"respond": resp})
            if complete.delta != 0:
                return _fail(name, f"null transfer by {who} reports a non-zero change", {"respond": resp})
    return _pass(name)


# -- read_changes ----------------------------------------------------------------------------


def check_validity_ii(trace: Trace) -> Verdict:
    """Each ``read_changes(s)`` result covers every change to ``s`` completed before it began.

    Also checked: results never lose changes in real-time order, and every
    returned change belongs to an operation some server actually created.
    """
    name = "validity2"
    led = stored_ledger(trace)
    existing = set()
    for _, cs in existing_changes_ledger(trace).entries:
        existing |= cs
    done = []  # (respond t, target, result)
    count = 0
    for inv, resp in _paired_ops(trace, "read_changes"):
        if resp is None:
            continue
        count += 1
        target = ProcessId.parse(inv["payload"]["target"])
        result = parse_changes(resp["payload"]["result"])
        must = frozenset(c for c in led.completed_before(inv["t"]) if c.target == target)
        missing = must - result
        if missing:
            return _fail(name, f"read_changes({target}) by {inv['from']} at t={inv['t']} misses "
                         f"{len(missing)} completed change(s)",
                         {"invoke_t": inv["t"], "missing": sorted(str(c) for c in missing)})
        stray = result - existing
        if stray:
            return _fail(name, f"read_changes({target}) returned changes no server holds",
                         {"invoke_t": inv["t"], "stray": sorted(str(c) for c in stray)})
        for rt, tgt, prev in done:
            if tgt == target and rt < inv["t"] and not prev <= result:
                return _fail(name, f"read_changes({target}) at t={inv['t']} lost changes returned by an "
                             f"earlier call that finished at t={rt}",
                             {"lost": sorted(str(c) for c in prev - result)})
        done.append((resp["t"], target, result))
    return _pass(name, f"{count} read_changes calls", calls=count)


# -- register histories ------------------------------------------------------------------------


@dataclass(frozen=True)
class Op:
    proc: str
    kind: str  # "read" or "write"
    value: Optional[str]
    invoke: int
    respond: Optional[int]  # None: never responded
    tag: Optional[Tag] = None


@dataclass
class OpHistory:
    ops: list

    @property
    def complete(self) -> list:
        return [o for o in self.ops if o.respond is not None]


def _tag(raw) -> Tag:
    ts, pid = raw
    return Tag(int(ts), ProcessId.parse(pid))


def history_from_trace(trace: Trace) -> OpHistory:
    ops = []
    for inv, resp in _paired_ops(trace):
        kind = inv["payload"]["op"]
        if kind not in ("read", "write"):
            continue
        if resp is None:
            ops.append(Op(inv["from"], kind, inv["payload"].get("value"), inv["t"], None))
            continue
        p = resp["payload"]
        if "tag" not in p:
            raise TraceError(f"{kind} response at t={resp['t']} carries no tag")
        value = inv["payload"]["value"] if kind == "write" else p["value"]
        ops.append(Op(inv["from"], kind, value, inv["t"], resp["t"], _tag(p["tag"])))
    return OpHistory(ops)


def _before(a: Op, b: Op) -> bool:
    return a.respond is not None and a.respond < b.invoke


def check_atomicity(h: OpHistory) -> Verdict:
    """Tag-based real-time check for a multi-writer register history."""
    name = "atomicity"
    done = h.complete
    for o in done:
        if o.tag is None:
            raise TraceError(f"{o.kind} by {o.proc} at t={o.invoke} has no tag")
    written = {}
    for o in h.ops:
        if o.kind == "write":
            written.setdefault(o.value, []).append(o)
    by_tag: dict = {}
    for o in done:
        prev = by_tag.setdefault(o.tag, o)
        if prev.value != o.value:
            return _fail(name, f"tag {tuple(o.tag)} carries two values", {"a": _op(prev), "b": _op(o)})
        if o.kind == "read":
            if o.tag.pid == BOTTOM_PID:
                if o.value is not None:
                    return _fail(name, "read returned a value under the initial tag", {"read": _op(o)})
            elif o.value not in written or not any(str(o.tag.pid) == w.proc for w in written[o.value]):
                return _fail(name, f"read returned {o.value!r}, which its tag's writer never wrote",
                             {"read": _op(o)})
    writes = [o for o in done if o.kind == "write"]
    for a in done:
        for b in done:
            if not _before(a, b):
                continue
            if b.kind == "read" and b.tag < a.tag:
                return _fail(name, f"{b.kind} by {b.proc} at t={b.invoke} returned an older tag than "
                             f"a {a.kind} that finished at t={a.respond}", {"earlier": _op(a), "later": _op(b)})
            if b.kind == "write" and not a.tag < b.tag:
                return _fail(name, f"write by {b.proc} at t={b.invoke} did not get a tag above an "
                             f"operation that finished before it", {"earlier": _op(a), "later": _op(b)})
    return _pass(name, f"{len(done)} operations ({len(writes)} writes)", ops=len(done))


def _op(o: Op) -> dict:
    return {"proc": o.proc, "op": o.kind, "value": o.value, "invoke": o.invoke, "respond": o.respond,
            "tag": None if o.tag is None else [o.tag.ts, str(o.tag.pid)]}


def check_linearizable_bruteforce(h: OpHistory) -> Verdict:
    """Search for a sequential register order that respects real time.

    Operations that never responded may be placed anywhere after their
    invocation or left out.
    """
    name = "linearizable"
    ops = h.ops
    if len(ops) > MAX_BRUTEFORCE_OPS:
        raise ValueError(f"brute force is capped at {MAX_BRUTEFORCE_OPS} operations, got {len(ops)}")
    n = len(ops)
    # bit i of preds[j]: ops[i] must precede ops[j]
    preds = [sum(1 << i for i in range(n) if _before(ops[i], ops[j])) for j in range(n)]
    must = sum(1 << i for i, o in enumerate(ops) if o.respond is not None)
    failed: set = set()

    def search(placed: int, value) -> bool:
        if placed & must == must:
            return True
        key = (placed, value)
        if key in failed:
            return False
        for j in range(n):
            if placed >> j & 1 or preds[j] & ~placed:
                continue
            o = ops[j]
            if o.kind == "write":
                if search(placed | 1 << j, o.value):
                    return True
            elif o.respond is None or o.value == value:
                if search(placed | 1 << j, value):
                    return True
        failed.add(key)
        return False

    if search(0, None):
        return _pass(name, f"{n} operations")
    return _fail(name, f"no linearization of {n} operations", {"ops": [_op(o) for o in ops]})


def sample_subhistories(h: OpHistory, rng: random.Random, k: int) -> list:
    """``k`` sub-histories that keep every write and a random subset of reads."""
    writes = [o for o in h.ops if o.kind == "write"]
    reads = [o for o in h.ops if o.kind == "read"]
    out = []
    for _ in range(k):
        keep = [r for r in reads if rng.random() < 0.5]
        out.append(OpHistory(sorted(writes + keep, key=lambda o: o.invoke)))
    return out


# -- broadcast, liveness, consensus -------------------------------------------------------------


def check_rb(trace: Trace) -> Verdict:
    """No duplicate deliveries; at quiescence, correct servers delivered the same broadcasts."""
    name = "reliable-broadcast"
    crashed = crashed_of(trace)
    cfg = config_of(trace)
    delivered: dict = {}
    for r in trace.of_kind("RBDeliver"):
        key = (r["payload"]["origin"], r["payload"]["id"])
        got = delivered.setdefault(r["from"], set())
        if key in got:
            return _fail(name, f"{r['from']} delivered broadcast {key} twice", {"t": r["t"]})
        got.add(key)
    if not trace.quiescent:
        return _pass(name, "run did not reach quiescence; agreement not assessed")
    correct = [str(s) for s in cfg.servers if str(s) not in crashed]
    everything = set().union(*delivered.values()) if delivered else set()
    for s in correct:
        mine = delivered.get(s, set())
        for key in sorted(everything - mine):
            if key[0] not in crashed or any(key in delivered.get(c, ()) for c in correct):
                return _fail(name, f"{s} never delivered broadcast {key}", {"server": s, "broadcast": list(key)})
    return _pass(name, f"{len(everything)} broadcasts")


def check_liveness(trace: Trace) -> Verdict:
    """The run reached quiescence and every correct process got all its responses."""
    name = "liveness"
    status = trace.status
    if status != "quiescent":
        return _fail(name, f"run ended with status {status!r}", {"end": trace.records[-1]})
    open_ops = trace.records[-1]["payload"]["open_ops"]
    if open_ops:
        return _fail(name, f"operations never responded at {', '.join(open_ops)}", {"open": open_ops})
    return _pass(name, f"quiescent after {trace.records[-1]['payload']['steps']} steps")


def check_consensus(trace: Trace) -> Verdict:
    """Agreement, validity and termination of the propose() demos, plus the one-winner count."""
    name = "consensus"
    mode = mode_of(trace)
    proposals = {}
    decisions = {}
    for inv, resp in _paired_ops(trace, "propose"):
        proposals[inv["from"]] = inv["payload"]["value"]
        if resp is not None:
            decisions[inv["from"]] = resp["payload"]["decided"]
    if not proposals:
        return _pass(name, "no proposals")
    crashed = crashed_of(trace)
    undecided = sorted(p for p in proposals if p not in crashed and p not in decisions)
    if undecided and trace.quiescent:
        return _fail(name, f"correct proposers never decided: {', '.join(undecided)}", {"undecided": undecided})
    values = set(decisions.values())
    if len(values) > 1:
        return _fail(name, f"servers decided different values {sorted(values)}", {"decisions": decisions})
    for v in values:
        if v not in proposals.values():
            return _fail(name, f"decided {v!r}, which nobody proposed", {"decisions": decisions})
    if len(set(proposals.values())) == 1 and values and values != set(proposals.values()):
        return _fail(name, "all proposals were equal but the decision differs", {"decisions": decisions})
    winners = [r for r in trace.of_kind("Oracle") if r["payload"]["effective"]
               and (mode == "demo-wr" or r["payload"]["group"] == "S-F")]
    attempts = [r for r in trace.of_kind("Oracle") if mode == "demo-wr" or r["payload"]["group"] == "S-F"]
    if attempts and len(winners) != 1:
        return _fail(name, f"{len(winners)} effective competing reassignments, expected exactly one",
                     {"winners": [w["from"] for w in winners]})
    return _pass(name, f"decided {next(iter(values))!r}" if values else "no decisions",
                 effective=len(winners), decided=len(decisions))


# -- quorum intersection --------------------------------------------------------------------------


def quorum_masks(ws: list, total: Fraction) -> list:
    n = len(ws)
    out = []
    for mask in range(1, 1 << n):
        w = sum((ws[i] for i in range(n) if mask >> i & 1), Fraction(0))
        if 2 * w > total:
            out.append(mask)
    return out


def disjoint_quorums(ws: list, total: Fraction) -> Optional[tuple]:
    """Two disjoint quorums under weights ``ws``, by exhaustive pairing, or None."""
    qs = quorum_masks(ws, total)
    for a, b in combinations(qs, 2):
        if a & b == 0:
            return a, b
    return None


def observed_change_sets(trace: Trace) -> list:
    """Ledger prefixes plus every server's local change set over the run."""
    cfg = config_of(trace)
    out = [cs for _, cs in stored_ledger(trace, closure=True).prefixes()]
    local = {str(s): cfg.initial_changes for s in cfg.servers}
    for r in trace.records:
        if r["kind"] == "RBBroadcast":
            who = r["from"]
            local[who] = local[who] | parse_changes(r["payload"]["inner"]["changes"])
            out.append(local[who])
        elif r["kind"] == "Apply":
            who = r["from"]
            local[who] = local[who] | parse_changes(r["payload"]["changes"])
            out.append(local[who])
    return out


def check_quorum_intersection(trace: Trace, max_n: int = 7) -> Verdict:
    name = "quorum-intersection"
    cfg = config_of(trace)
    if cfg.n > max_n:
        return _pass(name, f"skipped (n={cfg.n} > {max_n})")
    total = cfg.total_weight
    seen = set()
    for cs in observed_change_sets(trace):
        ws = tuple(_weights(cs, cfg))
        if ws in seen:
            continue
        seen.add(ws)
        pair = disjoint_quorums(list(ws), total)
        if pair is not None:
            a, b = pair
            members = lambda m: [str(cfg.servers[i]) for i in range(cfg.n) if m >> i & 1]
            return _fail(name, f"disjoint quorums {members(a)} and {members(b)}",
                         {"weights": [str(w) for w in ws]})
    return _pass(name, f"{len(seen)} weight vectors", vectors=len(seen))


def complete_groups_only(trace: Trace) -> Verdict:
    """Servers only ever apply whole operations."""
    name = "whole-groups"
    for r in trace.of_kind("Apply"):
        cs = parse_changes(r["payload"]["changes"])
        if not group_complete(cs):
            return _fail(name, f"{r['from']} applied a partial operation at t={r['t']}", {"apply": r})
    return _pass(name)


# -- suites -----------------------------------------------------------------------------------------

SUITES = ("integrity", "atomicity", "validity2", "all")


def run_suite(trace: Trace, suite: str, rng_seed: int = 0) -> list:
    """Verdicts of every check in ``suite`` that applies to the trace's mode."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}")
    mode = mode_of(trace)
    protocol = mode in ("rpwr", "dwas")
    out = []
    if suite in ("integrity", "all"):
        out.append(monitor_integrity(trace))
        if protocol:
            out.append(check_effectiveness(trace))
            out.append(check_validity_i(trace))
    if suite in ("validity2", "all"):
        out.append(check_validity_ii(trace))
    if suite in ("atomicity", "all") and mode == "dwas":
        h = history_from_trace(trace)
        out.append(check_atomicity(h))
        if len(h.ops) <= MAX_BRUTEFORCE_OPS:
            out.append(check_linearizable_bruteforce(h))
    if suite == "all":
        out.append(check_liveness(trace))
        if protocol:
            out.append(check_rb(trace))
            out.append(complete_groups_only(trace))
            out.append(check_quorum_intersection(trace))
        else:
            out.append(check_consensus(trace))
    return out
