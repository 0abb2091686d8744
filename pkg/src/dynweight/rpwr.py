"""Restricted pairwise weight reassignment: ``read_changes`` and ``transfer``.

Only a server can move its own weight, and only while it stays strictly above
``W0 / (2(n - f))`` afterwards, which keeps every ``f``-subset below half the
total without any agreement step.

Servers store change sets made of whole operations only: the initial
self-change of every server, and debit/credit pairs of effective transfers.
Half of a pair is buffered until its partner shows up. A server credited by
a transfer first refreshes its register with a quorum read, and only then
acknowledges the transfer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from .core import (
    EMPTY_CELL,
    Change,
    ConfigError,
    ProcessId,
    as_weight,
    changes_for,
    group_complete,
    min_weight_threshold,
)
from .sim import Envelope, Process, fmt_change, fmt_changes, fmt_weight
from .storage import StorageClient, handle_R, handle_W


@dataclass
class ReadChangesSession:
    requester: ProcessId
    target: ProcessId
    rid: int
    on_done: Callable
    responders: set = field(default_factory=set)
    collected: frozenset = frozenset()
    phase: str = "collecting"
    wc_acks: set = field(default_factory=set)


@dataclass
class PendingTransfer:
    counter: int
    delta: Fraction
    dest: ProcessId
    debit: Change
    credit: Change
    acks: set = field(default_factory=set)


class ReadChangesClient:
    """Mixin: collect from ``f + 1`` servers, write back to ``n - f``."""

    def _init_rc_client(self) -> None:
        self._rid = 0
        self._rc: dict = {}

    def start_read_changes(self, target: ProcessId, on_done: Callable) -> None:
        self._rid += 1
        sess = ReadChangesSession(self.pid, target, self._rid, on_done)
        self._rc[sess.rid] = sess
        for srv in self.cfg.servers:
            self.sim.send(self.pid, srv, "RC", (target, sess.rid), {"target": str(target), "rid": sess.rid})

    def on_RC_Ack(self, env: Envelope) -> None:
        rid, cs = env.payload
        sess = self._rc.get(rid)
        if sess is None or sess.phase != "collecting":
            return
        sess.responders.add(env.src)
        sess.collected = sess.collected | cs
        if len(sess.responders) > self.cfg.f:
            sess.phase = "writing_back"
            for srv in self.cfg.servers:
                self.sim.send(self.pid, srv, "WC", (rid, sess.collected),
                              {"rid": rid, "changes": len(sess.collected)})

    def on_WC_Ack(self, env: Envelope) -> None:
        (rid,) = env.payload
        sess = self._rc.get(rid)
        if sess is None or sess.phase != "writing_back":
            return
        sess.wc_acks.add(env.src)
        if len(sess.wc_acks) >= self.cfg.n - self.cfg.f:
            sess.phase = "done"
            del self._rc[rid]
            sess.on_done(changes_for(sess.collected, sess.target))


class Server(Process, ReadChangesClient, StorageClient):
    """One storage replica: change log, register cell, transfer operation."""

    def __init__(self, pid: ProcessId, sim):
        super().__init__(pid, sim)
        self.cfg = sim.cfg
        self.lc = 2  # counter 1 is taken by the initial self-change
        self.changes: frozenset = self.cfg.initial_changes
        self.register = EMPTY_CELL
        self.pending: Optional[PendingTransfer] = None
        self.acked: set = set()
        self._partial: dict = {}  # key -> half of a pair still missing its partner
        self._unrefreshed: dict = {}  # key -> stored credit to self awaiting a register refresh
        self._unrefreshed_view: frozenset = frozenset()
        self._refreshing: list = []
        self._rb_seen: set = set()
        self._rb_seq = 0
        self._threshold = min_weight_threshold(self.cfg)
        self._init_rc_client()
        self._init_storage_client()
        self._handlers = {
            "RC": self.handle_RC,
            "RC_Ack": self.on_RC_Ack,
            "WC": self.handle_WC,
            "WC_Ack": self.on_WC_Ack,
            "RB": self._on_rb,
            "T_Ack": self.handle_T_Ack,
            "R": lambda env: handle_R(self, env),
            "W": lambda env: handle_W(self, env),
            "R_A": self.on_R_A,
            "W_A": self.on_W_A,
        }

    # -- local state ---------------------------------------------------------

    def get_changes(self, s: ProcessId) -> frozenset:
        return changes_for(self.changes, s)

    def weight(self) -> Fraction:
        """Own weight, leaving out credits the register has not caught up with yet."""
        w = sum((c.delta for c in self.changes if c.target == self.pid), Fraction(0))
        return w - sum((c.delta for c in self._unrefreshed_view), Fraction(0))

    def on_message(self, env: Envelope) -> None:
        self._handlers[env.kind](env)

    # -- reliable broadcast (eager relay) -------------------------------------

    def rb_broadcast(self, inner: tuple) -> None:
        self._rb_seq += 1
        rbid = (self.pid, self._rb_seq)
        self._rb_seen.add(rbid)
        self.sim.record("RBBroadcast", self.pid, None, {"id": self._rb_seq, "inner": _describe(inner)})
        for srv in self.cfg.servers:
            if srv != self.pid:
                self.sim.send(self.pid, srv, "RB", (rbid, inner), {"origin": str(self.pid), "id": self._rb_seq})
        self._rb_deliver(rbid, inner)

    def _on_rb(self, env: Envelope) -> None:
        rbid, inner = env.payload
        if rbid in self._rb_seen:
            return
        self._rb_seen.add(rbid)
        origin = rbid[0]
        for srv in self.cfg.servers:
            if srv != self.pid and srv != origin and srv != env.src:
                self.sim.send(self.pid, srv, "RB", (rbid, inner), {"origin": str(origin), "id": rbid[1]})
        self._rb_deliver(rbid, inner)

    def _rb_deliver(self, rbid, inner: tuple) -> None:
        self.sim.record("RBDeliver", self.pid, None, {"origin": str(rbid[0]), "id": rbid[1], "inner": _describe(inner)})
        if inner[0] == "T":
            self.write_changes(frozenset(inner[1:]))

    # -- read_changes, server side -------------------------------------------

    def handle_RC(self, env: Envelope) -> None:
        target, rid = env.payload
        keys = {c.key for c in self.changes if c.target == target}
        # whole operations, so a write-back never splits a debit/credit pair
        reply = frozenset(c for c in self.changes if c.key in keys)
        self.sim.send(self.pid, env.src, "RC_Ack", (rid, reply), {"rid": rid, "changes": len(reply)})

    def handle_WC(self, env: Envelope) -> None:
        rid, cs = env.payload
        self.write_changes(cs)
        self.sim.send(self.pid, env.src, "WC_Ack", (rid,), {"rid": rid})

    # -- change application ----------------------------------------------------

    def unrefreshed_credits(self) -> frozenset:
        """Credits to this server stored before its register was refreshed."""
        return self._unrefreshed_view

    def write_changes(self, cs: frozenset) -> None:
        new = cs - self.changes
        if not new:
            return
        touched = []
        for c in sorted(new):
            key = c.key
            buf = self._partial.setdefault(key, set())
            if key not in touched:
                touched.append(key)
            buf.add(c)
        for key in touched:
            group = self._partial[key]
            if not group_complete(group):
                continue
            del self._partial[key]
            self._store(key, frozenset(group))
        self._maybe_refresh()

    def _store(self, key, group: frozenset) -> None:
        self.changes = self.changes | group
        credit = [c for c in group if c.target == self.pid and c.issuer != self.pid]
        self.sim.record("Apply", self.pid, None,
                        {"changes": fmt_changes(group), "refresh_pending": bool(credit)})
        if credit:
            self._unrefreshed[key] = credit[0]
            self._unrefreshed_view = frozenset(self._unrefreshed.values())
        else:
            self._ack(key)

    def _ack(self, key) -> None:
        issuer, counter = key
        if issuer != self.pid and key not in self.acked:
            self.acked.add(key)
            self.sim.send(self.pid, issuer, "T_Ack", (counter,), {"counter": counter})

    def _maybe_refresh(self) -> None:
        if self._refreshing or not self._unrefreshed:
            return
        self._refreshing = sorted(self._unrefreshed)
        self.sim.record("RefreshStart", self.pid, None, {
            "for": [fmt_change(self._unrefreshed[k]) for k in self._refreshing],
        })
        self.start_rw("refresh", None, self._refresh_done, base=self.view | self.changes)

    def _refresh_done(self, session) -> None:
        cell = session.cell
        if self.register.tag < cell.tag:
            self.register = cell
        keys, self._refreshing = self._refreshing, []
        self.sim.record("RefreshDone", self.pid, None, {
            "tag": [cell.tag.ts, str(cell.tag.pid)], "restarts": session.restarts,
            "for": [fmt_change(self._unrefreshed[k]) for k in keys],
        })
        for k in keys:
            del self._unrefreshed[k]
        self._unrefreshed_view = frozenset(self._unrefreshed.values())
        for k in keys:
            self._ack(k)
        self._maybe_refresh()

    # -- transfer ---------------------------------------------------------------

    def handle_T_Ack(self, env: Envelope) -> None:
        (counter,) = env.payload
        p = self.pending
        if p is None or counter != p.counter:
            return
        p.acks.add(env.src)
        if len(p.acks) >= self.cfg.n - self.cfg.f - 1:
            self._complete_transfer()

    def transfer(self, dest: ProcessId, delta: Fraction) -> None:
        if self.pending is not None:
            raise ConfigError(f"{self.pid} invoked transfer while one is pending")
        w = self.weight()
        lc = self.lc
        effective = w > delta + self._threshold
        self.sim.invoked(self.pid, {
            "op": "transfer", "dest": str(dest), "delta": fmt_weight(delta),
            "counter": lc, "weight": fmt_weight(w), "threshold": fmt_weight(self._threshold),
        })
        if not effective:
            self.lc += 1
            null = Change(self.pid, lc, self.pid, Fraction(0))
            self.sim.respond(self.pid, {"op": "transfer", "complete": fmt_change(null), "effective": False})
            return
        debit = Change(self.pid, lc, self.pid, -delta)
        credit = Change(self.pid, lc, dest, delta)
        self.changes = self.changes | {debit, credit}
        self.pending = PendingTransfer(lc, delta, dest, debit, credit)
        self.rb_broadcast(("T", debit, credit))
        if self.cfg.n - self.cfg.f - 1 <= 0:
            self._complete_transfer()

    def _complete_transfer(self) -> None:
        p = self.pending
        self.pending = None
        self.lc += 1
        self.sim.respond(
            self.pid,
            {"op": "transfer", "complete": fmt_change(p.debit), "effective": True, "acks": len(p.acks)},
            ledger=fmt_changes([p.debit, p.credit]),
        )

    # -- scenario entry point -----------------------------------------------------

    def invoke(self, action) -> None:
        kw = action.kw
        if action.op == "transfer":
            self.transfer(ProcessId.parse(kw["dest"]), as_weight(kw["delta"]))
        elif action.op == "read_changes":
            _start_read_changes_op(self, ProcessId.parse(kw["target"]))
        else:
            raise ConfigError(f"servers cannot invoke {action.op!r} in protocol mode")


class Client(Process, ReadChangesClient, StorageClient):
    """A reader/writer; may also call ``read_changes``."""

    def __init__(self, pid: ProcessId, sim):
        super().__init__(pid, sim)
        self.cfg = sim.cfg
        self._init_rc_client()
        self._init_storage_client()
        self._handlers = {
            "RC_Ack": self.on_RC_Ack,
            "WC_Ack": self.on_WC_Ack,
            "R_A": self.on_R_A,
            "W_A": self.on_W_A,
        }

    def on_message(self, env: Envelope) -> None:
        self._handlers[env.kind](env)

    def invoke(self, action) -> None:
        kw = action.kw
        if action.op == "read_changes":
            _start_read_changes_op(self, ProcessId.parse(kw["target"]))
        elif action.op in ("read", "write"):
            value = kw.get("value") if action.op == "write" else None
            payload = {"op": action.op}
            if action.op == "write":
                payload["value"] = value
            self.sim.invoked(self.pid, payload)
            self.start_rw(action.op, value, self._rw_done)
        else:
            raise ConfigError(f"clients cannot invoke {action.op!r} in protocol mode")

    def _rw_done(self, s) -> None:
        self.sim.respond(self.pid, {
            "op": s.op,
            "tag": [s.cell.tag.ts, str(s.cell.tag.pid)],
            "value": s.cell.val,
            "restarts": s.restarts,
        })


def _start_read_changes_op(proc, target: ProcessId) -> None:
    proc.sim.invoked(proc.pid, {"op": "read_changes", "target": str(target)})

    def done(result: frozenset) -> None:
        proc.sim.respond(proc.pid, {"op": "read_changes", "target": str(target), "result": fmt_changes(result)})

    proc.start_read_changes(target, done)


def _describe(inner: tuple) -> dict:
    return {"kind": inner[0], "changes": [fmt_change(c) for c in inner[1:]]}
