"""Multi-writer atomic register over dynamically weighted quorums.

Client side: two phases, each waiting for a weighted quorum of replies under
the caller's current change-set view. Every reply carries the replying
server's change set; a reply that reveals unseen changes grows the view and
restarts the whole operation with a fresh operation counter. Replies from
servers whose change set equals the view are counted.

A server that has stored a credit to itself but has not yet refreshed its
register also lists that credit in its replies, and is counted at its weight
without it. Counting a server below its view weight can only make a set
harder to accept as a quorum.

Requests carry the requester's view. A server that is missing some of those
changes stores them first, so it never answers with an older set than the
requester already holds.

Server side: answer ``R`` with the register cell and the local change set;
install a ``W`` cell only if its tag is strictly newer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from .core import EMPTY, RegisterCell, Tag, weight_map


@dataclass
class PhaseSession:
    op: str  # "read", "write" or "refresh"
    value: Optional[str]
    on_done: Callable
    view: frozenset = EMPTY
    cnt: int = 0
    phase: int = 1
    acc: dict = field(default_factory=dict)  # server -> (cell or None, unrefreshed credits)
    restarts: int = 0
    cell: Optional[RegisterCell] = None


def counted_weight(view: frozenset, acc: dict) -> Fraction:
    """Weight of the repliers under ``view``, minus credits they have not refreshed for."""
    m = weight_map(view)
    total = Fraction(0)
    for srv, (_, pending) in acc.items():
        total += m.get(srv, 0)
        for c in pending:
            total -= c.delta
    return total


def is_counted_quorum(view: frozenset, acc: dict, cfg) -> bool:
    return 2 * counted_weight(view, acc) > cfg.total_weight


class StorageClient:
    """Mixin giving a process the read/write protocol. Needs ``pid``, ``sim``, ``cfg``."""

    op_cnt: int
    view: frozenset
    _rw: Optional[PhaseSession]

    def _init_storage_client(self) -> None:
        self.op_cnt = 0
        self.view = self.cfg.initial_changes
        self._rw = None

    def start_rw(self, op: str, value: Optional[str], on_done: Callable, base: Optional[frozenset] = None) -> None:
        s = PhaseSession(op, value, on_done)
        s.view = self.view if base is None else base
        self._rw = s
        self._phase1(s)

    def _phase1(self, s: PhaseSession) -> None:
        self.op_cnt += 1
        s.cnt = self.op_cnt
        s.phase = 1
        s.acc = {}
        for srv in self.cfg.servers:
            self.sim.send(self.pid, srv, "R", (s.cnt, s.view), {"cnt": s.cnt})

    def _absorb(self, s: PhaseSession, cs: frozenset) -> bool:
        """Whether a reply carrying ``cs`` counts toward the current quorum."""
        if cs == s.view:
            return True
        if cs <= s.view:
            return False
        s.view = s.view | cs
        self.view = self.view | cs
        s.restarts += 1
        self._phase1(s)
        return False

    def on_R_A(self, env) -> None:
        cell, cnt, cs, pending = env.payload
        s = self._rw
        if s is None or s.phase != 1 or cnt != s.cnt:
            return
        if not self._absorb(s, cs):
            return
        s.acc[env.src] = (cell, pending)
        if not is_counted_quorum(s.view, s.acc, self.cfg):
            return
        best = max((c for c, _ in s.acc.values()), key=lambda c: c.tag)
        if s.op == "write":
            s.cell = RegisterCell(Tag(best.tag.ts + 1, self.pid), s.value)
        else:
            s.cell = best
        s.phase = 2
        s.acc = {}
        for srv in self.cfg.servers:
            self.sim.send(self.pid, srv, "W", (s.cell, s.cnt, s.view), {"cnt": s.cnt, "ts": s.cell.tag.ts})

    def on_W_A(self, env) -> None:
        cnt, cs, pending = env.payload
        s = self._rw
        if s is None or s.phase != 2 or cnt != s.cnt:
            return
        if not self._absorb(s, cs):
            return
        s.acc[env.src] = (None, pending)
        if not is_counted_quorum(s.view, s.acc, self.cfg):
            return
        self._rw = None
        self.view = self.view | s.view
        s.on_done(s)


def _catch_up(srv, view: frozenset) -> None:
    if not view <= srv.changes:
        srv.write_changes(view)


def handle_R(srv, env) -> None:
    cnt, view = env.payload
    _catch_up(srv, view)
    srv.sim.send(srv.pid, env.src, "R_A", (srv.register, cnt, srv.changes, srv.unrefreshed_credits()),
                 {"cnt": cnt, "ts": srv.register.tag.ts, "changes": len(srv.changes)})


def handle_W(srv, env) -> None:
    cell, cnt, view = env.payload
    _catch_up(srv, view)
    if srv.register.tag < cell.tag:
        srv.register = cell
    srv.sim.send(srv.pid, env.src, "W_A", (cnt, srv.changes, srv.unrefreshed_credits()),
                 {"cnt": cnt, "changes": len(srv.changes)})
