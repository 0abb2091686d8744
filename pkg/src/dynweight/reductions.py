"""Consensus on top of (pairwise) weight reassignment.

Both reassignment abstractions are run here as ideal sequential objects: one
atomic step per operation. Neither can be built from asynchronous message
passing, and these demos are the reason why: with the initial weights below,
at most one of the concurrent reassignments can be effective, so the
servers agree on whose proposal to pick.
"""

from __future__ import annotations

from fractions import Fraction

from .core import (
    Change,
    ConfigError,
    ProcessId,
    SystemConfig,
    as_weight,
    changes_for,
    check_availability,
)
from .sim import Process, fmt_change, fmt_changes, fmt_weight

HALF = Fraction(1, 2)
INTRA_F = Fraction(1, 10)
INTO_FIRST = Fraction(2, 5)


def reduction_weights(n: int, f: int) -> list[Fraction]:
    """Initial weights: ``(n-1)/(2f)`` for the first ``f`` servers, ``(n+1)/(2(n-f))`` otherwise."""
    if f < 1:
        raise ConfigError("the reduction demos need f >= 1")
    if n <= f:
        raise ConfigError(f"need n > f (n={n}, f={f})")
    heavy = Fraction(n - 1, 2 * f)
    light = Fraction(n + 1, 2 * (n - f))
    return [heavy] * f + [light] * (n - f)


def reduction_config(n: int, f: int) -> SystemConfig:
    return SystemConfig(n, f, reduction_weights(n, f))


class WrOracle:
    """Unrestricted reassignment: a change lands iff availability survives it."""

    def __init__(self, cfg: SystemConfig):
        self.cfg = cfg
        self.changes: frozenset = cfg.initial_changes
        self.completed: list = sorted(cfg.initial_changes)
        self._lc: dict = {}

    def _next_counter(self, issuer: ProcessId) -> int:
        lc = self._lc.get(issuer, 2)
        self._lc[issuer] = lc + 1
        return lc

    def reassign(self, issuer: ProcessId, target: ProcessId, delta) -> Change:
        delta = as_weight(delta)
        if delta == 0:
            raise ConfigError("reassign needs a non-zero delta")
        lc = self._next_counter(issuer)
        change = Change(issuer, lc, target, delta)
        candidate = self.changes | {change}
        if check_availability(candidate, self.cfg):
            self.changes = candidate
            self.completed.append(change)
            return change
        return Change(issuer, lc, target, Fraction(0))

    def read_changes(self, s: ProcessId) -> frozenset:
        return changes_for(self.changes, s)


class PwrOracle(WrOracle):
    """Pairwise reassignment: debit and credit land together or not at all."""

    def transfer(self, issuer: ProcessId, src: ProcessId, dst: ProcessId, delta) -> tuple:
        delta = as_weight(delta)
        if delta == 0:
            raise ConfigError("transfer needs a non-zero delta")
        if src == dst:
            raise ConfigError("transfer needs distinct source and destination")
        lc = self._next_counter(issuer)
        debit = Change(issuer, lc, src, -delta)
        credit = Change(issuer, lc, dst, delta)
        candidate = self.changes | {debit, credit}
        if check_availability(candidate, self.cfg):
            self.changes = candidate
            self.completed.extend([debit, credit])
            return debit, credit
        return Change(issuer, lc, src, Fraction(0)), Change(issuer, lc, dst, Fraction(0))


def oracle_reassign(o: WrOracle, issuer, target, delta) -> Change:
    return o.reassign(issuer, target, delta)


def oracle_transfer(o: PwrOracle, issuer, src, dst, delta) -> tuple:
    return o.transfer(issuer, src, dst, delta)


def intra_f_target(i: int, f: int) -> int:
    """Zero-based index of the F-member that F-member ``i`` hands 0.1 to (wraps inside F)."""
    return (i + 1) % f


class DemoProcess(Process):
    """A server or client whose operations go straight to the shared oracle."""

    def __init__(self, pid: ProcessId, sim, mode: str):
        super().__init__(pid, sim)
        self.cfg = sim.cfg
        self.mode = mode

    def on_message(self, env) -> None:
        raise AssertionError("demo processes exchange no messages")

    def invoke(self, action) -> None:
        kw = action.kw
        op = action.op
        sim = self.sim
        if op == "read_changes":
            target = ProcessId.parse(kw["target"])
            sim.invoked(self.pid, {"op": op, "target": str(target)})
            result = sim.oracle.read_changes(target)
            sim.respond(self.pid, {"op": op, "target": str(target), "result": fmt_changes(result)})
        elif op == "reassign":
            target = ProcessId.parse(kw["target"])
            delta = as_weight(kw["delta"])
            sim.invoked(self.pid, {"op": op, "target": str(target), "delta": fmt_weight(delta)})
            c = sim.oracle.reassign(self.pid, target, delta)
            effective = c.delta != 0
            sim.respond(self.pid, {"op": op, "complete": fmt_change(c), "effective": effective},
                        ledger=fmt_changes([c]) if effective else None)
        elif op == "transfer":
            dest = ProcessId.parse(kw["dest"])
            delta = as_weight(kw["delta"])
            sim.invoked(self.pid, {"op": op, "dest": str(dest), "delta": fmt_weight(delta)})
            debit, credit = sim.oracle.transfer(self.pid, self.pid, dest, delta)
            effective = debit.delta != 0
            sim.respond(self.pid, {"op": op, "complete": fmt_change(debit), "effective": effective},
                        ledger=fmt_changes([debit, credit]) if effective else None)
        elif op == "propose":
            sim.invoked(self.pid, {"op": op, "value": kw["value"]})
            self._value = kw["value"]
            sim.post_local(self.pid, self._store_proposal)
        else:
            raise ConfigError(f"{op!r} is not available in {self.mode} mode")

    # propose(): one step per shared-object access

    def _store_proposal(self) -> None:
        i = self.pid.index
        self.sim.registers.write(self.pid, i, self._value)
        self.sim.record("RegWrite", self.pid, None, {"cell": i + 1, "value": self._value})
        self.sim.post_local(self.pid, self._reassign_step)

    def _reassign_step(self) -> None:
        sim, cfg, i = self.sim, self.cfg, self.pid.index
        if self.mode == "demo-wr":
            delta = HALF if i < cfg.f else -HALF
            c = sim.oracle.reassign(self.pid, self.pid, delta)
            effective = c.delta != 0
            sim.record("Oracle", self.pid, None,
                       {"op": "reassign", "delta": fmt_weight(delta), "complete": fmt_change(c),
                        "effective": effective, "group": "F" if i < cfg.f else "S-F"},
                       fmt_changes([c]) if effective else None)
        else:
            if i < cfg.f:
                dest, delta, group = cfg.servers[intra_f_target(i, cfg.f)], INTRA_F, "F"
            else:
                dest, delta, group = cfg.servers[0], INTO_FIRST, "S-F"
            debit, credit = sim.oracle.transfer(self.pid, self.pid, dest, delta)
            effective = debit.delta != 0
            sim.record("Oracle", self.pid, None,
                       {"op": "transfer", "dest": str(dest), "delta": fmt_weight(delta),
                        "complete": fmt_change(debit), "effective": effective, "group": group},
                       fmt_changes([debit, credit]) if effective else None)
        self._decided = None
        self._j = 0
        sim.post_local(self.pid, self._poll_step)

    def _poll_step(self) -> None:
        sim, cfg = self.sim, self.cfg
        if self.mode == "demo-wr":
            j = self._j
            sj = cfg.servers[j]
            cs = sim.oracle.read_changes(sj)
            hit = any(c.issuer == sj and c.counter == 2 and c.delta != 0 for c in cs)
            if hit:
                self._decided = sim.registers.read(j)
            self._j = (j + 1) % cfg.n
            sweep_done = self._j == 0
        else:
            # the 0.4 credits all land on s1, so one read of s1 covers every j in S-F
            s1 = cfg.servers[0]
            cs = sim.oracle.read_changes(s1)
            for c in cs:
                if (c.issuer.index >= cfg.f and c.counter == 2 and c.target == s1
                        and c.delta == INTO_FIRST):
                    self._decided = sim.registers.read(c.issuer.index)
            sweep_done = True
        if sweep_done and self._decided is not None:
            sim.respond(self.pid, {"op": "propose", "value": self._value, "decided": self._decided})
        else:
            sim.post_local(self.pid, self._poll_step)
