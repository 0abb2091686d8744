"""Seeded discrete-event simulator for asynchronous crash-prone processes.

Links are reliable and unordered. One scheduling decision delivers one
message, invokes one scenario operation, or runs one local step of a process.
The scheduler is the only source of nondeterminism and is driven by
``random.Random(seed)``, so a run is a pure function of its inputs.
"""

from __future__ import annotations

import heapq
import os
import random
from collections import OrderedDict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, NamedTuple, Optional

from .core import ConfigError, ProcessId, SystemConfig

DEFAULT_STEP_LIMIT = 10**6
STEP_LIMIT_ENV = "DYNWEIGHT_STEP_LIMIT"

# Record kinds a trace may hold.
RECORD_KINDS = (
    "Init", "Send", "Deliver", "Drop", "Crash", "Invoke", "Respond", "Skip",
    "RBBroadcast", "RBDeliver", "Apply", "RefreshStart", "RefreshDone",
    "Oracle", "RegWrite", "End",
)


def step_limit_from_env(default: int = DEFAULT_STEP_LIMIT) -> int:
    raw = os.environ.get(STEP_LIMIT_ENV)
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{STEP_LIMIT_ENV} must be an integer, got {raw!r}") from None
    if value <= 0:
        raise ConfigError(f"{STEP_LIMIT_ENV} must be positive")
    return min(value, default)


class Envelope(NamedTuple):
    kind: str
    src: ProcessId
    dst: ProcessId
    payload: tuple
    seq: int


@dataclass(frozen=True)
class CrashPoint:
    """Crash ``server`` once the scheduler reaches ``step``.

    With ``after_sends`` set, the crash instead happens inside the first event
    handled at or after ``step`` that tries to send more than ``after_sends``
    messages; the excess messages are never handed to the network.
    """

    server: ProcessId
    step: int
    after_sends: Optional[int] = None


@dataclass(frozen=True)
class Schedule:
    seed: int
    fairness: str = "fair"  # "fair" or "bounded"
    bound: int = 8
    crash_plan: tuple = ()

    def __post_init__(self):
        if self.fairness not in ("fair", "bounded"):
            raise ConfigError(f"unknown fairness {self.fairness!r}")
        if self.bound < 1:
            raise ConfigError("adversarial delay bound must be at least 1")

    @property
    def label(self) -> str:
        return "fair" if self.fairness == "fair" else f"adversarial-bounded({self.bound})"


@dataclass
class Trace:
    """Ordered event records; each record is a JSON-ready dict."""

    records: list = field(default_factory=list)

    @property
    def status(self) -> Optional[str]:
        if self.records and self.records[-1]["kind"] == "End":
            return self.records[-1]["payload"]["status"]
        return None

    @property
    def quiescent(self) -> bool:
        return self.status == "quiescent"

    def of_kind(self, *kinds: str) -> list:
        return [r for r in self.records if r["kind"] in kinds]

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Trace) and self.records == other.records


class ProcessCrashed(Exception):
    """Unwinds a handler whose process crashed part-way through it."""


class IdealRegisterArray:
    """Crash-immune atomic SWMR registers, one per server index."""

    def __init__(self, n: int):
        self.cells: list = [None] * n

    def write(self, writer: ProcessId, i: int, value: Any) -> None:
        if not writer.is_server or writer.index != i:
            raise ConfigError(f"{writer} may not write register {i + 1}: cells are single-writer")
        self.cells[i] = value

    def read(self, i: int) -> Any:
        return self.cells[i]


class Process:
    """Base class for simulated processes. Handlers run one event at a time."""

    def __init__(self, pid: ProcessId, sim: "Simulator"):
        self.pid = pid
        self.sim = sim

    def on_message(self, env: Envelope) -> None:
        raise NotImplementedError

    def invoke(self, action: "Action") -> None:
        raise NotImplementedError


@dataclass(frozen=True)
class Action:
    at: int
    actor: ProcessId
    op: str
    args: tuple = ()  # sorted (name, value) pairs

    @property
    def kw(self) -> dict:
        return dict(self.args)


def fmt_weight(w: Fraction) -> str:
    w = Fraction(w)
    return f"{w.numerator}/{w.denominator}"


def fmt_change(c) -> list:
    return [str(c.issuer), c.counter, str(c.target), fmt_weight(c.delta)]


def fmt_changes(cs) -> list:
    return [fmt_change(c) for c in sorted(cs)]


class _FairPool:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.items: list = []

    def push(self, item, step: int) -> None:
        self.items.append(item)

    def pop(self, step: int):
        items = self.items
        i = self.rng.randrange(len(items))
        items[i], items[-1] = items[-1], items[i]
        return items.pop()

    def __len__(self) -> int:
        return len(self.items)


class _BoundedPool:
    """Mostly newest-first; anything passed over ``bound`` times goes next."""

    def __init__(self, rng: random.Random, bound: int):
        self.rng = rng
        self.bound = bound
        self.items: OrderedDict = OrderedDict()
        self._n = 0

    def push(self, item, step: int) -> None:
        self._n += 1
        self.items[self._n] = (step, item)

    def pop(self, step: int):
        items = self.items
        oldest = next(iter(items))
        if step - items[oldest][0] >= self.bound:
            return items.pop(oldest)[1]
        r = self.rng.random()
        if r < 0.75:
            return items.popitem(last=True)[1][1]
        keys = list(items)
        return items.pop(keys[self.rng.randrange(len(keys))])[1]

    def __len__(self) -> int:
        return len(self.items)


class Simulator:
    """Event loop, network, crash injection and trace recording."""

    def __init__(self, cfg: SystemConfig, schedule: Schedule, step_limit: Optional[int] = None):
        self.cfg = cfg
        self.schedule = schedule
        self.rng = random.Random(schedule.seed)
        self.step_limit = step_limit if step_limit is not None else step_limit_from_env()
        if schedule.fairness == "fair":
            self.pool = _FairPool(self.rng)
        else:
            self.pool = _BoundedPool(self.rng, schedule.bound)
        self.procs: dict = {}
        self.crashed: set = set()
        self.records: list = []
        self.step = 0
        self.registers = IdealRegisterArray(cfg.n)
        self.oracle = None
        self._seq = 0
        self._timers: list = []
        self._timer_n = 0
        self._armed: dict = {}
        self._actions: dict = {}
        self._busy: set = set()
        self._handler_pid: Optional[ProcessId] = None
        self._handler_sends = 0
        self._validate_crash_plan(schedule.crash_plan)

    def _validate_crash_plan(self, plan) -> None:
        names = set()
        for cp in plan:
            if not cp.server.is_server or cp.server.index >= self.cfg.n:
                raise ConfigError(f"crash plan names {cp.server}, which is not a configured server")
            if cp.step < 0:
                raise ConfigError("crash steps must be non-negative")
            names.add(cp.server)
        if len(names) > self.cfg.f:
            raise ConfigError(
                f"crash plan names {len(names)} servers but at most f={self.cfg.f} may crash"
            )

    # -- recording ---------------------------------------------------------

    def record(self, kind: str, frm=None, to=None, payload=None, ledger=None) -> None:
        self.records.append({
            "t": len(self.records),
            "kind": kind,
            "from": None if frm is None else str(frm),
            "to": None if to is None else str(to),
            "payload": payload,
            "ledger": ledger,
        })

    # -- network -----------------------------------------------------------

    def add_process(self, proc: Process) -> None:
        self.procs[proc.pid] = proc

    def send(self, src: ProcessId, dst: ProcessId, kind: str, payload: tuple, summary=None) -> None:
        if src in self.crashed:
            return
        if self._handler_pid == src:
            armed = self._armed.get(src)
            if armed is not None and self.step >= armed.step and self._handler_sends >= armed.after_sends:
                self._do_crash(src, partial=True)
                raise ProcessCrashed(src)
            self._handler_sends += 1
        self._seq += 1
        env = Envelope(kind, src, dst, payload, self._seq)
        info = {"seq": self._seq, "msg": kind}
        if summary:
            info.update(summary)
        self.record("Send", src, dst, info)
        self.pool.push(("msg", env), self.step)

    def post_local(self, pid: ProcessId, fn: Callable[[], None]) -> None:
        """Queue one local step of ``pid``; it competes with messages for scheduling."""
        self.pool.push(("local", pid, fn), self.step)

    def crash(self, pid: ProcessId) -> None:
        if pid in self.crashed:
            return
        others = {p for p in self.crashed}
        others.add(pid)
        if len(others) > self.cfg.f:
            raise ConfigError(f"crashing {pid} would exceed f={self.cfg.f}")
        self._do_crash(pid)

    def _do_crash(self, pid: ProcessId, partial: bool = False) -> None:
        if pid in self.crashed:
            return
        self.crashed.add(pid)
        self._armed.pop(pid, None)
        self.record("Crash", pid, None, {"step": self.step, "mid_event": partial})

    def is_correct(self, pid: ProcessId) -> bool:
        return pid not in self.crashed

    # -- operations --------------------------------------------------------

    def invoked(self, pid: ProcessId, payload: dict) -> None:
        self.record("Invoke", pid, None, payload)

    def respond(self, pid: ProcessId, payload: dict, ledger=None) -> None:
        self.record("Respond", pid, None, payload, ledger)
        self._busy.discard(pid)
        self._schedule_next_action(pid)

    def _schedule_next_action(self, pid: ProcessId) -> None:
        queue = self._actions.get(pid)
        if queue:
            at = max(queue[0].at, self.step)
            self._push_timer(at, "act", pid)

    def _push_timer(self, step: int, kind: str, data) -> None:
        self._timer_n += 1
        heapq.heappush(self._timers, (step, self._timer_n, kind, data))

    def load_actions(self, actions) -> None:
        for a in sorted(actions, key=lambda a: a.at):
            self._actions.setdefault(a.actor, []).append(a)
        for pid in sorted(self._actions):
            self._schedule_next_action(pid)

    def _fire_timers(self) -> None:
        timers = self._timers
        while timers and timers[0][0] <= self.step:
            _, _, kind, data = heapq.heappop(timers)
            if kind == "crash":
                if data.after_sends is None:
                    self._do_crash(data.server)
                else:
                    self._armed[data.server] = data
            else:
                self._ready_action(data)

    def _ready_action(self, pid: ProcessId) -> None:
        queue = self._actions.get(pid)
        if not queue or pid in self._busy:
            return
        if pid in self.crashed:
            for a in queue:
                self.record("Skip", pid, None, {"op": a.op, "at": a.at, "reason": "crashed"})
            queue.clear()
            return
        action = queue.pop(0)
        self._busy.add(pid)
        self.pool.push(("invoke", pid, action), self.step)

    # -- main loop ---------------------------------------------------------

    def run_loop(self) -> str:
        for cp in self.schedule.crash_plan:
            self._push_timer(cp.step, "crash", cp)
        status = "quiescent"
        while True:
            self._fire_timers()
            if not len(self.pool):
                if not self._timers:
                    break
                self.step = max(self.step, self._timers[0][0])
                continue
            if self.step >= self.step_limit:
                status = "step_limit"
                break
            item = self.pool.pop(self.step)
            self.step += 1
            self._dispatch(item)
        # operations still queued for crashed actors
        for pid in sorted(self._actions):
            if pid in self.crashed and self._actions[pid]:
                self._ready_action(pid)
        open_ops = sorted(str(p) for p in self._busy if p not in self.crashed)
        self.record("End", None, None, {"status": status, "steps": self.step, "open_ops": open_ops})
        return status

    def _dispatch(self, item) -> None:
        kind = item[0]
        if kind == "msg":
            env = item[1]
            pid = env.dst
            if pid in self.crashed:
                self.record("Drop", env.src, pid, {"seq": env.seq, "msg": env.kind})
                return
            self.record("Deliver", env.src, pid, {"seq": env.seq, "msg": env.kind})
            self._run_handler(pid, self.procs[pid].on_message, env)
        elif kind == "invoke":
            _, pid, action = item
            if pid in self.crashed:
                self._busy.discard(pid)
                self.record("Skip", pid, None, {"op": action.op, "at": action.at, "reason": "crashed"})
                return
            self._run_handler(pid, self.procs[pid].invoke, action)
        else:
            _, pid, fn = item
            if pid in self.crashed:
                return
            self._run_handler(pid, fn)

    def _run_handler(self, pid: ProcessId, fn, *args) -> None:
        self._handler_pid = pid
        self._handler_sends = 0
        try:
            fn(*args)
        except ProcessCrashed:
            pass
        finally:
            self._handler_pid = None


def run(cfg: SystemConfig, schedule: Schedule, scenario, *, pool_factory=None) -> Trace:
    """Execute ``scenario`` under ``schedule`` and return its full trace.

    ``pool_factory(rng)`` may supply a custom scheduling pool (same
    push/pop/len interface) to script a specific adversary.
    """
    from .scenario import build_processes, validate_actions

    actions = scenario.actions_for(schedule.seed)
    validate_actions(cfg, scenario.mode, actions)
    sim = Simulator(cfg, schedule)
    if pool_factory is not None:
        sim.pool = pool_factory(sim.rng)
    build_processes(sim, scenario.mode, actions)
    sim.record(
        "Init", None, None,
        {
            "scenario": scenario.name,
            "mode": scenario.mode,
            "n": cfg.n,
            "f": cfg.f,
            "weights": [fmt_weight(w) for w in cfg.initial_weights],
            "seed": schedule.seed,
            "fairness": schedule.label,
            "crash_plan": [
                [str(cp.server), cp.step, cp.after_sends] for cp in schedule.crash_plan
            ],
        },
        fmt_changes(cfg.initial_changes),
    )
    sim.load_actions(actions)
    sim.run_loop()
    return Trace(sim.records)
