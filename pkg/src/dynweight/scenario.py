"""Scenario scripts: what each process does, when, under which config.

A script is either a fixed list of steps or a named generator that draws a
fresh config, crash plan and step list from the seed. Scripts are loaded from
JSON documents; weights are written as ``"num/den"`` strings (decimals such as
``"0.8"`` are also accepted and read exactly).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

from .core import ConfigError, ProcessId, SystemConfig, as_weight, client
from .reductions import DemoProcess, PwrOracle, WrOracle, reduction_weights
from .rpwr import Client, Server
from .sim import Action, CrashPoint, Schedule, fmt_weight

MODES = ("rpwr", "dwas", "demo-wr", "demo-pwr")

_ALLOWED = {
    ("rpwr", "server"): {"transfer", "read_changes"},
    ("rpwr", "client"): {"read_changes"},
    ("dwas", "server"): {"transfer", "read_changes"},
    ("dwas", "client"): {"read", "write", "read_changes"},
    ("demo-wr", "server"): {"reassign", "read_changes", "propose"},
    ("demo-wr", "client"): {"read_changes"},
    ("demo-pwr", "server"): {"transfer", "read_changes", "propose"},
    ("demo-pwr", "client"): {"read_changes"},
}


def parse_seeds(text) -> range:
    """``"7"`` or ``"1..200"`` (inclusive) to a range."""
    if isinstance(text, int):
        return range(text, text + 1)
    text = str(text).strip()
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
        if hi < lo:
            raise ConfigError(f"empty seed range {text!r}")
        return range(lo, hi + 1)
    k = int(text)
    return range(k, k + 1)


def make_action(at: int, actor, op: str, **kw) -> Action:
    if isinstance(actor, str):
        actor = ProcessId.parse(actor)
    norm = {}
    for k, v in kw.items():
        if k == "delta":
            v = fmt_weight(as_weight(v))
        elif isinstance(v, ProcessId):
            v = str(v)
        norm[k] = v
    return Action(int(at), actor, op, tuple(sorted(norm.items())))


@dataclass(frozen=True)
class ScenarioScript:
    name: str
    mode: str
    cfg: Optional[SystemConfig] = None
    steps: tuple = ()
    crash_plan: tuple = ()
    seeds: range = range(1, 2)
    fairness: str = "fair"
    bound: int = 8
    generator: Optional[str] = None
    description: str = ""

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r} (expected one of {', '.join(MODES)})")
        if self.generator is None and self.cfg is None:
            raise ConfigError(f"scenario {self.name!r} has neither a config nor a generator")
        if self.generator is not None and self.generator not in GENERATORS:
            raise ConfigError(f"unknown generator {self.generator!r}")

    def actions_for(self, seed: int) -> tuple:
        if self.generator is not None:
            return self.instantiate(seed)[2].steps
        return self.steps

    def instantiate(self, seed: int) -> tuple:
        """``(cfg, schedule, concrete script)`` for one seed."""
        if self.generator is None:
            sched = Schedule(seed, self.fairness, self.bound, self.crash_plan)
            return self.cfg, sched, self
        return GENERATORS[self.generator](self, seed)


# -- validation ---------------------------------------------------------------


def validate_actions(cfg: SystemConfig, mode: str, actions) -> None:
    """Raise ConfigError naming the first step that the protocol cannot express."""
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    proposers = set()
    mutated = set()
    for a in actions:
        where = f"step at {a.at} by {a.actor} ({a.op})"
        if a.at < 0:
            raise ConfigError(f"{where}: steps must be non-negative")
        if a.actor.kind not in ("server", "client"):
            raise ConfigError(f"{where}: unknown actor")
        if a.actor.is_server and a.actor.index >= cfg.n:
            raise ConfigError(f"{where}: {a.actor} is not one of the {cfg.n} configured servers")
        if a.op not in _ALLOWED[(mode, a.actor.kind)]:
            raise ConfigError(f"{where}: not available to a {a.actor.kind} in {mode} mode")
        kw = a.kw
        if a.op == "transfer":
            src = kw.get("source")
            if src is not None and ProcessId.parse(src) != a.actor:
                raise ConfigError(
                    f"{where}: condition C1 violated, only the source server may move its own weight"
                )
            dest = _server_arg(cfg, kw, "dest", where)
            if dest == a.actor:
                raise ConfigError(f"{where}: source and destination must differ")
            if as_weight(kw.get("delta", "0")) <= 0:
                raise ConfigError(f"{where}: the transferred amount must be positive")
            mutated.add(a.actor)
        elif a.op == "reassign":
            _server_arg(cfg, kw, "target", where)
            if as_weight(kw.get("delta", "0")) == 0:
                raise ConfigError(f"{where}: the reassigned amount must be non-zero")
            mutated.add(a.actor)
        elif a.op == "read_changes":
            _server_arg(cfg, kw, "target", where)
        elif a.op == "write":
            if not isinstance(kw.get("value"), str):
                raise ConfigError(f"{where}: write needs a string value")
        elif a.op == "propose":
            if "value" not in kw:
                raise ConfigError(f"{where}: propose needs a value")
            if a.actor in proposers or a.actor in mutated:
                raise ConfigError(f"{where}: propose must be the server's first weight change")
            if list(cfg.initial_weights) != reduction_weights(cfg.n, cfg.f):
                raise ConfigError(f"{where}: propose needs the reduction's initial weights")
            if mode == "demo-pwr" and cfg.f < 2:
                raise ConfigError(f"{where}: the pairwise reduction needs f >= 2")
            proposers.add(a.actor)
            mutated.add(a.actor)


def _server_arg(cfg: SystemConfig, kw: dict, name: str, where: str) -> ProcessId:
    if name not in kw:
        raise ConfigError(f"{where}: missing {name!r}")
    pid = ProcessId.parse(kw[name])
    if not pid.is_server or pid.index >= cfg.n:
        raise ConfigError(f"{where}: {name} {pid} is not a configured server")
    return pid


def build_processes(sim, mode: str, actions) -> None:
    cfg = sim.cfg
    clients = sorted({a.actor for a in actions if not a.actor.is_server})
    if mode in ("rpwr", "dwas"):
        for s in cfg.servers:
            sim.add_process(Server(s, sim))
        for c in clients:
            sim.add_process(Client(c, sim))
    else:
        sim.oracle = WrOracle(cfg) if mode == "demo-wr" else PwrOracle(cfg)
        for p in list(cfg.servers) + clients:
            sim.add_process(DemoProcess(p, sim, mode))


# -- JSON documents -------------------------------------------------------------


def _config_from_doc(doc: dict) -> SystemConfig:
    n, f = int(doc["n"]), int(doc["f"])
    ws = doc.get("weights")
    if ws == "reduction":
        ws = reduction_weights(n, f)
    return SystemConfig(n, f, ws)


def script_from_dict(doc: dict) -> ScenarioScript:
    try:
        name = doc.get("name", "unnamed")
        mode = doc["mode"]
        generator = doc.get("generator")
        cfg = None if generator else _config_from_doc(doc)
        steps = []
        for st in doc.get("steps", []):
            st = dict(st)
            at = st.pop("at", 0)
            actor = st.pop("actor")
            op = st.pop("op")
            st.pop("mode", None)
            steps.append(make_action(at, actor, op, **st))
        crash_plan = tuple(
            CrashPoint(ProcessId.parse(cp["server"]), int(cp.get("step", 0)), cp.get("after_sends"))
            for cp in doc.get("crash_plan", [])
        )
        script = ScenarioScript(
            name=name, mode=mode, cfg=cfg, steps=tuple(steps), crash_plan=crash_plan,
            seeds=parse_seeds(doc.get("seeds", doc.get("seed", 1))),
            fairness=doc.get("fairness", "fair"), bound=int(doc.get("bound", 8)),
            generator=generator, description=doc.get("description", ""),
        )
    except KeyError as e:
        raise ConfigError(f"scenario document is missing field {e.args[0]!r}") from None
    except (TypeError, ValueError, ZeroDivisionError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"malformed scenario document: {e}") from None
    if cfg is not None:
        validate_actions(cfg, mode, script.steps)
        Schedule(script.seeds.start, script.fairness, script.bound, crash_plan)
    return script


def bundled_names() -> list[str]:
    root = resources.files("dynweight") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario(name_or_path: str) -> ScenarioScript:
    """A bundled scenario by name, or a JSON file by path."""
    p = Path(name_or_path)
    if p.suffix == ".json" and p.exists():
        text = p.read_text()
    else:
        res = resources.files("dynweight") / "scenarios" / f"{name_or_path}.json"
        if not res.is_file():
            raise ConfigError(
                f"no scenario file or bundled scenario named {name_or_path!r} "
                f"(bundled: {', '.join(bundled_names())})"
            )
        text = res.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"scenario is not valid JSON: {e}") from None
    return script_from_dict(doc)


# -- seeded generators ------------------------------------------------------------

BATTERY_SHAPES = ((4, 1), (5, 1), (5, 2), (7, 1), (7, 2))


def _rng(kind: str, seed: int) -> random.Random:
    return random.Random(f"{kind}:{seed}")


def _crashes(rng: random.Random, cfg: SystemConfig, horizon: int, pool=None, mid_event: bool = True) -> tuple:
    pool = list(cfg.servers) if pool is None else list(pool)
    k = rng.randint(0, min(cfg.f, len(pool)))
    out = []
    for s in sorted(rng.sample(pool, k)):
        after = rng.randint(0, cfg.n - 2) if mid_event and rng.random() < 0.3 else None
        out.append(CrashPoint(s, rng.randint(0, horizon), after))
    return tuple(out)


def _fairness(seed: int) -> str:
    return "fair" if seed % 2 == 0 else "bounded"


def _random_transfers(rng: random.Random, cfg: SystemConfig, count: int, horizon: int) -> list:
    out = []
    for _ in range(count):
        src = rng.choice(cfg.servers)
        dst = rng.choice([s for s in cfg.servers if s != src])
        out.append(make_action(rng.randint(0, horizon), src, "transfer", dest=dst,
                               delta=Fraction(rng.randint(1, 8), 20)))
    return out


def _concrete(base: ScenarioScript, cfg, seed, steps, crash_plan, fairness) -> tuple:
    script = ScenarioScript(
        name=base.name, mode=base.mode, cfg=cfg, steps=tuple(steps), crash_plan=crash_plan,
        seeds=range(seed, seed + 1), fairness=fairness, bound=base.bound,
    )
    return cfg, Schedule(seed, fairness, base.bound, crash_plan), script


def gen_rpwr_battery(base: ScenarioScript, seed: int) -> tuple:
    rng = _rng("rpwr", seed)
    n, f = rng.choice(BATTERY_SHAPES)
    cfg = SystemConfig(n, f)
    steps = _random_transfers(rng, cfg, rng.randint(1, 20), 600)
    for k in range(rng.randint(1, 3)):
        for _ in range(rng.randint(1, 4)):
            steps.append(make_action(rng.randint(0, 800), client(k), "read_changes",
                                     target=rng.choice(cfg.servers)))
    if rng.random() < 0.5:
        s = rng.choice(cfg.servers)
        steps.append(make_action(rng.randint(0, 600), s, "read_changes", target=rng.choice(cfg.servers)))
    return _concrete(base, cfg, seed, steps, _crashes(rng, cfg, 800), _fairness(seed))


def gen_dwas_battery(base: ScenarioScript, seed: int) -> tuple:
    rng = _rng("dwas", seed)
    n, f = rng.choice(BATTERY_SHAPES)
    cfg = SystemConfig(n, f)
    steps = []
    budget = 12
    for k in range(rng.randint(2, 4)):
        for j in range(rng.randint(1, 3)):
            if budget == 0:
                break
            budget -= 1
            at = rng.randint(0, 400)
            if rng.random() < 0.5:
                steps.append(make_action(at, client(k), "write", value=f"v{k + 1}.{j + 1}"))
            else:
                steps.append(make_action(at, client(k), "read"))
    steps += _random_transfers(rng, cfg, rng.randint(1, 5), 300)
    return _concrete(base, cfg, seed, steps, _crashes(rng, cfg, 500), _fairness(seed))


def _proposals(rng: random.Random, n: int) -> list[str]:
    if rng.random() < 0.25:
        return ["same"] * n
    return [f"v{rng.randint(1, 3)}" for _ in range(n)]


def gen_alg1(base: ScenarioScript, seed: int) -> tuple:
    rng = _rng("alg1", seed)
    n = (3, 5, 7)[seed % 3]
    f = rng.randint(1, (n - 1) // 2)
    cfg = SystemConfig(n, f, reduction_weights(n, f))
    vals = _proposals(rng, n)
    steps = [make_action(rng.randint(0, 10), s, "propose", value=v) for s, v in zip(cfg.servers, vals)]
    return _concrete(base, cfg, seed, steps, _crashes(rng, cfg, 30, mid_event=False), _fairness(seed))


def gen_alg2(base: ScenarioScript, seed: int) -> tuple:
    rng = _rng("alg2", seed)
    n, f = 7, 2
    cfg = SystemConfig(n, f, reduction_weights(n, f))
    vals = _proposals(rng, n)
    steps = [make_action(rng.randint(0, 10), s, "propose", value=v) for s, v in zip(cfg.servers, vals)]
    # only F-members crash: a decision needs some S-F transfer to land
    crash_plan = _crashes(rng, cfg, 30, pool=cfg.servers[:f], mid_event=False)
    return _concrete(base, cfg, seed, steps, crash_plan, _fairness(seed))


GENERATORS: dict[str, Callable] = {
    "rpwr-battery": gen_rpwr_battery,
    "dwas-battery": gen_dwas_battery,
    "alg1": gen_alg1,
    "alg2": gen_alg2,
}
