"""Dynamic quorum weights: changes, weighted quorums, a seeded simulator, the
transfer protocol, atomic storage over it, consensus reductions and checkers."""

from .core import (
    Change,
    ConfigError,
    ProcessId,
    SystemConfig,
    Tag,
    check_availability,
    is_quorum,
    min_weight_threshold,
    weight_of,
)
from .scenario import ScenarioScript, load_scenario
from .sim import CrashPoint, Schedule, Trace, run

__all__ = [
    "Change",
    "ConfigError",
    "CrashPoint",
    "ProcessId",
    "ScenarioScript",
    "Schedule",
    "SystemConfig",
    "Tag",
    "Trace",
    "check_availability",
    "is_quorum",
    "load_scenario",
    "min_weight_threshold",
    "run",
    "weight_of",
]
