"""Deterministic Agents Assemble simulator with a cooperative agent team."""

from .runner import MatchConfig, MatchStats, ReplayLog, parse_config, run_match, write_replay, write_stats
from .world import Action, ActionResult, GridState, Percept, Task, WorldConfig, build_world, perceive, resolve_step

__all__ = [
    "Action",
    "ActionResult",
    "GridState",
    "MatchConfig",
    "MatchStats",
    "Percept",
    "ReplayLog",
    "Task",
    "WorldConfig",
    "build_world",
    "parse_config",
    "perceive",
    "resolve_step",
    "run_match",
    "write_replay",
    "write_stats",
]

__version__ = "0.1.0"
