"""Match orchestration, statistics and replay logs.

One step of a match runs in a fixed order: deliver last step's messages,
perceive, let every agent update its beliefs and decide, resolve the step
in the world, then record statistics and the replay. The whole run is a
pure function of the :class:`MatchConfig`.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

from .agent import IdleAgent, TeamAgent
from .comms import Mailbox, Message, advance_mailbox
from .controller import ControllerParams
from .errors import ConfigError, ContractViolation
from .geometry import agent_sort_key
from .mapgen import generate_map
from .world import Action, ActionResult, GridState, WorldConfig, build_world, parse_map, perceive, resolve_step

OPPONENTS = ("idle", "mirror")


@dataclass(frozen=True)
class MatchConfig:
    seed: int = 1
    steps: int = 500
    agents_per_team: int = 4
    map_path: str | None = None
    map_text: str | None = None
    width: int = 30
    height: int = 30
    obstacle_density: float = 0.1
    goal_areas: int = 3
    dispensers: int = 4
    block_types: int = 3
    vision_radius: int = 5
    p_clear: float = 0.08
    min_steps: int = 80
    detach_distance: int = 3
    goal_weight: int = 1
    teammate_weight: int = 5
    literal_safe_exploration: bool = False
    opponent: str = "idle"
    task_interval: int = 20
    task_duration: int = 120
    task_min_size: int = 1
    task_max_size: int = 3
    check_digest: bool = True

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.agents_per_team < 1:
            raise ConfigError("agents_per_team must be >= 1")
        if self.opponent not in OPPONENTS:
            raise ConfigError(f"opponent must be one of {OPPONENTS}")
        if self.min_steps < 0 or self.detach_distance < 0:
            raise ConfigError("min_steps and detach_distance must be >= 0")
        if self.goal_weight <= 0 or self.teammate_weight <= 0:
            raise ConfigError("safe exploration weights must be positive")

    def resolve_map(self) -> str:
        if self.map_text is not None:
            return self.map_text
        if self.map_path is not None:
            try:
                return Path(self.map_path).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read map {self.map_path}: {exc}") from exc
        return generate_map(
            self.width, self.height, self.seed, self.agents_per_team,
            self.obstacle_density, self.goal_areas, self.dispensers, self.block_types,
        )

    def to_json(self) -> dict:
        return {k: v for k, v in dataclasses.asdict(self).items() if k != "map_text"}


_FIELDS = {f.name: f for f in dataclasses.fields(MatchConfig)}
_ALIASES = {"map": "map_path", "pclear": "p_clear", "agents": "agents_per_team"}


def _snake(key: str) -> str:
    return re.sub(r"(?<=[a-z0-9])([A-Z])", r"_\1", key).lower().replace("-", "_")


def _coerce(name: str, raw: str) -> Any:
    kind = _FIELDS[name].type
    if "bool" in kind:
        low = raw.strip().lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
        return low in ("true", "1", "yes")
    if "int" in kind and "float" not in kind:
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{name}: expected an integer, got {raw!r}") from exc
    if "float" in kind:
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{name}: expected a number, got {raw!r}") from exc
    return raw.strip()


def parse_config(text: str, base_dir: str | Path | None = None, **overrides: Any) -> MatchConfig:
    """Parse ``key=value`` lines. ``#`` starts a comment; keys may be camelCase.

    A relative ``map`` path is resolved against ``base_dir``. Keyword
    overrides whose value is ``None`` are ignored.
    """
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        name = _ALIASES.get(key.lower(), _snake(key))
        if name not in _FIELDS or name == "map_text":
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[name] = _coerce(name, raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    if base_dir is not None and values.get("map_path"):
        path = Path(values["map_path"])
        if not path.is_absolute():
            values["map_path"] = str(Path(base_dir) / path)
    return MatchConfig(**values)


# -- statistics -------------------------------------------------------------------

STATS_HEADER = "Step ScoreA ScoreB AttachedA AttachedB SubmitsA SubmitsB TasksA TasksB ClearEvents"


@dataclass
class MatchStats:
    rows: list[tuple[int, ...]] = field(default_factory=list)

    def column(self, name: str) -> list[int]:
        i = STATS_HEADER.split().index(name)
        return [r[i] for r in self.rows]

    def final(self, name: str) -> int:
        return self.column(name)[-1]


def write_stats(stats: MatchStats, path: str | Path) -> None:
    lines = [STATS_HEADER] + [" ".join(str(v) for v in row) for row in stats.rows]
    Path(path).write_text("\n".join(lines) + "\n")


# -- replay -----------------------------------------------------------------------


@dataclass
class ReplayLog:
    header: dict
    records: list[dict] = field(default_factory=list)

    def lines(self) -> list[str]:
        return [_dump(self.header)] + [_dump(r) for r in self.records]


def _dump(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _plain(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {"_": type(obj).__name__, **{f.name: _plain(getattr(obj, f.name))
                                             for f in dataclasses.fields(obj)}}
    if isinstance(obj, dict):
        return [[_plain(k), _plain(v)] for k, v in obj.items()]
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = [_plain(v) for v in obj]
        return sorted(items, key=_dump) if isinstance(obj, (set, frozenset)) else items
    return obj


def message_digest(msg: Message) -> str:
    return hashlib.sha256(_dump(_plain(msg.body)).encode()).hexdigest()[:16]


def write_replay(log: ReplayLog, path: str | Path) -> None:
    Path(path).write_text("\n".join(log.lines()) + "\n")


def read_replay(path: str | Path) -> ReplayLog:
    lines = [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
    if not lines or lines[0].get("type") != "header":
        raise ConfigError(f"{path}: not a replay log")
    return ReplayLog(lines[0], lines[1:])


def world_config(cfg: MatchConfig, map_text: str) -> WorldConfig:
    parsed = parse_map(map_text)
    # team B fills as many of its spawn cells as the map offers, up to the team size
    b_size = min(cfg.agents_per_team, len(parsed.spawns["B"]))
    sizes = (("A", cfg.agents_per_team),) + ((("B", b_size),) if b_size else ())
    return WorldConfig(
        seed=cfg.seed,
        team_sizes=sizes,
        vision_radius=cfg.vision_radius,
        p_clear=cfg.p_clear,
        task_interval=cfg.task_interval,
        task_duration=cfg.task_duration,
        task_min_size=cfg.task_min_size,
        task_max_size=cfg.task_max_size,
    )


def replay_states(log: ReplayLog) -> list[str]:
    """Re-feed the logged actions into the world and return state digests.

    Digest ``i`` is the state after ``i`` steps; it must equal the logged
    ``state`` record for that step.
    """
    cfg = MatchConfig(**{k: v for k, v in log.header["config"].items()})
    map_text = log.header["map"]
    state = build_world(world_config(cfg, map_text), map_text)
    digests = [state.digest()]
    by_step: dict[int, dict[str, Action]] = {}
    for r in log.records:
        if r["type"] == "agent":
            by_step.setdefault(r["step"], {})[r["agent"]] = Action.from_json(r["action"])
    for step in sorted(by_step):
        state, _, _ = resolve_step(state, by_step[step])
        digests.append(state.digest())
    return digests


# -- the match loop -----------------------------------------------------------------


StepHook = Callable[[GridState, Mapping[str, Any], Mapping[str, list[Message]]], None]


def make_agents(cfg: MatchConfig, state: GridState, sentinel: int) -> dict[str, Any]:
    params = ControllerParams(
        detach_distance=cfg.detach_distance,
        goal_weight=cfg.goal_weight,
        teammate_weight=cfg.teammate_weight,
        sentinel=sentinel,
        literal_safe_exploration=cfg.literal_safe_exploration,
    )
    agents: dict[str, Any] = {}
    for team, _ in state.config.team_sizes:
        roster = state.agents(team)
        if team == "B" and cfg.opponent == "idle":
            agents.update({aid: IdleAgent(aid) for aid in roster})
            continue
        planner_id = roster[0]
        for aid in roster:
            agents[aid] = TeamAgent(aid, planner_id, params, cfg.min_steps, cfg.check_digest)
    return agents


def run_match(cfg: MatchConfig, on_step: StepHook | None = None) -> tuple[MatchStats, ReplayLog]:
    """Play a full match.

    ``on_step`` is called every step after all agents decided and before the
    world advances, with the current state, the agents and the delivered
    messages.
    """
    map_text = cfg.resolve_map()
    state = build_world(world_config(cfg, map_text), map_text)
    agents = make_agents(cfg, state, sentinel=2 * (state.width + state.height))
    box = Mailbox({team: state.agents(team) for team, _ in state.config.team_sizes})

    log = ReplayLog({"type": "header", "config": cfg.to_json(), "map": map_text})
    totals = {k: 0 for k in ("attachedA", "attachedB", "submitsA", "submitsB", "tasksA", "tasksB", "clear")}
    stats = MatchStats([_row(state, totals)])

    for _ in range(cfg.steps):
        step = state.step
        try:
            inbox = advance_mailbox(box, step)
            digests: dict[int, str] = {}
            for aid, msgs in inbox.items():
                for m in msgs:
                    if m.seq not in digests:
                        digests[m.seq] = message_digest(m)
                    if m.sent_step + 1 != step:
                        raise ContractViolation(f"message {m.seq} sent at {m.sent_step} delivered at {step}")
                    log.records.append({
                        "type": "message", "step": step, "to": aid, "from": m.sender,
                        "sent": m.sent_step, "kind": m.kind,
                        "digest": digests[m.seq],
                    })
            occ = state.occupancy()
            actions: dict[str, Action] = {}
            traces = {}
            for aid in sorted(agents, key=agent_sort_key):
                percept = perceive(state, aid, occ)
                action, trace, posts = agents[aid].step(percept, inbox.get(aid, []))
                actions[aid] = action
                traces[aid] = trace
                for recipient, body in posts:
                    box.post(aid, recipient, body, step)
            if on_step is not None:
                on_step(state, agents, inbox)
            state, results, events = resolve_step(state, actions)
        except ContractViolation as exc:
            raise ContractViolation(f"step {step}: {exc}") from exc

        for aid in sorted(actions, key=agent_sort_key):
            team = state.team_of(aid)
            act, res = actions[aid], results[aid]
            ok = res is ActionResult.SUCCESS
            if ok and act.name in ("attach", "request"):
                totals[f"attached{team}"] += 1
            if act.name == "submit":
                totals[f"submits{team}"] += 1
                if ok:
                    totals[f"tasks{team}"] += 1
            log.records.append({
                "type": "agent", "step": step, "agent": aid, "rule": traces[aid].rule,
                "variant": traces[aid].variant, "action": act.to_json(), "result": res.value,
            })
        totals["clear"] += len(events)
        for ev in events:
            log.records.append({"type": "clear", **ev.to_json()})
        log.records.append({"type": "state", "step": state.step, "digest": state.digest()})
        stats.rows.append(_row(state, totals))
    return stats, log


def _row(state: GridState, totals: Mapping[str, int]) -> tuple[int, ...]:
    return (
        state.step,
        state.scores.get("A", 0),
        state.scores.get("B", 0),
        totals["attachedA"],
        totals["attachedB"],
        totals["submitsA"],
        totals["submitsB"],
        totals["tasksA"],
        totals["tasksB"],
        totals["clear"],
    )
