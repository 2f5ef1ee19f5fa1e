"""Authoritative Agents Assemble simulator.

The world owns terrain, entities, blocks, the attachment graph, tasks and
scores. :func:`resolve_step` is the only state transition; it resolves all
agents' actions simultaneously and is independent of the iteration order of
the action mapping. :func:`perceive` and :func:`match_pattern` are read-only.
"""

from __future__ import annotations

import copy
import hashlib
import json
import random
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping

from .errors import ConfigError, ContractViolation, MapParseError
from .geometry import (
    DIRECTIONS,
    ROTATIONS,
    UNIT,
    Cell,
    add,
    adjacent,
    agent_sort_key,
    diamond,
    is_connected_to_origin,
    neighbours,
    reading_key,
    rotate,
    sub,
)

TEAMS = ("A", "B")
EMPTY, OBSTACLE, GOAL = "empty", "obstacle", "goal"


class ActionResult(str, Enum):
    SUCCESS = "success"
    FAILED_PATH = "failed_path"
    FAILED_TARGET = "failed_target"
    FAILED_PARTNER = "failed_partner"
    FAILED_PARAMETER = "failed_parameter"
    FAILED_DISABLED = "failed_disabled"


@dataclass(frozen=True)
class Action:
    """An agent action. ``args`` holds the parameters in MASSim order."""

    name: str
    args: tuple = ()

    @classmethod
    def move(cls, direction: str) -> Action:
        return cls("move", (direction,))

    @classmethod
    def rotate(cls, rotation: str) -> Action:
        return cls("rotate", (rotation,))

    @classmethod
    def attach(cls, direction: str) -> Action:
        return cls("attach", (direction,))

    @classmethod
    def detach(cls, direction: str) -> Action:
        return cls("detach", (direction,))

    @classmethod
    def request(cls, direction: str) -> Action:
        return cls("request", (direction,))

    @classmethod
    def connect(cls, partner: str, cell: Cell) -> Action:
        return cls("connect", (partner, (int(cell[0]), int(cell[1]))))

    @classmethod
    def submit(cls, task: str) -> Action:
        return cls("submit", (task,))

    @classmethod
    def skip(cls) -> Action:
        return cls("skip")

    def to_json(self) -> list:
        out: list = [self.name]
        for a in self.args:
            out.append(list(a) if isinstance(a, tuple) else a)
        return out

    @classmethod
    def from_json(cls, data: list) -> Action:
        name, *args = data
        return cls(name, tuple(tuple(a) if isinstance(a, list) else a for a in args))

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return f"{self.name}({', '.join(map(str, self.args))})"


@dataclass(frozen=True)
class Task:
    name: str
    deadline: int
    reward: int
    pattern: tuple[tuple[Cell, str], ...]

    def __post_init__(self) -> None:
        cells = [c for c, _ in self.pattern]
        if not cells:
            raise ValueError("task pattern is empty")
        if len(set(cells)) != len(cells):
            raise ValueError("task pattern offsets must be distinct")
        if (0, 0) in cells:
            raise ValueError("task pattern may not contain (0, 0)")
        if not is_connected_to_origin(cells):
            raise ValueError("task pattern must be 4-connected to (0, 0)")
        if self.reward <= 0:
            raise ValueError("task reward must be positive")
        canonical = tuple(sorted(self.pattern, key=lambda e: reading_key(e[0])))
        object.__setattr__(self, "pattern", canonical)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "deadline": self.deadline,
            "reward": self.reward,
            "pattern": [[c[0], c[1], t] for c, t in self.pattern],
        }


@dataclass
class Entity:
    id: str
    team: str
    position: Cell
    disabled_until: int = 0


@dataclass
class Block:
    id: str
    type: str
    position: Cell


@dataclass(frozen=True)
class ClearEvent:
    center: Cell
    radius: int
    step: int
    disabled: tuple[str, ...] = ()
    destroyed_blocks: int = 0

    def to_json(self) -> dict:
        return {
            "center": list(self.center),
            "radius": self.radius,
            "step": self.step,
            "disabled": list(self.disabled),
            "destroyed_blocks": self.destroyed_blocks,
        }


@dataclass(frozen=True)
class WorldConfig:
    seed: int = 1
    team_sizes: tuple[tuple[str, int], ...] = (("A", 1),)
    vision_radius: int = 5
    p_clear: float = 0.08
    clear_radius: int = 2
    clear_obstacle_p: float = 0.15
    disable_steps: int = 4
    task_interval: int = 20
    task_duration: int = 120
    task_min_size: int = 1
    task_max_size: int = 3
    reward_per_block: int = 10
    max_attachments: int = 4

    def __post_init__(self) -> None:
        if self.vision_radius < 1:
            raise ConfigError("vision_radius must be >= 1")
        if not 0.0 <= self.p_clear <= 1.0:
            raise ConfigError("p_clear must be a probability")
        if self.clear_radius < 1:
            raise ConfigError("clear_radius must be >= 1")
        if not 1 <= self.task_min_size <= self.task_max_size:
            raise ConfigError("need 1 <= task_min_size <= task_max_size")
        for team, n in self.team_sizes:
            if n < 0:
                raise ConfigError(f"negative size for team {team}")


# -- perception --------------------------------------------------------------


@dataclass(frozen=True)
class Thing:
    """Something visible at ``offset`` from the observer.

    ``detail`` is the team for entities and the block type for blocks and
    dispensers. Entity identities are never revealed.
    """

    offset: Cell
    kind: str
    detail: str
    attached: bool = False


@dataclass(frozen=True)
class Percept:
    agent: str
    team: str
    step: int
    vision_radius: int
    terrain: Mapping[Cell, str]
    things: tuple[Thing, ...]
    tasks: tuple[Task, ...]
    score: int
    last_action: Action | None = None
    last_result: ActionResult | None = None
    disabled: bool = False

    def things_at(self, offset: Cell) -> list[Thing]:
        return [t for t in self.things if t.offset == offset]

    def blocks(self) -> list[Thing]:
        return [t for t in self.things if t.kind == "block"]

    def entities(self, team: str | None = None) -> list[Thing]:
        return [
            t for t in self.things
            if t.kind == "entity" and (team is None or t.detail == team)
        ]

    def dispensers(self) -> list[Thing]:
        return [t for t in self.things if t.kind == "dispenser"]

    def task(self, name: str) -> Task | None:
        for t in self.tasks:
            if t.name == name:
                return t
        return None


# -- state -------------------------------------------------------------------


@dataclass
class GridState:
    width: int
    height: int
    obstacles: set[Cell]
    goals: frozenset[Cell]
    dispensers: dict[Cell, str]
    entities: dict[str, Entity]
    blocks: dict[str, Block]
    # sorted id pair -> "attach" (entity-block) or "connect" (block-block)
    edges: dict[tuple[str, str], str]
    tasks: list[Task]
    step: int
    scores: dict[str, int]
    rng: random.Random
    config: WorldConfig
    spawns: dict[str, Cell] = field(default_factory=dict)
    last_actions: dict[str, tuple[Action, ActionResult]] = field(default_factory=dict)
    next_block: int = 0
    next_task: int = 0

    # queries

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def terrain(self, cell: Cell) -> str:
        if cell in self.obstacles:
            return OBSTACLE
        if cell in self.goals:
            return GOAL
        return EMPTY

    def position(self, thing: str) -> Cell:
        if thing in self.entities:
            return self.entities[thing].position
        return self.blocks[thing].position

    def occupancy(self) -> dict[Cell, str]:
        occ = {e.position: e.id for e in self.entities.values()}
        occ.update((b.position, b.id) for b in self.blocks.values())
        return occ

    def adjacency(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = defaultdict(set)
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def component(self, thing: str, adj: Mapping[str, set[str]] | None = None) -> set[str]:
        adj = self.adjacency() if adj is None else adj
        seen = {thing}
        stack = [thing]
        while stack:
            cur = stack.pop()
            for nb in adj.get(cur, ()):
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return seen

    def direct_attachments(self, agent: str) -> list[str]:
        """Blocks joined to ``agent`` by its own attach edges."""
        out = []
        for (a, b), kind in self.edges.items():
            if kind != "attach":
                continue
            if a == agent:
                out.append(b)
            elif b == agent:
                out.append(a)
        return sorted(out)

    def attached_layout(self, agent: str) -> dict[Cell, str]:
        """Directly attached blocks as offsets from the agent."""
        pos = self.entities[agent].position
        return {sub(self.blocks[b].position, pos): self.blocks[b].type
                for b in self.direct_attachments(agent)}

    def is_disabled(self, agent: str) -> bool:
        return self.step < self.entities[agent].disabled_until

    def task(self, name: str) -> Task | None:
        for t in self.tasks:
            if t.name == name:
                return t
        return None

    def team_of(self, agent: str) -> str:
        return self.entities[agent].team

    def agents(self, team: str | None = None) -> list[str]:
        ids = [e.id for e in self.entities.values() if team is None or e.team == team]
        return sorted(ids, key=agent_sort_key)

    # copying and serialization

    def clone(self) -> GridState:
        new = copy.copy(self)
        new.obstacles = set(self.obstacles)
        new.entities = {k: copy.copy(v) for k, v in self.entities.items()}
        new.blocks = {k: copy.copy(v) for k, v in self.blocks.items()}
        new.edges = dict(self.edges)
        new.tasks = list(self.tasks)
        new.scores = dict(self.scores)
        new.rng = random.Random()
        new.rng.setstate(self.rng.getstate())
        new.last_actions = dict(self.last_actions)
        return new

    def snapshot(self) -> dict[str, Any]:
        rng_digest = hashlib.sha256(repr(self.rng.getstate()).encode()).hexdigest()
        return {
            "size": [self.width, self.height],
            "step": self.step,
            "obstacles": sorted(map(list, self.obstacles)),
            "goals": sorted(map(list, self.goals)),
            "dispensers": sorted([c[0], c[1], t] for c, t in self.dispensers.items()),
            "entities": [
                [e.id, e.team, list(e.position), e.disabled_until]
                for e in sorted(self.entities.values(), key=lambda e: agent_sort_key(e.id))
            ],
            "blocks": sorted([b.id, b.type, list(b.position)] for b in self.blocks.values()),
            "edges": sorted([a, b, k] for (a, b), k in self.edges.items()),
            "tasks": [t.to_json() for t in self.tasks],
            "scores": dict(sorted(self.scores.items())),
            "rng": rng_digest,
            "next": [self.next_block, self.next_task],
        }

    def serialize(self) -> str:
        return json.dumps(self.snapshot(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()


def _edge(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a < b else (b, a)


# -- map text ------------------------------------------------------------------


@dataclass
class ParsedMap:
    width: int
    height: int
    obstacles: set[Cell]
    goals: set[Cell]
    dispensers: dict[Cell, str]
    spawns: dict[str, list[Cell]]


def parse_map(text: str) -> ParsedMap:
    """Parse the line-oriented ASCII map format.

    ``.`` empty, ``#`` obstacle, ``g`` goal, ``0``-``4`` dispenser of type
    ``b<digit>``, ``A``/``B`` spawn cell of that team.
    """
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise MapParseError("map is empty", 1, 1)
    width = len(lines[0])
    if width == 0:
        raise MapParseError("first line is empty", 1, 1)
    obstacles: set[Cell] = set()
    goals: set[Cell] = set()
    dispensers: dict[Cell, str] = {}
    spawns: dict[str, list[Cell]] = {t: [] for t in TEAMS}
    for y, line in enumerate(lines):
        if len(line) != width:
            raise MapParseError(
                f"expected {width} characters, found {len(line)}", y + 1, min(len(line), width) + 1
            )
        for x, ch in enumerate(line):
            cell = (x, y)
            if ch == ".":
                continue
            if ch == "#":
                obstacles.add(cell)
            elif ch == "g":
                goals.add(cell)
            elif ch in "01234":
                dispensers[cell] = f"b{ch}"
            elif ch in spawns:
                spawns[ch].append(cell)
            else:
                raise MapParseError(f"unexpected character {ch!r}", y + 1, x + 1)
    return ParsedMap(width, len(lines), obstacles, goals, dispensers, spawns)


def build_world(config: WorldConfig, map_text: str) -> GridState:
    parsed = parse_map(map_text)
    entities: dict[str, Entity] = {}
    spawns: dict[str, Cell] = {}
    for team, n in config.team_sizes:
        cells = sorted(parsed.spawns.get(team, []), key=reading_key)
        if len(cells) < n:
            raise ConfigError(f"team {team} needs {n} spawn cells, map has {len(cells)}")
        for i in range(n):
            aid = f"{team}{i + 1}"
            entities[aid] = Entity(aid, team, cells[i])
            spawns[aid] = cells[i]
    state = GridState(
        width=parsed.width,
        height=parsed.height,
        obstacles=set(parsed.obstacles),
        goals=frozenset(parsed.goals),
        dispensers=dict(parsed.dispensers),
        entities=entities,
        blocks={},
        edges={},
        tasks=[],
        step=0,
        scores={team: 0 for team, _ in config.team_sizes},
        rng=random.Random(config.seed),
        config=config,
        spawns=spawns,
    )
    _generate_task(state)
    return state


def _generate_task(state: GridState) -> Task:
    cfg = state.config
    rng = state.rng
    size = rng.randint(cfg.task_min_size, cfg.task_max_size)
    cells: list[Cell] = [rng.choice(sorted(neighbours((0, 0)), key=reading_key))]
    while len(cells) < size:
        taken = set(cells) | {(0, 0)}
        frontier = sorted({nb for c in cells for nb in neighbours(c)} - taken, key=reading_key)
        cells.append(rng.choice(frontier))
    types = sorted(set(state.dispensers.values())) or ["b0"]
    pattern = tuple((c, rng.choice(types)) for c in cells)
    task = Task(
        name=f"task{state.next_task}",
        deadline=state.step + cfg.task_duration,
        reward=cfg.reward_per_block * size,
        pattern=pattern,
    )
    state.next_task += 1
    state.tasks.append(task)
    return task


# -- perception and pattern matching ---------------------------------------------


def perceive(state: GridState, agent: str, occupancy: Mapping[Cell, str] | None = None) -> Percept:
    if agent not in state.entities:
        raise ContractViolation(f"unknown agent {agent!r}")
    ent = state.entities[agent]
    occ = state.occupancy() if occupancy is None else occupancy
    linked = {t for pair in state.edges for t in pair}
    radius = state.config.vision_radius
    terrain: dict[Cell, str] = {}
    things: list[Thing] = []
    for cell in diamond(ent.position, radius):
        off = sub(cell, ent.position)
        if not state.in_bounds(cell):
            # the map edge reads as solid wall
            terrain[off] = OBSTACLE
            continue
        kind = state.terrain(cell)
        if kind != EMPTY:
            terrain[off] = kind
        tid = occ.get(cell)
        if tid is not None and tid != agent:
            if tid in state.entities:
                things.append(Thing(off, "entity", state.entities[tid].team, tid in linked))
            else:
                things.append(Thing(off, "block", state.blocks[tid].type, tid in linked))
        if cell in state.dispensers:
            things.append(Thing(off, "dispenser", state.dispensers[cell]))
    last = state.last_actions.get(agent)
    return Percept(
        agent=agent,
        team=ent.team,
        step=state.step,
        vision_radius=radius,
        terrain=terrain,
        things=tuple(things),
        tasks=tuple(state.tasks),
        score=state.scores.get(ent.team, 0),
        last_action=last[0] if last else None,
        last_result=last[1] if last else None,
        disabled=state.is_disabled(agent),
    )


def match_pattern(state: GridState, submitter: str, task: Task) -> bool:
    ent = state.entities[submitter]
    if ent.position not in state.goals:
        return False
    body = state.component(submitter)
    occ = state.occupancy()
    for off, btype in task.pattern:
        tid = occ.get(add(ent.position, off))
        if tid is None or tid not in state.blocks or tid not in body:
            return False
        if state.blocks[tid].type != btype:
            return False
    return True


# -- step resolution -----------------------------------------------------------

_DIRECTIONAL = {"move", "attach", "detach", "request"}


def _param_error(state: GridState, ent: Entity, act: Action) -> bool:
    """True when the action's parameters are malformed or out of bounds."""
    name, args = act.name, act.args
    if name == "skip":
        return bool(args)
    if name in _DIRECTIONAL:
        if len(args) != 1 or args[0] not in DIRECTIONS:
            return True
        if name != "move" and not state.in_bounds(add(ent.position, UNIT[args[0]])):
            return True
        return False
    if name == "rotate":
        return len(args) != 1 or args[0] not in ROTATIONS
    if name == "connect":
        if len(args) != 2 or not isinstance(args[0], str):
            return True
        cell = args[1]
        if not (isinstance(cell, tuple) and len(cell) == 2 and all(isinstance(v, int) for v in cell)):
            return True
        return not state.in_bounds(add(ent.position, cell))
    if name == "submit":
        return len(args) != 1 or not isinstance(args[0], str)
    return True


def resolve_step(
    state: GridState, actions: Mapping[str, Action]
) -> tuple[GridState, dict[str, ActionResult], list[ClearEvent]]:
    """Resolve one simultaneous step and return the successor state.

    Phases run in a fixed order (detach, attach, connect, request, submit,
    move/rotate, clear events) and each phase is evaluated set-wise, so the
    order of ``actions`` never matters. The input state is not modified.
    """
    for aid in actions:
        if aid not in state.entities:
            raise ContractViolation(f"action for unknown agent {aid!r}")
    missing = set(state.entities) - set(actions)
    if missing:
        raise ContractViolation(f"no action for {sorted(missing, key=agent_sort_key)}")

    new = state.clone()
    order = sorted(actions, key=agent_sort_key)
    results: dict[str, ActionResult] = {}
    pending: dict[str, list[str]] = defaultdict(list)
    for aid in order:
        act = actions[aid]
        ent = new.entities[aid]
        if new.is_disabled(aid):
            results[aid] = ActionResult.FAILED_DISABLED
        elif _param_error(new, ent, act):
            results[aid] = ActionResult.FAILED_PARAMETER
        elif act.name == "skip":
            results[aid] = ActionResult.SUCCESS
        else:
            pending[act.name].append(aid)

    occ = new.occupancy()
    _do_detach(new, actions, pending["detach"], occ, results)
    _do_attach(new, actions, pending["attach"], occ, results)
    _do_connect(new, actions, pending["connect"], results)
    _do_request(new, actions, pending["request"], occ, results)
    _do_submit(new, actions, pending["submit"], results)
    _do_movement(new, actions, pending["move"] + pending["rotate"], results)
    events = _do_clear_event(new)

    new.last_actions = {aid: (actions[aid], results[aid]) for aid in order}
    new.step += 1
    new.tasks = [t for t in new.tasks if t.deadline >= new.step]
    interval = new.config.task_interval
    if interval > 0 and new.step % interval == 0:
        _generate_task(new)
    return new, {aid: results[aid] for aid in order}, events


def _do_detach(state, actions, aids, occ, results) -> None:
    for aid in aids:
        target = add(state.entities[aid].position, UNIT[actions[aid].args[0]])
        tid = occ.get(target)
        key = _edge(aid, tid) if tid is not None else None
        if tid in state.blocks and state.edges.get(key) == "attach":
            del state.edges[key]
            results[aid] = ActionResult.SUCCESS
        else:
            results[aid] = ActionResult.FAILED_TARGET


def _do_attach(state, actions, aids, occ, results) -> None:
    adj = state.adjacency()
    claims: dict[str, list[tuple[str, str]]] = defaultdict(list)
    for aid in aids:
        target = add(state.entities[aid].position, UNIT[actions[aid].args[0]])
        tid = occ.get(target)
        if tid not in state.blocks:
            results[aid] = ActionResult.FAILED_TARGET
            continue
        if len(state.direct_attachments(aid)) >= state.config.max_attachments:
            results[aid] = ActionResult.FAILED_TARGET
            continue
        comp = state.component(tid, adj)
        if any(t in state.entities for t in comp):
            results[aid] = ActionResult.FAILED_TARGET
            continue
        claims[min(comp)].append((aid, tid))
    for claimants in claims.values():
        if len(claimants) == 1:
            aid, tid = claimants[0]
            state.edges[_edge(aid, tid)] = "attach"
            results[aid] = ActionResult.SUCCESS
        else:
            for aid, _ in claimants:
                results[aid] = ActionResult.FAILED_TARGET


def _do_connect(state, actions, aids, results) -> None:
    asked = {aid: actions[aid].args[0] for aid in aids}
    occ = state.occupancy()
    adj = state.adjacency()
    accepted: list[tuple[str, str, str, str]] = []
    for aid in aids:
        partner = asked[aid]
        if partner == aid or asked.get(partner) != aid:
            results[aid] = ActionResult.FAILED_PARTNER
    for aid in aids:
        partner = asked[aid]
        if aid in results or agent_sort_key(aid) > agent_sort_key(partner):
            continue
        cells = []
        for who in (aid, partner):
            cell = add(state.entities[who].position, actions[who].args[1])
            tid = occ.get(cell)
            ok = tid in state.blocks and tid in state.component(who, adj)
            cells.append((cell, tid if ok else None))
        (ca, ta), (cb, tb) = cells
        if ta is None or tb is None or not adjacent(ca, cb):
            results[aid] = results[partner] = ActionResult.FAILED_TARGET
        else:
            accepted.append((aid, partner, ta, tb))
    for aid, partner, ta, tb in accepted:
        state.edges[_edge(ta, tb)] = "connect"
        results[aid] = results[partner] = ActionResult.SUCCESS


def _do_request(state, actions, aids, occ, results) -> None:
    claims: dict[Cell, list[str]] = defaultdict(list)
    for aid in aids:
        target = add(state.entities[aid].position, UNIT[actions[aid].args[0]])
        if target not in state.dispensers or target in occ:
            results[aid] = ActionResult.FAILED_TARGET
        else:
            claims[target].append(aid)
    for cell in sorted(claims, key=reading_key):
        claimants = claims[cell]
        if len(claimants) != 1:
            for aid in claimants:
                results[aid] = ActionResult.FAILED_TARGET
            continue
        bid = f"b{state.next_block}"
        state.next_block += 1
        state.blocks[bid] = Block(bid, state.dispensers[cell], cell)
        occ[cell] = bid
        results[claimants[0]] = ActionResult.SUCCESS


def _do_submit(state, actions, aids, results) -> None:
    occ = state.occupancy()
    matched: dict[str, list[tuple[str, list[str]]]] = defaultdict(list)
    for aid in aids:
        task = state.task(actions[aid].args[0])
        if task is None or state.step > task.deadline or not match_pattern(state, aid, task):
            results[aid] = ActionResult.FAILED_TARGET
            continue
        pos = state.entities[aid].position
        used = [occ[add(pos, off)] for off, _ in task.pattern]
        matched[task.name].append((aid, used))
    winners = [(name, c[0]) for name, c in matched.items() if len(c) == 1]
    for c in matched.values():
        if len(c) > 1:
            for aid, _ in c:
                results[aid] = ActionResult.FAILED_TARGET
    counts: dict[str, int] = defaultdict(int)
    for _, (_, used) in winners:
        for b in used:
            counts[b] += 1
    for name, (aid, used) in sorted(winners):
        if any(counts[b] > 1 for b in used):
            results[aid] = ActionResult.FAILED_TARGET
            continue
        task = state.task(name)
        _remove_blocks(state, used)
        team = state.entities[aid].team
        state.scores[team] = state.scores.get(team, 0) + task.reward
        state.tasks = [t for t in state.tasks if t.name != name]
        results[aid] = ActionResult.SUCCESS


def _remove_blocks(state: GridState, blocks: Iterable[str]) -> None:
    gone = set(blocks)
    for b in gone:
        del state.blocks[b]
    state.edges = {k: v for k, v in state.edges.items() if k[0] not in gone and k[1] not in gone}


def _do_movement(state, actions, aids, results) -> None:
    occ = state.occupancy()
    adj = state.adjacency()
    movers: dict[str, tuple[set[str], dict[str, Cell]]] = {}
    for aid in sorted(aids, key=agent_sort_key):
        act = actions[aid]
        body = state.component(aid, adj)
        if sum(1 for t in body if t in state.entities) > 1:
            results[aid] = ActionResult.FAILED_PATH
            continue
        origin = state.entities[aid].position
        dest: dict[str, Cell] = {}
        for tid in body:
            pos = state.position(tid)
            if act.name == "move":
                dest[tid] = add(pos, UNIT[act.args[0]])
            else:
                dest[tid] = add(origin, rotate(sub(pos, origin), act.args[0]))
        if any(not state.in_bounds(c) or c in state.obstacles for c in dest.values()):
            results[aid] = ActionResult.FAILED_PATH
            continue
        movers[aid] = (body, dest)

    claimed: dict[Cell, set[str]] = defaultdict(set)
    for aid, (_, dest) in movers.items():
        for c in dest.values():
            claimed[c].add(aid)
    active = set(movers)
    for owners in claimed.values():
        if len(owners) > 1:
            active -= owners
    owner_of = {tid: aid for aid, (body, _) in movers.items() for tid in body}

    # greatest fixpoint: drop movers whose targets stay occupied
    while True:
        failing = set()
        for aid in active:
            body, dest = movers[aid]
            for cell in dest.values():
                tid = occ.get(cell)
                if tid is None or tid in body:
                    continue
                other = owner_of.get(tid)
                if other is None or other not in active:
                    failing.add(aid)
                    break
                other_body, other_dest = movers[other]
                if any(occ.get(c) in body for c in other_dest.values()):
                    failing.add(aid)  # head-on swap
                    break
        if not failing:
            break
        active -= failing

    for aid in movers:
        if aid not in active:
            results[aid] = ActionResult.FAILED_PATH
            continue
        _, dest = movers[aid]
        for tid, cell in dest.items():
            if tid in state.entities:
                state.entities[tid].position = cell
            else:
                state.blocks[tid].position = cell
        results[aid] = ActionResult.SUCCESS


def _do_clear_event(state: GridState) -> list[ClearEvent]:
    cfg = state.config
    rng = state.rng
    if cfg.p_clear <= 0 or rng.random() >= cfg.p_clear:
        return []
    center = (rng.randrange(state.width), rng.randrange(state.height))
    area = [c for c in diamond(center, cfg.clear_radius) if state.in_bounds(c)]
    occ = state.occupancy()
    state.obstacles.difference_update(area)
    doomed = [occ[c] for c in area if occ.get(c) in state.blocks]
    _remove_blocks(state, doomed)
    disabled = []
    for c in area:
        tid = occ.get(c)
        if tid in state.entities:
            state.entities[tid].disabled_until = state.step + 1 + cfg.disable_steps
            disabled.append(tid)
    occ = state.occupancy()
    for c in area:
        roll = rng.random()
        if roll < cfg.clear_obstacle_p and c not in occ and c not in state.dispensers and c not in state.goals:
            state.obstacles.add(c)
    return [ClearEvent(center, cfg.clear_radius, state.step,
                       tuple(sorted(disabled, key=agent_sort_key)), len(doomed))]


def true_offset(state: GridState, a: str, b: str) -> Cell:
    """Ground-truth offset from agent ``a`` to agent ``b``."""
    return sub(state.entities[b].position, state.entities[a].position)

