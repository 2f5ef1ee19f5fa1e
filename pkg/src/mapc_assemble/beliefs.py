"""Per-agent belief base.

Everything here lives in the agent's own frame: the spawn cell is ``(0, 0)``
and positions change only through the agent's own successful moves. Blocks,
dispensers and obstacles are kept only while in vision; goal cells are kept
forever. All update functions modify the belief base in place and return it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .errors import ContractViolation
from .geometry import UNIT, Cell, add, neighbours, rotate, sub
from .world import Action, ActionResult, Percept, Thing

if TYPE_CHECKING:
    from .comms import SharedKnowledge
    from .planner import Assignment, TaskPlan

CLEAR_TRIGGERS = frozenset({"attached", "detached", "requested", "taskSubmitted"})


@dataclass(frozen=True)
class VisitedEntry:
    pos: Cell
    step: int
    is_goal: bool


@dataclass
class BeliefBase:
    agent: str = ""
    self_pos: Cell = (0, 0)
    step: int = -1
    visited: list[VisitedEntry] = field(default_factory=list)
    goal_cells: set[Cell] = field(default_factory=set)
    goal_order: list[Cell] = field(default_factory=list)
    attachments: dict[Cell, str] = field(default_factory=dict)
    teammates: dict[str, Cell] = field(default_factory=dict)
    active_plan: TaskPlan | None = None
    last_clear_trigger: int = -1

    # percept-shaped, offsets from self, rebuilt every step
    obstacles: set[Cell] = field(default_factory=set)
    blocks: dict[Cell, Thing] = field(default_factory=dict)
    dispensers: dict[Cell, str] = field(default_factory=dict)
    entities: list[Thing] = field(default_factory=list)

    # encounter bookkeeping
    offers: dict[Cell, tuple[tuple, Cell]] = field(default_factory=dict)
    offers_step: int = -1
    encounters: dict[str, tuple[Cell, Cell, int]] = field(default_factory=dict)

    # plan execution progress
    connects_done: int = 0
    full_since: int | None = None
    goal_cursor: int = 0
    # set when a plan is dropped after connecting; the agent sheds its blocks
    release: bool = False

    @property
    def assignment(self) -> Assignment | None:
        if self.active_plan is None:
            return None
        return self.active_plan.assignments.get(self.agent)

    def visit_counts(self) -> dict[Cell, int]:
        counts: dict[Cell, int] = {}
        for e in self.visited:
            counts[e.pos] = counts.get(e.pos, 0) + 1
        return counts

    def to_frame(self, offset: Cell) -> Cell:
        return add(self.self_pos, offset)

    def to_offset(self, cell: Cell) -> Cell:
        return sub(cell, self.self_pos)

    def add_goal(self, cell: Cell) -> None:
        if cell not in self.goal_cells:
            self.goal_cells.add(cell)
            self.goal_order.append(cell)

    def drop_plan(self) -> None:
        if self.connects_done:
            self.release = True
        self.active_plan = None
        self.connects_done = 0
        self.full_since = None


def record_move(b: BeliefBase, direction: str, result: ActionResult) -> BeliefBase:
    if direction not in UNIT:
        raise ContractViolation(f"bad direction {direction!r}")
    if result is not ActionResult.SUCCESS:
        return b
    b.visited.append(VisitedEntry(b.self_pos, b.step, b.self_pos in b.goal_cells))
    b.self_pos = add(b.self_pos, UNIT[direction])
    return b


def clear_visited(b: BeliefBase, trigger: str) -> BeliefBase:
    if trigger not in CLEAR_TRIGGERS:
        raise ContractViolation(f"unknown clear trigger {trigger!r}")
    b.visited = []
    b.last_clear_trigger = b.step
    return b


def apply_percept(b: BeliefBase, p: Percept) -> BeliefBase:
    if p.step <= b.step:
        raise ContractViolation(f"stale percept for step {p.step} (beliefs at {b.step})")
    b.step = p.step
    for off, kind in p.terrain.items():
        if kind == "goal":
            b.add_goal(add(b.self_pos, off))
    b.obstacles = {off for off, kind in p.terrain.items() if kind == "obstacle"}
    b.blocks = {t.offset: t for t in p.things if t.kind == "block"}
    b.dispensers = {t.offset: t.detail for t in p.things if t.kind == "dispenser"}
    b.entities = [t for t in p.things if t.kind == "entity"]
    for off, btype in list(b.attachments.items()):
        seen = b.blocks.get(off)
        if seen is None or not seen.attached or seen.detail != btype:
            del b.attachments[off]
    return b


def _detach_subtree(attachments: dict[Cell, str], root: Cell) -> dict[Cell, str]:
    """Attachments still connected to the agent once ``root`` is released."""
    remaining = {c: t for c, t in attachments.items() if c != root}
    keep: set[Cell] = set()
    frontier = [(0, 0)]
    while frontier:
        cur = frontier.pop()
        for nb in neighbours(cur):
            if nb in remaining and nb not in keep:
                keep.add(nb)
                frontier.append(nb)
    return {c: t for c, t in remaining.items() if c in keep}


def sync_attachments(b: BeliefBase, act: Action, result: ActionResult) -> BeliefBase:
    if result is not ActionResult.SUCCESS:
        return b
    if act.name == "attach":
        off = UNIT[act.args[0]]
        seen = b.blocks.get(off)
        if seen is None:
            raise ContractViolation(f"attach succeeded but no block was recorded at {off}")
        b.attachments[off] = seen.detail
    elif act.name == "detach":
        b.attachments = _detach_subtree(b.attachments, UNIT[act.args[0]])
    elif act.name == "rotate":
        b.attachments = {rotate(c, act.args[0]): t for c, t in b.attachments.items()}
    return b


def integrate_shared(
    b: BeliefBase,
    payload: SharedKnowledge,
    partner_offset: Cell,
    self_pos: Cell | None = None,
) -> BeliefBase:
    """Merge a partner's goal cells and teammate positions into this frame.

    ``partner_offset`` and ``self_pos`` must describe the same instant as
    ``payload.partner_self_pos``; ``self_pos`` defaults to the current one.
    """
    here = b.self_pos if self_pos is None else self_pos
    origin = sub(add(here, partner_offset), payload.partner_self_pos)
    for g in payload.goal_cells:
        b.add_goal(add(origin, g))
    for mate, pos in payload.teammates:
        if mate != b.agent and mate not in b.teammates:
            b.teammates[mate] = add(origin, pos)
    return b


def apply_teammate_move(b: BeliefBase, mate: str, direction: str) -> BeliefBase:
    if mate in b.teammates:
        b.teammates[mate] = add(b.teammates[mate], UNIT[direction])
    return b


def attachments_in_frame(b: BeliefBase) -> set[tuple[Cell, str]]:
    return {(add(b.self_pos, c), t) for c, t in b.attachments.items()}

