"""Per-agent action selection.

:func:`decide` walks an ordered list of rules and returns the action of the
first one that applies. Rules read the belief base and the current percept
only; the caller has already folded the inbox into the beliefs. Nothing is
mutated, so a decision can be recomputed from a logged state.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

from .beliefs import BeliefBase
from .errors import ShapeMismatch
from .geometry import DIRECTION_OF, DIRECTIONS, UNIT, Cell, add, manhattan, reading_key, rotate, rotate_times, sub
from .heuristics import HeuristicContext, select_direction
from .planner import Assignment, fit_turns
from .world import Action, Percept

OBSTACLE, GOAL = "obstacle", "goal"


@dataclass(frozen=True)
class ControllerParams:
    detach_distance: int = 3
    goal_weight: int = 1
    teammate_weight: int = 5
    sentinel: int = 80
    literal_safe_exploration: bool = False


@dataclass(frozen=True)
class DecisionTrace:
    step: int
    rule: str
    action: Action
    variant: str | None = None

    def to_json(self) -> dict:
        return {"step": self.step, "rule": self.rule, "action": self.action.to_json(),
                "variant": self.variant}


# -- predicates ---------------------------------------------------------------


def safe_detach(b: BeliefBase, p: Percept, direction: str, detach_distance: int = 3) -> bool:
    """True when the drop cell keeps ``detach_distance`` from goals and obstacles."""
    drop = UNIT[direction]
    goals = (b.to_offset(g) for g in b.goal_cells)
    walls = (off for off, kind in p.terrain.items() if kind == OBSTACLE)
    return all(manhattan(drop, c) >= detach_distance for src in (goals, walls) for c in src)


def rotation_needed(b: BeliefBase, target: dict[Cell, str] | set[Cell]) -> Action | None:
    """The next rotation towards ``target``, or ``None`` when already aligned.

    ``target`` maps offsets to block types; a bare set of offsets ignores
    types. A half turn starts clockwise.
    """
    if isinstance(target, dict):
        turns = fit_turns(b.attachments, target)
    else:
        layout = {c: "" for c in b.attachments}
        turns = fit_turns(layout, {c: "" for c in target})
    if turns is None or len(b.attachments) != len(target):
        raise ShapeMismatch(f"attachments {sorted(b.attachments)} cannot become {sorted(target)}")
    if turns == 0:
        return None
    return Action.rotate("ccw" if turns == 3 else "cw")


# -- evaluation view --------------------------------------------------------------


class View:
    """Derived facts shared by the rules of one decision."""

    def __init__(self, b: BeliefBase, p: Percept, params: ControllerParams):
        self.b = b
        self.p = p
        self.params = params
        self.walls = {off for off, kind in p.terrain.items() if kind == OBSTACLE}
        self.things = {t.offset for t in p.things if t.kind in ("entity", "block")}
        self.body = {(0, 0)} | set(b.attachments)
        self.assignment: Assignment | None = b.assignment

    @cached_property
    def visit_counts(self) -> dict[Cell, int]:
        return self.b.visit_counts()

    def context(self, **kw) -> HeuristicContext:
        base = dict(
            self_pos=self.b.self_pos,
            current_step=self.p.step,
            visited=tuple(self.b.visited),
            visible_obstacles=frozenset(self.b.to_frame(o) for o in self.walls),
            visit_counts=self.visit_counts,
            sentinel=self.params.sentinel,
            literal_safe_exploration=self.params.literal_safe_exploration,
        )
        base.update(kw)
        return HeuristicContext(**base)

    def cell_free(self, off: Cell) -> bool:
        return off not in self.walls and (off not in self.things or off in self.body)

    def blocked(self, no_step: set[Cell] = frozenset()) -> set[str]:
        out = set()
        for d in DIRECTIONS:
            u = UNIT[d]
            if u in no_step or not all(self.cell_free(add(c, u)) for c in self.body):
                out.add(d)
        return out

    def can_rotate(self, rotation: str) -> bool:
        return all(self.cell_free(rotate(c, rotation)) for c in self.b.attachments)

    def move(
        self, variant: str, no_step: set[Cell] = frozenset(), avoid_set: tuple = (), **kw
    ) -> tuple[Action, str] | None:
        """Move by ``variant``; ``no_step`` lists offsets the agent itself must not enter."""
        d = select_direction(self.context(avoid=avoid_set, **kw), variant, self.blocked(no_step))
        return None if d is None else (Action.move(d), variant)

    @cached_property
    def on_goal(self) -> bool:
        return self.p.terrain.get((0, 0)) == GOAL

    @cached_property
    def turns(self) -> int | None:
        return fit_turns(self.b.attachments, dict(self.assignment.required_rotation))

    def _block_at(self, off: Cell, btype: str) -> bool:
        return any(t.kind == "block" and t.detail == btype and t.attached for t in self.p.things_at(off))

    def _mate_at(self, off: Cell) -> bool:
        return any(t.kind == "entity" and t.detail == self.p.team for t in self.p.things_at(off))

    @cached_property
    def full_pattern(self) -> bool:
        a = self.assignment
        if a.is_submitter:
            if not self.on_goal:
                return False
        elif not self._mate_at(a.submitter_offset):
            return False
        own = dict(a.required_rotation)
        for off, btype in a.expected_pattern:
            if off in own:
                if self.b.attachments.get(off) != btype:
                    return False
            elif not self._block_at(off, btype):
                return False
        return True

    @cached_property
    def partial_pattern(self) -> bool:
        a = self.assignment
        if a.is_submitter or not self._mate_at(a.submitter_offset):
            return False
        own = dict(a.required_rotation)
        return any(self._block_at(off, t) for off, t in a.expected_pattern if off not in own)

    def nearest_goal(self) -> Cell | None:
        if not self.b.goal_cells:
            return None
        here = self.b.self_pos
        return min(self.b.goal_cells, key=lambda g: (manhattan(g, here), g[1], g[0]))


Rule = Callable[[View], "tuple[Action, str | None] | None"]


# -- rules with an assignment -------------------------------------------------------


def _detach_unneeded(v: View):
    if v.turns is None:
        return None
    keep = _kept_offsets(v)
    extra = [d for d in DIRECTIONS if UNIT[d] in v.b.attachments and UNIT[d] not in keep]
    if not extra:
        return None
    for d in extra:
        if safe_detach(v.b, v.p, d, v.params.detach_distance):
            return Action.detach(d), None
    return v.move("det")


def _kept_offsets(v: View) -> set[Cell]:
    return {rotate_times(c, -v.turns) for c, _ in v.assignment.required_rotation}


def _rotate(v: View):
    if v.turns in (None, 0):
        return None
    rotation = "ccw" if v.turns == 3 else "cw"
    if v.can_rotate(rotation):
        return Action.rotate(rotation), None
    other = "cw" if rotation == "ccw" else "ccw"
    if v.turns == 2 and v.can_rotate(other):
        return Action.rotate(other), None
    return v.move("exp")


def _wait(v: View):
    a = v.assignment
    if v.full_pattern:
        return None
    if a.is_submitter and v.on_goal:
        better = _better_goal_cell(v)
        if better is not None and not _sees_helpers(v):
            return Action.move(better), "reposition"
        return Action.skip(), None
    if v.partial_pattern:
        return Action.skip(), None
    return None


def _footprint(v: View, origin: Cell) -> int:
    """Visible free cells of the assembled structure with the submitter at ``origin``."""
    score = 0
    for asg in v.b.active_plan.assignments.values():
        cells = [c for c, _ in asg.sub_pattern]
        if not asg.is_submitter:
            cells.append(asg.stand)
        for c in cells:
            off = add(origin, c)
            if manhattan(off) <= v.p.vision_radius and v.cell_free(off):
                score += 1
    return score


def _better_goal_cell(v: View) -> str | None:
    here = _footprint(v, (0, 0))
    blocked = v.blocked()
    best, best_score = None, here
    for d in DIRECTIONS:
        u = UNIT[d]
        if d in blocked or v.p.terrain.get(u) != GOAL:
            continue
        s = _footprint(v, u)
        if s > best_score:
            best, best_score = d, s
    return best


def _sees_helpers(v: View) -> bool:
    own = {c for c, _ in v.assignment.sub_pattern}
    return any(v._block_at(off, t) for off, t in v.assignment.expected_pattern if off not in own)


def _connect(v: View):
    a = v.assignment
    if not v.full_pattern or v.b.connects_done >= len(a.connect_schedule):
        return None
    partner, own_cell, _ = a.connect_schedule[v.b.connects_done]
    return Action.connect(partner, own_cell), None


def _submit(v: View):
    a = v.assignment
    if not v.full_pattern or v.b.connects_done < len(a.connect_schedule):
        return None
    if not a.is_submitter:
        return Action.skip(), None
    since = v.b.full_since if v.b.full_since is not None else v.p.step
    if v.p.step - since < len(v.b.active_plan.connect_order):
        return Action.skip(), None
    return Action.submit(v.b.active_plan.task_name), None


def _waiting_submitter_visible(v: View):
    a = v.assignment
    if a.is_submitter:
        return None
    sub_asg = v.b.active_plan.assignments[v.b.active_plan.submit_agent]
    for mate in v.p.entities(v.p.team):
        if v.p.terrain.get(mate.offset) != GOAL:
            continue
        if all(v._block_at(add(mate.offset, c), t) for c, t in sub_asg.sub_pattern):
            own = dict(a.required_rotation)
            remainder = frozenset((c[0], c[1], t) for c, t in a.expected_pattern if c not in own)
            candidates = tuple((v.b.to_frame(t.offset), t.detail) for t in v.p.blocks()
                               if t.offset not in v.b.attachments)
            return v.move("pat", pattern_remainder=remainder, candidate_blocks=candidates)
    return None


def _submitter_to_goal(v: View):
    if not v.assignment.is_submitter:
        return None
    target = v.nearest_goal()
    return None if target is None else v.move("goto", target=target)


def _helper_to_submitter(v: View):
    a = v.assignment
    if a.is_submitter:
        return None
    sub_pos = v.b.teammates.get(v.b.active_plan.submit_agent)
    if sub_pos is not None:
        target = sub(sub_pos, a.submitter_offset)
        if target != v.b.self_pos:
            return v.move("goto", target=target)
    if v.b.goal_order:
        target = v.b.goal_order[v.b.goal_cursor % len(v.b.goal_order)]
        if target != v.b.self_pos:
            return v.move("goto", target=target)
    return None


def _any_goal(v: View):
    target = v.nearest_goal()
    if target is None or target == v.b.self_pos:
        return None
    return v.move("goto", target=target)


def _explore(v: View):
    return v.move("exp")


# -- rules without an assignment --------------------------------------------------


def _release(v: View):
    if not v.b.release:
        return None
    for d in DIRECTIONS:
        if UNIT[d] in v.b.attachments:
            return Action.detach(d), None
    return None


def _resources(v: View) -> list[tuple[int, int, Cell]]:
    """Usable blocks and dispensers as (rank, distance, offset), best first."""
    p = v.p
    mates = {t.offset for t in p.entities(p.team)}
    out = []
    for t in p.things:
        if t.kind == "block" and not t.attached:
            kind_rank = 0
        elif t.kind == "dispenser" and t.offset not in v.things:
            kind_rank = 1
        else:
            continue
        if any(manhattan(t.offset, m) == 1 for m in mates):
            continue
        dist = manhattan(t.offset)
        rank = kind_rank if dist == 1 else 2
        out.append((rank, dist, reading_key(t.offset), kind_rank, t.offset))
    out.sort()
    return [(r, d, off) for r, d, _, _, off in out]


def _collect(v: View):
    if len(v.b.attachments) >= 4:
        return None
    found = _resources(v)
    if not found:
        return None
    rank, dist, off = found[0]
    dispensers = {t.offset for t in v.p.dispensers()}
    if dist == 1:
        d = DIRECTION_OF[off]
        if rank == 0:
            return Action.attach(d), None
        return Action.request(d), None
    # a straight approach needs the facing side free of our own blocks
    if dist == 2 and (off[0] == 0 or off[1] == 0):
        facing = (off[0] // 2, off[1] // 2)
        if facing in v.b.attachments:
            for rotation in ("cw", "ccw"):
                if v.can_rotate(rotation) and rotate(facing, rotation) != facing:
                    return Action.rotate(rotation), None
            return v.move("exp")
    return v.move("goto", no_step=dispensers, target=v.b.to_frame(off))


def _safe_explore(v: View):
    avoid = [(g, v.params.goal_weight) for g in sorted(v.b.goal_cells, key=reading_key)]
    avoid += [(v.b.to_frame(t.offset), v.params.teammate_weight) for t in v.p.entities(v.p.team)]
    return v.move("s-exp", avoid_set=tuple(avoid))


ASSIGNED_RULES: list[tuple[str, Rule]] = [
    ("1-detach", _detach_unneeded),
    ("2-rotate", _rotate),
    ("3-wait", _wait),
    ("4-connect", _connect),
    ("5-submit", _submit),
    ("6-align", _waiting_submitter_visible),
    ("7-submitter-goal", _submitter_to_goal),
    ("8-find-submitter", _helper_to_submitter),
    ("9-goal", _any_goal),
    ("10-explore", _explore),
]

UNASSIGNED_RULES: list[tuple[str, Rule]] = [
    ("0-release", _release),
    ("11-collect", _collect),
    ("12-safe-explore", _safe_explore),
]


def rules_for(b: BeliefBase) -> list[tuple[str, Rule]]:
    return ASSIGNED_RULES if b.assignment is not None else UNASSIGNED_RULES


def applicable_rules(b: BeliefBase, p: Percept, params: ControllerParams = ControllerParams()) -> list[str]:
    """Every rule that would produce an action in this state, in priority order."""
    v = View(b, p, params)
    return [rid for rid, fn in rules_for(b) if fn(v) is not None]


def decide(
    b: BeliefBase, p: Percept, params: ControllerParams = ControllerParams()
) -> tuple[Action, DecisionTrace]:
    v = View(b, p, params)
    for rid, fn in rules_for(b):
        out = fn(v)
        if out is not None:
            action, variant = out
            return action, DecisionTrace(p.step, rid, action, variant)
    action = Action.skip()
    return action, DecisionTrace(p.step, "skip", action)
