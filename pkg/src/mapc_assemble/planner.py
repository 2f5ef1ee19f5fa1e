"""Central task planning for one team.

The lowest-id agent of a team doubles as the planning agent. Every agent
without a plan reports its attached blocks each step; the planner collects
those reports, picks the cheapest task it can build, splits the pattern
among agents and tells each of them where to stand, how to hold its blocks
and which connections to make. Only one plan is active at a time.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .comms import BROADCAST, AttachReport, Message, PlanAbort, PlanAssign
from .errors import ContractViolation
from .geometry import Cell, adjacent, agent_sort_key, manhattan, neighbours, reading_key, rotate_times, sub
from .world import Percept, Task

# agent id -> attached blocks as (offset from the agent, block type)
Layout = tuple[tuple[Cell, str], ...]
Inventory = dict[str, Layout]

# clockwise quarter turns, in order of preference (none, cw, ccw, half)
TURN_PREFERENCE = (0, 1, 3, 2)


@dataclass(frozen=True)
class Assignment:
    """One agent's share of a plan.

    ``sub_pattern`` and ``stand`` are relative to the submitter;
    ``required_rotation`` and the cells in ``connect_schedule`` and
    ``expected_pattern`` are relative to this agent's own final position.
    """

    sub_pattern: tuple[tuple[Cell, str], ...]
    stand: Cell
    required_rotation: tuple[tuple[Cell, str], ...]
    connect_schedule: tuple[tuple[str, Cell, Cell], ...]
    expected_pattern: tuple[tuple[Cell, str], ...]
    submitter_offset: Cell

    @property
    def is_submitter(self) -> bool:
        return self.stand == (0, 0)


@dataclass(frozen=True)
class TaskPlan:
    task_name: str
    deadline: int
    reward: int
    assignments: Mapping[str, Assignment]
    submit_agent: str
    created_step: int
    # (agent, partner, agent cell, partner cell) in pattern coordinates
    connect_order: tuple[tuple[str, str, Cell, Cell], ...] = ()

    @property
    def plan_id(self) -> str:
        return f"{self.task_name}@{self.created_step}"

    def __post_init__(self) -> None:
        if self.submit_agent not in self.assignments:
            raise ContractViolation("submit agent has no assignment")

    def to_json(self) -> dict:
        return {
            "task": self.task_name,
            "deadline": self.deadline,
            "submit_agent": self.submit_agent,
            "created_step": self.created_step,
            "assignments": {
                a: [[c[0], c[1], t] for c, t in asg.sub_pattern]
                for a, asg in sorted(self.assignments.items(), key=lambda kv: agent_sort_key(kv[0]))
            },
        }


def layout_types(layout: Iterable[tuple[Cell, str]]) -> Counter:
    return Counter(t for _, t in layout)


def fit_turns(layout: Mapping[Cell, str], required: Mapping[Cell, str]) -> int | None:
    """Fewest clockwise quarter turns after which ``layout`` covers ``required``.

    Covering means every required cell holds a block of the required type
    once the layout is rotated; extra blocks are ignored. Returns ``None``
    when no rotation works.
    """
    for turns in TURN_PREFERENCE:
        if all(layout.get(rotate_times(c, -turns)) == t for c, t in required.items()):
            return turns
    return None


# -- report aggregation and task selection ----------------------------------------


def aggregate_reports(
    reports: Iterable[Message | tuple[str, AttachReport]], busy: Iterable[str] = ()
) -> Inventory:
    """Collect the latest report from every agent not in ``busy``.

    Agents reporting no blocks are kept; they simply cover nothing.
    """
    busy = set(busy)
    inv: Inventory = {}
    for r in reports:
        sender, body = (r.sender, r.body) if isinstance(r, Message) else r
        if not isinstance(body, AttachReport) or sender in busy:
            continue
        inv[sender] = tuple(sorted(body.attachments, key=lambda e: reading_key(e[0])))
    return dict(sorted(inv.items(), key=lambda kv: agent_sort_key(kv[0])))


def covers_types(inv: Inventory, task: Task) -> bool:
    have: Counter = Counter()
    for layout in inv.values():
        have.update(layout_types(layout))
    need = layout_types(task.pattern)
    return all(have[t] >= n for t, n in need.items())


def feasible_tasks(inv: Inventory, tasks: Iterable[Task], step: int, min_steps: int) -> list[Task]:
    """Tasks with enough time left that the inventory can actually build.

    Beyond the type count this also requires a concrete assignment in which
    every agent can hold its share and reach a free standing cell.
    """
    if min_steps < 0:
        raise ContractViolation("min_steps must be >= 0")
    out = []
    for task in tasks:
        if task.deadline - step < min_steps or not covers_types(inv, task):
            continue
        if _search_plan(task, inv, step) is not None:
            out.append(task)
    return out


def select_task(feasible: Iterable[Task]) -> Task | None:
    """Lowest reward first, then smallest name. ``None`` means no plan."""
    feasible = list(feasible)
    if not feasible:
        return None
    return min(feasible, key=lambda t: (t.reward, t.name))


# -- plan construction ----------------------------------------------------------


def build_plan(task: Task, inv: Inventory, step: int) -> TaskPlan:
    plan = _search_plan(task, inv, step)
    if plan is None:
        raise ContractViolation(f"task {task.name} cannot be built from this inventory")
    return plan


def _search_plan(task: Task, inv: Inventory, step: int) -> TaskPlan | None:
    pattern = dict(task.pattern)
    cells = sorted(pattern, key=lambda c: (manhattan(c), c[1], c[0]))
    layouts = {a: dict(lay) for a, lay in inv.items() if lay}
    agents = sorted(layouts, key=agent_sort_key)
    owner: dict[Cell, str] = {}
    groups: dict[str, list[Cell]] = {}

    def can_take(agent: str, cell: Cell) -> bool:
        mine = groups.get(agent, []) + [cell]
        need = Counter(pattern[c] for c in mine)
        have = layout_types(layouts[agent].items())
        if any(have[t] < n for t, n in need.items()):
            return False
        if agent == owner.get(cells[0], agent):
            return all(manhattan(c) == 1 for c in mine)
        return bool(_stand_candidates(mine, pattern))

    def dfs(i: int) -> TaskPlan | None:
        if i == len(cells):
            return _finalize(task, pattern, layouts, owner, groups, step)
        cell = cells[i]
        for agent in agents:
            if not can_take(agent, cell):
                continue
            owner[cell] = agent
            groups.setdefault(agent, []).append(cell)
            found = dfs(i + 1)
            if found is not None:
                return found
            groups[agent].pop()
            if not groups[agent]:
                del groups[agent]
            del owner[cell]
        return None

    return dfs(0)


def _stand_candidates(mine: Iterable[Cell], pattern: Mapping[Cell, str]) -> list[Cell]:
    mine = list(mine)
    common = set(neighbours(mine[0]))
    for c in mine[1:]:
        common &= set(neighbours(c))
    return [q for q in common if q not in pattern and q != (0, 0)]


def _finalize(
    task: Task,
    pattern: Mapping[Cell, str],
    layouts: Mapping[str, dict[Cell, str]],
    owner: Mapping[Cell, str],
    groups: Mapping[str, list[Cell]],
    step: int,
) -> TaskPlan | None:
    first = min(pattern, key=lambda c: (manhattan(c), c[1], c[0]))
    submitter = owner[first]
    members = sorted(groups, key=agent_sort_key)

    def shape(agent: str, q: Cell) -> dict[Cell, str]:
        return {sub(c, q): pattern[c] for c in groups[agent]}

    if fit_turns(layouts[submitter], shape(submitter, (0, 0))) is None:
        return None
    stands: dict[str, Cell] = {submitter: (0, 0)}
    others = [a for a in members if a != submitter]

    def options(agent: str) -> list[Cell]:
        scored = []
        for q in _stand_candidates(groups[agent], pattern):
            turns = fit_turns(layouts[agent], shape(agent, q))
            if turns is not None:
                scored.append((TURN_PREFERENCE.index(turns), -manhattan(q), q[1], q[0], q))
        return [s[-1] for s in sorted(scored)]

    def place(i: int) -> bool:
        if i == len(others):
            return True
        agent = others[i]
        for q in options(agent):
            if q in stands.values():
                continue
            stands[agent] = q
            if place(i + 1):
                return True
            del stands[agent]
        return False

    if not place(0):
        return None

    order = _connect_order(submitter, members, groups, owner)
    if order is None:
        return None

    schedules: dict[str, list[tuple[str, Cell, Cell]]] = {a: [] for a in members}
    for a, b, ca, cb in order:
        schedules[a].append((b, sub(ca, stands[a]), sub(cb, stands[a])))
        schedules[b].append((a, sub(cb, stands[b]), sub(ca, stands[b])))

    assignments = {}
    for a in members:
        q = stands[a]
        assignments[a] = Assignment(
            sub_pattern=tuple(sorted(((c, pattern[c]) for c in groups[a]), key=lambda e: reading_key(e[0]))),
            stand=q,
            required_rotation=tuple(sorted(shape(a, q).items(), key=lambda e: reading_key(e[0]))),
            connect_schedule=tuple(schedules[a]),
            expected_pattern=tuple(sorted(((sub(c, q), t) for c, t in pattern.items()),
                                          key=lambda e: reading_key(e[0]))),
            submitter_offset=sub((0, 0), q),
        )
    return TaskPlan(
        task_name=task.name,
        deadline=task.deadline,
        reward=task.reward,
        assignments=assignments,
        submit_agent=submitter,
        created_step=step,
        connect_order=tuple(order),
    )


def _connect_order(
    submitter: str,
    members: list[str],
    groups: Mapping[str, list[Cell]],
    owner: Mapping[Cell, str],
) -> list[tuple[str, str, Cell, Cell]] | None:
    """Grow the submitter's structure one agent at a time.

    Each step joins the lowest-id agent that has a pattern cell next to the
    structure built so far, so every connect extends a component that
    already contains the submitter.
    """
    joined = {submitter}
    built = set(groups[submitter])
    order = []
    while len(joined) < len(members):
        for a in members:
            if a in joined:
                continue
            pairs = [(ca, cb) for ca in groups[a] for cb in built if adjacent(ca, cb)]
            if pairs:
                ca, cb = min(pairs, key=lambda p: (reading_key(p[0]), reading_key(p[1])))
                order.append((a, owner[cb], ca, cb))
                joined.add(a)
                built |= set(groups[a])
                break
        else:
            return None
    return order


# -- monitoring -----------------------------------------------------------------


@dataclass(frozen=True)
class PlanEvents:
    """What the planning agent learned about its plan this step."""

    step: int
    disabled: frozenset[str] = frozenset()
    mismatched: frozenset[str] = frozenset()
    task_present: bool = True
    completed: bool = False


def monitor_plan(plan: TaskPlan, events: PlanEvents) -> PlanAbort | None:
    reason = None
    if events.completed:
        reason = "completed"
    elif events.disabled & set(plan.assignments):
        reason = "disabled"
    elif events.step > plan.deadline:
        reason = "deadline"
    elif events.mismatched & set(plan.assignments):
        reason = "mismatch"
    elif not events.task_present:
        reason = "task_gone"
    return None if reason is None else PlanAbort(plan.plan_id, reason)


@dataclass
class Planner:
    """Planning state owned by the team's planning agent."""

    min_steps: int = 80
    active: TaskPlan | None = None
    last_score: int | None = None
    history: list[tuple[str, str]] = field(default_factory=list)

    def step(self, percept: Percept, inbox: Iterable[Message]) -> list[tuple[str, object]]:
        """Process this step's reports and return ``(recipient, body)`` posts."""
        inbox = list(inbox)
        out: list[tuple[str, object]] = []
        if self.active is not None:
            plan = self.active
            notes = [(m.sender, m.body.reason) for m in inbox
                     if isinstance(m.body, PlanAbort) and m.body.plan_id == plan.plan_id]
            present = percept.task(plan.task_name) is not None
            gained = percept.score - (self.last_score if self.last_score is not None else percept.score)
            events = PlanEvents(
                step=percept.step,
                disabled=frozenset(s for s, r in notes if r == "disabled"),
                mismatched=frozenset(s for s, r in notes if r == "mismatch"),
                task_present=present,
                completed=not present and gained >= plan.reward,
            )
            abort = monitor_plan(plan, events)
            if abort is not None:
                out.append((BROADCAST, abort))
                self.history.append((plan.plan_id, abort.reason))
                self.active = None
        self.last_score = percept.score
        if self.active is None:
            inv = aggregate_reports(inbox)
            task = select_task(feasible_tasks(inv, percept.tasks, percept.step, self.min_steps))
            if task is not None:
                self.active = build_plan(task, inv, percept.step)
                for agent in sorted(self.active.assignments, key=agent_sort_key):
                    out.append((agent, PlanAssign(self.active)))
        return out
