"""One agent's step: fold the percept and inbox into beliefs, decide, talk.

The runner calls :meth:`TeamAgent.step` once per step with the agent's
percept and delivered messages and gets back an action, the decision trace
and the messages to post.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable

from .beliefs import (
    BeliefBase,
    apply_percept,
    apply_teammate_move,
    clear_visited,
    integrate_shared,
    record_move,
    sync_attachments,
)
from .comms import (
    BROADCAST,
    HandshakeOffer,
    Message,
    Moved,
    PlanAbort,
    PlanAssign,
    SharedKnowledge,
    make_offers,
    match_offers,
    on_confirmed,
    report_attachments,
)
from .controller import ControllerParams, DecisionTrace, View, decide
from .geometry import add, agent_sort_key
from .planner import Planner, fit_turns
from .world import Action, ActionResult, Percept

Post = tuple[str, Any]

_CLEAR_ON = {"attach": "attached", "detach": "detached", "request": "requested"}


@dataclass
class TeamAgent:
    agent: str
    planner_id: str
    params: ControllerParams = field(default_factory=ControllerParams)
    min_steps: int = 80
    check_digest: bool = True
    beliefs: BeliefBase = field(init=False)
    planner: Planner | None = field(init=False, default=None)
    # partner -> step of the observation behind the last confirmed encounter
    last_confirmed: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.beliefs = BeliefBase(agent=self.agent)
        if self.agent == self.planner_id:
            self.planner = Planner(min_steps=self.min_steps)

    def step(self, p: Percept, inbox: Iterable[Message]) -> tuple[Action, DecisionTrace, list[Post]]:
        b = self.beliefs
        inbox = list(inbox)
        posts: list[Post] = []
        moved = self._own_action(p)
        apply_percept(b, p)
        if p.last_action is not None and p.last_result is ActionResult.SUCCESS:
            trigger = _CLEAR_ON.get(p.last_action.name)
            if trigger:
                clear_visited(b, trigger)
        if b.release and not b.attachments:
            b.release = False

        posts += self._read_inbox(p, inbox)
        posts += self._plan_upkeep(p)
        if self.planner is not None:
            for recipient, body in self.planner.step(p, inbox):
                posts.append((recipient, body))
                if recipient == BROADCAST:
                    self._on_abort(body)

        action, trace = decide(b, p, self.params)

        offers = make_offers(p)
        b.offers = {off: (dig, b.self_pos) for off, dig in offers.items()}
        b.offers_step = p.step
        for off in sorted(offers):
            posts.append((BROADCAST, HandshakeOffer(offers[off], off)))
        if moved is not None:
            posts.append((BROADCAST, Moved(moved)))
        report = report_attachments(b)
        if report is not None:
            posts.append((self.planner_id, report))
        return action, trace, posts

    # -- pieces -----------------------------------------------------------------

    def _own_action(self, p: Percept) -> str | None:
        b = self.beliefs
        act, res = p.last_action, p.last_result
        if act is None:
            return None
        if act.name == "move":
            record_move(b, act.args[0], res)
        sync_attachments(b, act, res)
        if act.name == "connect" and res is ActionResult.SUCCESS:
            b.connects_done += 1
        if act.name == "move" and res is ActionResult.SUCCESS:
            return act.args[0]
        return None

    def _read_inbox(self, p: Percept, inbox: list[Message]) -> list[Post]:
        b = self.beliefs
        posts: list[Post] = []
        for m in inbox:
            if isinstance(m.body, SharedKnowledge) and m.sender in b.encounters:
                offset, here, _ = b.encounters[m.sender]
                integrate_shared(b, m.body, offset, here)
        for m in inbox:
            if isinstance(m.body, Moved):
                apply_teammate_move(b, m.sender, m.body.direction)

        if b.offers_step == p.step - 1 and b.offers:
            digests = {off: dig for off, (dig, _) in b.offers.items()}
            found = match_offers(digests, inbox, self.check_digest)
            for mate in sorted(found, key=agent_sort_key):
                off = found[mate]
                here = b.offers[off][1]
                seen = b.offers_step
                b.teammates[mate] = add(here, off)
                b.encounters[mate] = (off, here, seen)
                if self.last_confirmed.get(mate) != seen - 1:
                    posts.append((mate, on_confirmed(b, here)))
                self.last_confirmed[mate] = seen

        for m in inbox:
            if isinstance(m.body, PlanAbort) and m.recipient == BROADCAST:
                self._on_abort(m.body)
        for m in inbox:
            if isinstance(m.body, PlanAssign) and self.agent in m.body.plan.assignments:
                b.drop_plan()
                b.active_plan = m.body.plan
                b.goal_cursor = 0
        return posts

    def _on_abort(self, abort: PlanAbort) -> None:
        b = self.beliefs
        if b.active_plan is not None and b.active_plan.plan_id == abort.plan_id:
            b.drop_plan()
        if abort.reason == "completed":
            clear_visited(b, "taskSubmitted")

    def _plan_upkeep(self, p: Percept) -> list[Post]:
        b = self.beliefs
        plan = b.active_plan
        if plan is None:
            return []
        if p.disabled:
            b.drop_plan()
            return [(self.planner_id, PlanAbort(plan.plan_id, "disabled"))]
        if p.task(plan.task_name) is None:
            b.drop_plan()
            return []
        asg = b.assignment
        if fit_turns(b.attachments, dict(asg.required_rotation)) is None:
            b.drop_plan()
            return [(self.planner_id, PlanAbort(plan.plan_id, "mismatch"))]
        full = View(b, p, self.params).full_pattern
        if full and b.full_since is None:
            b.full_since = p.step
        elif not full and b.connects_done == 0:
            b.full_since = None
        if b.goal_order and b.goal_order[b.goal_cursor % len(b.goal_order)] == b.self_pos:
            b.goal_cursor += 1
        return []


class IdleAgent:
    """An opponent that always skips."""

    def __init__(self, agent: str):
        self.agent = agent

    def step(self, p: Percept, inbox: Iterable[Message]) -> tuple[Action, DecisionTrace, list[Post]]:
        action = Action.skip()
        return action, DecisionTrace(p.step, "idle", action), []
