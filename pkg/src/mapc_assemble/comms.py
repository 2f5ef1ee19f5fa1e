"""Team messaging: a one-step-delayed mailbox and the encounter handshake.

Agents never see teammates' names in their percepts. Two teammates that see
each other each broadcast a :class:`HandshakeOffer` carrying the offset at
which they saw a teammate and a digest of the region both of them can see.
On the next step every agent matches the offers it receives against the ones
it sent; agreement on offset and digest identifies the partner.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Iterable, Mapping

from .errors import ContractViolation
from .geometry import Cell, agent_sort_key, manhattan, neg
from .world import Percept

if TYPE_CHECKING:
    from .beliefs import BeliefBase
    from .planner import TaskPlan

BROADCAST = "*"

# (doubled x from midpoint, doubled y from midpoint, kind, detail, attached)
DigestEntry = tuple[int, int, str, str, bool]
VisionDigest = tuple[DigestEntry, ...]


@dataclass(frozen=True)
class HandshakeOffer:
    digest: VisionDigest
    partner_offset: Cell


@dataclass(frozen=True)
class SharedKnowledge:
    goal_cells: tuple[Cell, ...]
    teammates: tuple[tuple[str, Cell], ...]
    partner_self_pos: Cell


@dataclass(frozen=True)
class Moved:
    direction: str


@dataclass(frozen=True)
class AttachReport:
    attachments: tuple[tuple[Cell, str], ...]


@dataclass(frozen=True)
class PlanAssign:
    plan: TaskPlan


@dataclass(frozen=True)
class PlanAbort:
    plan_id: str
    reason: str


@dataclass(frozen=True)
class Message:
    sender: str
    recipient: str
    sent_step: int
    seq: int
    body: Any

    @property
    def kind(self) -> str:
        return type(self.body).__name__


class Mailbox:
    """Holds messages until the step after they were posted.

    ``rosters`` maps team name to member ids and is used to expand
    :data:`BROADCAST` recipients to every teammate except the sender.
    """

    def __init__(self, rosters: Mapping[str, Iterable[str]]):
        self.rosters = {team: sorted(members, key=agent_sort_key) for team, members in rosters.items()}
        self.team_of = {m: team for team, members in self.rosters.items() for m in members}
        self.pending: list[Message] = []
        self._seq = 0

    def post(self, sender: str, recipient: str, body: Any, step: int) -> Message:
        if sender not in self.team_of:
            raise ContractViolation(f"unknown sender {sender!r}")
        if recipient != BROADCAST and recipient not in self.team_of:
            raise ContractViolation(f"unknown recipient {recipient!r}")
        msg = Message(sender, recipient, step, self._seq, body)
        self._seq += 1
        self.pending.append(msg)
        return msg

    def recipients(self, msg: Message) -> list[str]:
        if msg.recipient != BROADCAST:
            return [msg.recipient]
        return [m for m in self.rosters[self.team_of[msg.sender]] if m != msg.sender]


def advance_mailbox(box: Mailbox, current_step: int) -> dict[str, list[Message]]:
    """Deliver everything posted during ``current_step - 1``.

    Messages posted during ``current_step`` stay queued. Each recipient's list
    is ordered by sender id, then posting order.
    """
    due = [m for m in box.pending if m.sent_step == current_step - 1]
    box.pending = [m for m in box.pending if m.sent_step >= current_step]
    due.sort(key=lambda m: (agent_sort_key(m.sender), m.seq))
    out: dict[str, list[Message]] = defaultdict(list)
    for msg in due:
        for r in box.recipients(msg):
            out[r].append(msg)
    return dict(sorted(out.items(), key=lambda kv: agent_sort_key(kv[0])))


# -- handshake -------------------------------------------------------------------


def vision_digest(p: Percept, candidate_offset: Cell) -> VisionDigest:
    """Canonical description of what both the observer and the candidate see.

    Coordinates are doubled and taken from the midpoint of the two agents so
    that both sides of a true encounter compute identical digests.
    """
    cx, cy = candidate_offset
    if not any(t.kind == "entity" and t.detail == p.team and t.offset == candidate_offset
               for t in p.things):
        raise ContractViolation(f"no teammate at {candidate_offset}")
    r = p.vision_radius

    def shared(off: Cell) -> bool:
        return manhattan(off) <= r and manhattan(off, candidate_offset) <= r

    entries: list[DigestEntry] = []
    for off, kind in p.terrain.items():
        if shared(off):
            entries.append((2 * off[0] - cx, 2 * off[1] - cy, kind, "", False))
    for t in p.things:
        if t.kind == "entity" and t.offset == candidate_offset:
            continue
        if shared(t.offset):
            entries.append((2 * t.offset[0] - cx, 2 * t.offset[1] - cy, t.kind, t.detail, t.attached))
    return tuple(sorted(entries))


def confirm_encounter(
    mine: VisionDigest, theirs: VisionDigest, my_offset_to_them: Cell, their_offset_to_me: Cell
) -> bool:
    return my_offset_to_them == neg(their_offset_to_me) and mine == theirs


def make_offers(p: Percept) -> dict[Cell, VisionDigest]:
    """One offer per visible teammate, keyed by its offset."""
    return {t.offset: vision_digest(p, t.offset) for t in p.entities(p.team)}


def match_offers(
    my_offers: Mapping[Cell, VisionDigest],
    received: Iterable[Message],
    check_digest: bool = True,
) -> dict[str, Cell]:
    """Identify partners for the offers this agent sent last step.

    With ``check_digest`` an offset is confirmed only when exactly one
    received offer agrees on both offset and digest. Without it the first
    offer with a consistent offset wins, which is the naive scheme that
    confuses pairs standing in identical surroundings.
    """
    offers = [m for m in received if isinstance(m.body, HandshakeOffer)]
    found: dict[str, Cell] = {}
    if not check_digest:
        for off in sorted(my_offers):
            for m in offers:
                if m.body.partner_offset == neg(off) and m.sender not in found:
                    found[m.sender] = off
                    break
        return found
    claimed: dict[str, list[Cell]] = defaultdict(list)
    for off in sorted(my_offers):
        hits = {m.sender for m in offers
                if confirm_encounter(my_offers[off], m.body.digest, off, m.body.partner_offset)}
        if len(hits) == 1:
            claimed[hits.pop()].append(off)
    for sender in sorted(claimed, key=agent_sort_key):
        if len(claimed[sender]) == 1:
            found[sender] = claimed[sender][0]
    return found


def on_confirmed(b: BeliefBase, self_pos_at_encounter: Cell | None = None) -> SharedKnowledge:
    pos = b.self_pos if self_pos_at_encounter is None else self_pos_at_encounter
    return SharedKnowledge(
        goal_cells=tuple(sorted(b.goal_cells)),
        teammates=tuple(sorted(b.teammates.items(), key=lambda kv: agent_sort_key(kv[0]))),
        partner_self_pos=pos,
    )


def report_attachments(b: BeliefBase) -> AttachReport | None:
    if b.active_plan is not None:
        return None
    return AttachReport(tuple(sorted(b.attachments.items())))
