"""Direction evaluation functions for agent movement.

Agents never plan routes. Each step they score the four directions with one
of five evaluation functions and take the best; ties are broken by the
current step. Scores are exact (integers or :class:`~fractions.Fraction`) so
that equal values compare equal on every platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping

from .beliefs import VisitedEntry
from .errors import ContractViolation
from .geometry import DIRECTIONS, UNIT, Cell, add, manhattan

EXPLORATION_CUTOFF = 30

Score = Fraction | int


@dataclass(frozen=True)
class HeuristicContext:
    self_pos: Cell = (0, 0)
    current_step: int = 0
    visited: tuple[VisitedEntry, ...] = ()
    visible_obstacles: frozenset[Cell] = frozenset()
    # (position, weight) pairs to move away from
    avoid: tuple[tuple[Cell, int], ...] = ()
    target: Cell | None = None
    # (x, y, block type) relative to the agent's final position
    pattern_remainder: frozenset[tuple[int, int, str]] = frozenset()
    candidate_blocks: tuple[tuple[Cell, str], ...] = ()
    visit_counts: Mapping[Cell, int] = field(default_factory=dict)
    sentinel: int = 80
    literal_safe_exploration: bool = False


@dataclass(frozen=True)
class DirectionScore:
    direction: str
    value: Score
    sense: str


def _after(ctx: HeuristicContext, d: str) -> Cell:
    return add(ctx.self_pos, UNIT[d])


def _exact_sum(terms: Iterable[tuple[int, int]]) -> Fraction:
    """Sum of ``num / den`` over a shared denominator."""
    terms = list(terms)
    if not terms:
        return Fraction(0)
    den = math.lcm(*{d for _, d in terms})
    return Fraction(sum(n * (den // d) for n, d in terms), den)


def h_exploration(ctx: HeuristicContext, d: str) -> Fraction:
    p = _after(ctx, d)
    terms = []
    for e in ctx.visited:
        ds = ctx.current_step - e.step
        if ds <= 0:
            continue
        dist = manhattan(e.pos, p)
        if 0 < dist <= EXPLORATION_CUTOFF:
            terms.append((dist, ds * ds))
    return _exact_sum(terms)


def h_safe_exploration(ctx: HeuristicContext, d: str) -> Fraction:
    ref = ctx.self_pos if ctx.literal_safe_exploration else _after(ctx, d)
    spread = sum(c * manhattan(pos, ref) for pos, c in ctx.avoid)
    return h_exploration(ctx, d) + spread


def h_goto(ctx: HeuristicContext, d: str) -> int:
    if ctx.target is None:
        raise ContractViolation("go-to heuristic needs a target")
    p = _after(ctx, d)
    return manhattan(ctx.target, p) + ctx.visit_counts.get(p, 0)


def h_task_pattern(ctx: HeuristicContext, d: str) -> int:
    p = _after(ctx, d)
    total = ctx.visit_counts.get(p, 0)
    for x, y, btype in ctx.pattern_remainder:
        want = (p[0] + x, p[1] + y)
        dists = [manhattan(pos, want) for pos, t in ctx.candidate_blocks if t == btype]
        total += min(dists) if dists else ctx.sentinel
    return total


def h_detach(ctx: HeuristicContext, d: str) -> Fraction:
    p = _after(ctx, d)
    return h_exploration(ctx, d) + sum(manhattan(o, p) for o in ctx.visible_obstacles)


HIGHER, LOWER = "higherBetter", "lowerBetter"

VARIANTS: dict[str, tuple[Callable[[HeuristicContext, str], Score], str]] = {
    "exp": (h_exploration, HIGHER),
    "s-exp": (h_safe_exploration, HIGHER),
    "goto": (h_goto, LOWER),
    "pat": (h_task_pattern, LOWER),
    "det": (h_detach, HIGHER),
}


def score_directions(
    ctx: HeuristicContext, variant: str, blocked: Iterable[str] = ()
) -> list[DirectionScore]:
    fn, sense = VARIANTS[variant]
    blocked = set(blocked)
    return [DirectionScore(d, fn(ctx, d), sense) for d in DIRECTIONS if d not in blocked]


def select_direction(
    ctx: HeuristicContext, variant: str, blocked: Iterable[str] = ()
) -> str | None:
    """Best unblocked direction, or ``None`` if every direction is blocked.

    Ties are listed in N, E, S, W order and resolved by the index
    ``current_step mod number_of_ties``.
    """
    scores = score_directions(ctx, variant, blocked)
    if not scores:
        return None
    pick = max if scores[0].sense == HIGHER else min
    best = pick(s.value for s in scores)
    ties = [s.direction for s in scores if s.value == best]
    return ties[ctx.current_step % len(ties)]

