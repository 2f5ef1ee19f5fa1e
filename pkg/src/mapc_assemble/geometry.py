"""Grid geometry shared by the simulator and the agents.

Cells are ``(x, y)`` integer tuples. The origin is the top-left corner and
north decreases ``y``.
"""

from __future__ import annotations

from typing import Iterable, Iterator

Cell = tuple[int, int]

# Canonical order, also used for tie-breaking.
DIRECTIONS: tuple[str, ...] = ("n", "e", "s", "w")

UNIT: dict[str, Cell] = {
    "n": (0, -1),
    "e": (1, 0),
    "s": (0, 1),
    "w": (-1, 0),
}

DIRECTION_OF: dict[Cell, str] = {v: k for k, v in UNIT.items()}

ROTATIONS: tuple[str, ...] = ("cw", "ccw")


def add(a: Cell, b: Cell) -> Cell:
    return (a[0] + b[0], a[1] + b[1])


def sub(a: Cell, b: Cell) -> Cell:
    return (a[0] - b[0], a[1] - b[1])


def neg(a: Cell) -> Cell:
    return (-a[0], -a[1])


def manhattan(a: Cell, b: Cell = (0, 0)) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def step(cell: Cell, direction: str) -> Cell:
    return add(cell, UNIT[direction])


def rotate_cw(cell: Cell) -> Cell:
    """Quarter turn clockwise about the origin (screen coordinates)."""
    x, y = cell
    return (-y, x)


def rotate_ccw(cell: Cell) -> Cell:
    x, y = cell
    return (y, -x)


def rotate(cell: Cell, rotation: str) -> Cell:
    if rotation == "cw":
        return rotate_cw(cell)
    if rotation == "ccw":
        return rotate_ccw(cell)
    raise ValueError(f"unknown rotation {rotation!r}")


def rotate_times(cell: Cell, quarter_turns: int) -> Cell:
    """Apply ``quarter_turns`` clockwise turns (taken mod 4)."""
    for _ in range(quarter_turns % 4):
        cell = rotate_cw(cell)
    return cell


def neighbours(cell: Cell) -> Iterator[Cell]:
    for d in DIRECTIONS:
        yield step(cell, d)


def adjacent(a: Cell, b: Cell) -> bool:
    return manhattan(a, b) == 1


def diamond(center: Cell, radius: int) -> Iterator[Cell]:
    """Cells within Manhattan ``radius`` of ``center`` in reading order."""
    cx, cy = center
    for dy in range(-radius, radius + 1):
        span = radius - abs(dy)
        for dx in range(-span, span + 1):
            yield (cx + dx, cy + dy)


def reading_key(cell: Cell) -> tuple[int, int]:
    return (cell[1], cell[0])


def is_connected_to_origin(cells: Iterable[Cell]) -> bool:
    """True if every cell is 4-connected to ``(0, 0)`` through ``cells``."""
    remaining = set(cells)
    if (0, 0) in remaining:
        return False
    frontier = [(0, 0)]
    seen = {(0, 0)}
    while frontier:
        cur = frontier.pop()
        for nb in neighbours(cur):
            if nb in remaining and nb not in seen:
                seen.add(nb)
                frontier.append(nb)
    return remaining <= seen


def agent_sort_key(agent_id: str) -> tuple[str, int, str]:
    """Natural ordering for ids such as ``A2`` < ``A10``."""
    head = agent_id.rstrip("0123456789")
    tail = agent_id[len(head):]
    return (head, int(tail) if tail else -1, agent_id)
