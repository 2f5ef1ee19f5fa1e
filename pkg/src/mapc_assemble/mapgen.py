"""Map text: a handcrafted smoke map and a seeded random generator."""

from __future__ import annotations

import random

from .errors import ConfigError
from .geometry import diamond

SMOKE_MAP = """\
................
................
..A..........A..
................
................
......#.........
................
.......ggg......
.......ggg......
.......ggg......
................
...0............
................
..A..........A..
................
................
"""


def generate_map(
    width: int,
    height: int,
    seed: int,
    agents_per_team: int,
    obstacle_density: float = 0.1,
    goal_areas: int = 3,
    dispensers: int = 4,
    block_types: int = 3,
) -> str:
    """Random map with round goal areas, dispensers and spawns for teams A and B."""
    if width < 5 or height < 5:
        raise ConfigError("generated maps must be at least 5x5")
    if not 0.0 <= obstacle_density < 1.0:
        raise ConfigError("obstacle_density must be in [0, 1)")
    if not 1 <= block_types <= 5:
        raise ConfigError("block_types must be between 1 and 5")
    rng = random.Random(f"map:{seed}:{width}x{height}")
    grid = [["."] * width for _ in range(height)]
    cells = [(x, y) for y in range(height) for x in range(width)]
    for x, y in cells:
        if rng.random() < obstacle_density:
            grid[y][x] = "#"
    for _ in range(goal_areas):
        cx, cy = rng.randrange(1, width - 1), rng.randrange(1, height - 1)
        for x, y in diamond((cx, cy), 1):
            grid[y][x] = "g"
    free = [(x, y) for x, y in cells if grid[y][x] == "."]
    rng.shuffle(free)
    need = dispensers + 2 * agents_per_team
    if len(free) < need:
        raise ConfigError("map too crowded for the requested dispensers and agents")
    for i in range(dispensers):
        x, y = free.pop()
        grid[y][x] = str(i % block_types)
    for team in ("A", "B"):
        for _ in range(agents_per_team):
            x, y = free.pop()
            grid[y][x] = team
    return "\n".join("".join(row) for row in grid) + "\n"
