"""Command line entry point: ``mapc-assemble run --config <path> ...``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigError, ContractViolation
from .runner import OPPONENTS, parse_config, run_match, write_replay, write_stats

EXIT_OK, EXIT_CONFIG, EXIT_CONTRACT = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mapc-assemble", description="Run seeded Agents Assemble matches.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="play one match")
    run.add_argument("--config", required=True, help="key=value match configuration")
    run.add_argument("--seed", type=int)
    run.add_argument("--steps", type=int)
    run.add_argument("--map", dest="map_path", help="map text file (overrides the config)")
    run.add_argument("--out", default="stats.txt", help="statistics table path")
    run.add_argument("--replay", help="replay log path")
    run.add_argument("--opponent", choices=OPPONENTS)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        path = Path(args.config)
        text = path.read_text()
        map_path = str(Path(args.map_path).resolve()) if args.map_path else None
        cfg = parse_config(text, base_dir=path.parent, seed=args.seed, steps=args.steps,
                           map_path=map_path, opponent=args.opponent)
        if map_path is not None:
            cfg.resolve_map()
    except (OSError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        stats, log = run_match(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    write_stats(stats, args.out)
    if args.replay:
        write_replay(log, args.replay)
    row = stats.rows[-1]
    print(f"step {row[0]}: score A={row[1]} B={row[2]}, tasks A={row[7]} B={row[8]}, clear events {row[9]}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
