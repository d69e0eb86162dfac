"""``dialpolicy`` command line.

Log verbosity comes from the ``DIALPOLICY_LOG`` environment variable
(``DEBUG``, ``INFO``, ``WARNING``...).  Failures exit nonzero with a one-line
JSON error on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import ConfigError, ExperimentConfig
from .experiments import COMMANDS

EXIT_CONFIG, EXIT_RUNTIME = 2, 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dialpolicy", description="Dialogue policy experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--seed", type=int, help="run a single replicate with this seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--method", help="multiclass | multidense | diaseq | diaadv")
        p.add_argument("--fraction", type=float, help="share of dialogues kept, in (0, 1]")
        p.add_argument("--episodes", type=int, help="evaluation episodes per seed")
        p.add_argument("--corpus", help="directory written by gen-corpus")
        p.add_argument("--dialogues", type=int, dest="n_dialogues", help="dialogues to generate")
        p.add_argument("--checkpoint", help="checkpoint to evaluate ('{seed}' is substituted) or 'expert'")
        p.add_argument("--pretrained", help="multidense checkpoint to start diaadv from")
        p.add_argument("--allow-unpretrained", action="store_true", default=None,
                       help="let diaadv start from a random initialization")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.command == "ablate" and args.fraction is not None:
        # a single fraction on the command line narrows the ablation grid to it
        cfg = cfg.override(fractions=[args.fraction])
    return cfg.override(
        seeds=[args.seed] if args.seed is not None else None,
        out=args.out, method=args.method, fraction=args.fraction, episodes=args.episodes,
        corpus=args.corpus, n_dialogues=args.n_dialogues, checkpoint=args.checkpoint,
        pretrained=args.pretrained, allow_unpretrained=args.allow_unpretrained,
    )


def _fail(kind: str, exc: BaseException, code: int) -> int:
    print(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("DIALPOLICY_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        COMMANDS[args.command](cfg)
    except (ConfigError, FileNotFoundError) as exc:
        return _fail("config", exc, EXIT_CONFIG)
    except (ValueError, RuntimeError, OSError) as exc:
        return _fail("runtime", exc, EXIT_RUNTIME)
    print(f"{args.command}: wrote {cfg.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
