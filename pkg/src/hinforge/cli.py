"""Command-line entry point: ``hinforge <mode> --config FILE [--seed N] [--out DIR]``."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, HinforgeError
from .pipeline import MODES, load_config, run_pipeline

HELP = {
    "gen": "generate a planted-team graph with its ground truth",
    "train": "train and score node classification against two baselines",
    "fedtrain": "run the simulated parameter-server training",
    "embed": "train and export fused embeddings",
    "influence": "NAC and centrality scores with top-K overlaps",
    "teams": "prefilter, train and extract research teams",
    "eval": "NMI of a team partition against ground truth",
    "sensitivity": "local-epoch x batch-size grid of federated runs",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hinforge", description=__doc__)
    subs = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = subs.add_parser(mode, help=HELP[mode])
        p.add_argument("--config", required=True, help="JSON run config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out)
        summary = run_pipeline(cfg, args.mode)
    except ConfigError as e:
        print("config error:", file=sys.stderr)
        for k, v in sorted(e.problems.items()):
            print(f"  {k}: {v}", file=sys.stderr)
        return 2
    except HinforgeError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
