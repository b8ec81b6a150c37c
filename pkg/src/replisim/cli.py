"""Command line entry point: ``replisim run --config FILE ...``."""

import argparse
import os
import sys

from .harness import ConfigError, load_config, run_scenario, summary_csv
from .strategies import STRATEGIES


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="replisim")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the scenarios in a config file")
    run.add_argument("--config", required=True, help="JSON scenario file")
    run.add_argument("--strategy", choices=sorted(STRATEGIES),
                     help="override the strategy of every scenario")
    run.add_argument("--seed", type=int, help="override the base seed")
    run.add_argument("--reps", type=int, help="override the number of repetitions")
    run.add_argument("--out", help="directory for CSV output")
    run.add_argument("--trace-server", type=int,
                     help="record queue-estimation traces for this server")
    run.add_argument("--workers", type=int, default=1,
                     help="run repetitions in parallel processes")
    return parser


def _overrides(args) -> dict:
    changes = {}
    if args.strategy is not None:
        changes["strategy"] = args.strategy
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if args.reps is not None:
        changes["repetitions"] = args.reps
    return changes


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenarios = [s.replace(**_overrides(args)) for s in load_config(args.config)]
        for s in scenarios:
            if args.trace_server is not None and not 0 <= args.trace_server < s.num_servers:
                raise ConfigError(f"--trace-server {args.trace_server} out of range")
    except (ConfigError, OSError) as exc:
        print(f"replisim: config error: {exc}", file=sys.stderr)
        return 2

    results = [run_scenario(s, workers=args.workers, trace_server=args.trace_server,
                            out_dir=args.out) for s in scenarios]
    text = summary_csv(results)
    if args.out:
        with open(os.path.join(args.out, "summary.csv"), "w", newline="") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
