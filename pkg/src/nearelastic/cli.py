"""Command-line entry point: run a configured experiment and report results."""

import argparse
import json
import sys

from .harness import ExperimentConfig, check_expectations, run_experiment, \
    write_results


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nearelastic",
        description="Simulate nearly-elastic systems and their limiting "
                    "branching processes.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment from a JSON config")
    run.add_argument("--config", required=True, help="path to the JSON config")
    run.add_argument("--seed", type=int, default=None,
                     help="override the config seed")
    run.add_argument("--replicas", type=int, default=None,
                     help="override the replica count")
    run.add_argument("--threads", type=int, default=1,
                     help="worker processes for replica blocks")
    run.add_argument("--out", default=None,
                     help="directory for JSON/CSV output")
    run.add_argument("--assert", "--check", dest="check",
                     action="store_true",
                     help="evaluate the config's expectations; nonzero exit "
                          "on failure")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    cfg = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.replicas is not None:
        cfg.replicas = args.replicas
    report = run_experiment(cfg, n_workers=args.threads)
    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    print()
    if args.out:
        write_results(report, args.out)
    if args.check:
        failed = False
        for key, ok, val in check_expectations(report):
            print(f"{'PASS' if ok else 'FAIL'} {key} = {val}", file=sys.stderr)
            failed |= not ok
        if failed:
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
