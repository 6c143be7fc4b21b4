"""Command-line entry point: run, validate, and list experiments.

Batch-oriented and CI-friendly: configurations are single JSON documents,
every run requires an explicit seed, and the exit status encodes the
outcome (0 = all checks pass, 1 = a check failed, 2 = validation or
resource error).  The TRANSPORTLAB_THREADS environment variable sets the
default worker count for path-parallel Monte Carlo; it affects speed
only, never results.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import TransportLabError, ValidationError
from .experiments import list_experiments, run, validate


def _load_config(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _default_workers() -> int:
    raw = os.environ.get("TRANSPORTLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="transportlab",
        description="numerical laboratory for transport equations with rough drift",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("--config", required=True, help="path to the JSON config")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--out", default="out", help="output directory (default: ./out)")
    p_run.add_argument("--workers", type=int, default=None,
                       help="Monte Carlo worker processes (speed only)")

    p_val = sub.add_parser("validate", help="list every violated config constraint")
    p_val.add_argument("--config", required=True)

    sub.add_parser("list", help="table of available experiments")

    args = parser.parse_args(argv)

    if args.command == "list":
        rows = list_experiments()
        width = max(len(r[0]) for r in rows)
        for exp_id, desc, anchor in rows:
            print(f"{exp_id:<{width}}  {desc}  [{anchor}]")
        return 0

    try:
        config = _load_config(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        diagnostics = validate(config)
        if diagnostics:
            for d in diagnostics:
                print(f"invalid: {d}")
            return 2
        print("ok")
        return 0

    if args.seed is not None:
        config["seed"] = args.seed
    workers = args.workers if args.workers is not None else _default_workers()
    try:
        report = run(config, args.out, workers=workers)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except MemoryError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return 2
    except TransportLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    for check in report.checks:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"[{status}] {check['name']}: {check['detail']}")
    print(f"report: {report.experiment} "
          f"({'pass' if report.passed else 'FAIL'}, {report.wall_time_s:.2f}s) "
          f"-> {args.out}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
