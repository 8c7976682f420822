"""Command-line entry point.

    recval list
    recval run --experiment <tag> [--config <path.json>] --out <dir>

Exit code 0 on a completed run, including runs whose findings are
divergences (those are results here, not errors); nonzero on validation
or runtime errors. RECVAL_THREADS caps BLAS/OpenMP threads; everything
else comes from the config document.
"""

from __future__ import annotations

import argparse
import json
import os
import sys


def _apply_thread_env():
    n = os.environ.get("RECVAL_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, n)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="recval", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list available experiments")
    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--experiment", required=True, help="experiment tag (see `recval list`)")
    run.add_argument("--config", default=None, help="JSON config; omitted fields use defaults")
    run.add_argument("--out", required=True, help="output directory for report.json and CSV tables")
    return parser


def main(argv=None) -> int:
    _apply_thread_env()
    args = build_parser().parse_args(argv)
    # imported after the thread env is pinned so BLAS picks it up
    from .experiments import default_config, list_experiments, run_experiment

    if args.command == "list":
        for entry in list_experiments():
            print(f"{entry['tag']:20s} [{entry['topic']}] {entry['summary']}")
        return 0

    try:
        if args.config is not None:
            with open(args.config) as fh:
                cfg = json.load(fh)
            cfg.setdefault("experiment", args.experiment)
            if cfg["experiment"] != args.experiment:
                raise ValueError(
                    f"--experiment {args.experiment!r} conflicts with config "
                    f"experiment {cfg['experiment']!r}"
                )
        else:
            cfg = default_config(args.experiment)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        report = run_experiment(cfg, out_dir=args.out)
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure, distinct from findings
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"[{status}] {check.name}: {check.value}" + (f" ({check.detail})" if check.detail else ""))
    print(
        f"{report.experiment}: {sum(c.passed for c in report.checks)}/{len(report.checks)} "
        f"checks passed in {report.timing_s:.1f}s -> {args.out}/report.json"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
