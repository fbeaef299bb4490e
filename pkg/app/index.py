# Copyright (C) 2020-2025, Pyronear.

# This program is licensed under the Apache License 2.0.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0> for full license details.
import argparse
import json
import sys
from typing import List, Optional

import logging_config
from main import RunConfig, run

import config as cfg
from components.reports import FORMATS

# Configure logging
logger = logging_config.configure_logging(cfg.DEBUG, cfg.SENTRY_DSN)


def _common_flags(
    parser: argparse.ArgumentParser, perms: int = cfg.DEFAULT_PERMS, evalset_required: bool = True
) -> None:
    parser.add_argument(
        "--evalset", type=str, required=evalset_required, default=None, help="Evaluation-set directory"
    )
    parser.add_argument("--meta", choices=["spa", "pa", "both"], default="both", help="Meta-metric(s) to report")
    parser.add_argument("--perms", type=int, default=perms, help="Permutations B of the shared sign cache")
    parser.add_argument("--seed", type=int, default=cfg.DEFAULT_SEED, help="Master random seed")
    parser.add_argument("--format", choices=FORMATS, default=None, help="Report format (tsv, or csv for plots)")
    parser.add_argument("--threads", type=int, default=cfg.DEFAULT_THREADS, help="Worker threads")
    parser.add_argument("--output", type=str, default=None, help="Report file (stdout when omitted)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Meta-evaluation of MT metrics with soft pairwise accuracy",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    formatter = argparse.ArgumentDefaultsHelpFormatter

    score = subparsers.add_parser("score", help="SPA, PA and Kendall's tau per metric", formatter_class=formatter)
    _common_flags(score)
    score.add_argument("--breakdown", action="store_true", help="Also emit the per-pair SPA and PA terms")

    compare = subparsers.add_parser("compare", help="Metric significance and clusters", formatter_class=formatter)
    _common_flags(compare)
    compare.add_argument("--resamples", type=int, default=cfg.DEFAULT_RESAMPLES, help="PERM-INPUTS resamples R")
    compare.add_argument("--alpha", type=float, default=cfg.DEFAULT_ALPHA, help="Significance level")
    compare.add_argument("--metrics", nargs="+", default=None, help="Metrics to compare (all by default)")

    stability = subparsers.add_parser("stability", help="System-ablation stability", formatter_class=formatter)
    _common_flags(stability)
    stability.add_argument("--trials", type=int, default=cfg.DEFAULT_TRIALS, help="Random subsets per k")
    stability.add_argument("--k", type=int, nargs="+", default=[], help="Systems kept (default: 3..N)")

    ci = subparsers.add_parser("ci", help="Bootstrap confidence intervals", formatter_class=formatter)
    _common_flags(ci)
    ci.add_argument("--trials", type=int, default=cfg.DEFAULT_TRIALS, help="Bootstrap replicates per size")
    ci.add_argument("--sample-sizes", type=int, nargs="+", default=[], help="Segment counts (default: S/8..S)")
    ci.add_argument("--metrics", nargs="+", default=None, help="Metrics to bootstrap (all by default)")

    oracle = subparsers.add_parser("oracle-check", help="Exact-enumeration cross-check", formatter_class=formatter)
    _common_flags(oracle, perms=4096, evalset_required=False)
    oracle.add_argument("--tolerance", type=float, default=0.03, help="Maximum |p_mc - p_exact|")
    oracle.add_argument("--instances", type=int, default=50, help="Random instances when no evalset is given")

    benchmark = subparsers.add_parser("benchmark", help="Cached vs naive p-value timing", formatter_class=formatter)
    _common_flags(benchmark, evalset_required=False)
    benchmark.add_argument("--systems", type=int, default=15, help="Systems of the synthetic instance")
    benchmark.add_argument("--segments", type=int, default=1500, help="Segments of the synthetic instance")
    return parser


def _error_payload(error: Exception) -> str:
    return json.dumps({
        "error": type(error).__name__,
        "message": str(error),
        "file": getattr(error, "path", None) or getattr(error, "filename", None),
        "line": getattr(error, "line", None),
    })


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(RunConfig(**vars(args)))
    except (ValueError, OSError) as e:
        logger.error("%s failed: %s", args.command, e)
        print(_error_payload(e), file=sys.stderr)
        return 1


# ----------------------------------------------------------------------------------------------------------------------
# RUNNING THE COMMAND-LINE INTERFACE

if __name__ == "__main__":
    sys.exit(main())
