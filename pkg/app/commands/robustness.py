# Copyright (C) 2024-2025, Pyronear.

# This program is licensed under the Apache License 2.0.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0> for full license details.

from dataclasses import asdict
from typing import TYPE_CHECKING, List

import logging_config
import pandas as pd

import config as cfg
from components.reports import Report
from utils.data import load_eval_set
from utils.robustness import bootstrap_cis, system_ablation_sweep

if TYPE_CHECKING:
    from main import RunConfig

__all__ = ["cmd_ci", "cmd_stability", "default_sample_sizes"]

logger = logging_config.configure_logging(cfg.DEBUG, cfg.SENTRY_DSN, __name__)


def default_sample_sizes(n_segments: int) -> List[int]:
    """S/8, S/4, S/2 and S, without duplicates or zeros."""
    return sorted({max(1, n_segments // d) for d in (8, 4, 2, 1)})


def cmd_stability(config: "RunConfig") -> Report:
    """Mean ablation Pearson r, one row per (systems kept, meta-metric). Defaults to every k in [3, N]."""
    eval_set = load_eval_set(str(config.evalset))
    k_values = config.k or list(range(3, len(eval_set.system_names) + 1))
    results = system_ablation_sweep(
        eval_set, config.metas, k_values, config.trials, config.seed, config.perms, config.threads
    )
    table = pd.DataFrame([asdict(r) for r in results])
    table = table[["systems_kept", "meta", "mean_pearson_r", "trials", "degenerate_trials"]]
    return Report("stability", config.metadata(), {"stability": table})


def cmd_ci(config: "RunConfig") -> Report:
    """Bootstrap 95% intervals, one row per (metric, sample size, meta-metric)."""
    eval_set = load_eval_set(str(config.evalset))
    sample_sizes = config.sample_sizes or default_sample_sizes(len(eval_set.segment_ids))
    rows = []
    for metric in config.metrics or eval_set.metric_names:
        logger.info("Bootstrapping %s over %d sample sizes", metric, len(sample_sizes))
        cis = bootstrap_cis(
            eval_set, metric, sample_sizes, config.trials, config.seed, config.perms, threads=config.threads
        )
        for i in range(len(sample_sizes)):
            rows += [asdict(cis[meta][i]) for meta in config.metas]
    table = pd.DataFrame(rows)[["metric_name", "sample_size", "meta", "lower", "upper", "point"]]
    return Report("ci", config.metadata(), {"ci": table.rename(columns={"metric_name": "metric"})})
