# Copyright (C) 2024-2025, Pyronear.

# This program is licensed under the Apache License 2.0.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0> for full license details.

from dataclasses import asdict
from typing import TYPE_CHECKING

import logging_config
import pandas as pd

import config as cfg
from components.reports import BREAKDOWN_SECTION, Report
from utils.data import load_eval_set
from utils.meta_metrics import distinct_value_stats, meta_scores, pair_breakdown
from utils.permutations import eval_p_values, generate_sign_matrix, project_eval_set

if TYPE_CHECKING:
    from main import RunConfig

__all__ = ["cmd_score"]

logger = logging_config.configure_logging(cfg.DEBUG, cfg.SENTRY_DSN, __name__)


def cmd_score(config: "RunConfig") -> Report:
    """
    SPA, PA and Kendall's tau of every metric, sorted by the first requested meta-metric.

    Args:
        config: run configuration, `evalset` required

    Returns:
        Report: a `scores` table, distinct-value counts and, with `breakdown`, the per-pair terms
    """
    eval_set = load_eval_set(str(config.evalset))
    sm = generate_sign_matrix(config.seed, config.perms, len(eval_set.segment_ids), threads=config.threads)
    ph, pms = eval_p_values(project_eval_set(eval_set, sm), config.threads)
    scores = meta_scores(ph, pms)
    logger.info("Scored %d metrics on %d systems", len(scores), ph.n_systems)

    columns = ["metric"]
    if "spa" in config.metas:
        columns.append("spa")
    if "pa" in config.metas:
        columns += ["pa", "tau"]
    table = pd.DataFrame([
        {"metric": s.metric_name, "spa": s.spa, "pa": s.pa, "tau": s.tau} for s in scores
    ])[columns]
    table = table.sort_values([config.metas[0], "metric"], ascending=[False, True], kind="mergesort")

    distinct = distinct_value_stats(scores)
    summary = {
        "n_systems": ph.n_systems,
        "n_segments": len(eval_set.segment_ids),
        "n_metrics": distinct.n_metrics,
        "distinct_pa": distinct.pa,
        "distinct_spa": distinct.spa,
        "max_distinct_pa": min(distinct.max_pa_values, distinct.n_metrics),
    }
    tables = {"scores": table.reset_index(drop=True)}
    if config.breakdown:
        tables[BREAKDOWN_SECTION] = pd.DataFrame([
            {"metric": name, **asdict(row)} for name in sorted(pms) for row in pair_breakdown(ph, pms[name])
        ])
    return Report("score", config.metadata(), tables, summary)
