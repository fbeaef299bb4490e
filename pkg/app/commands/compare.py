# Copyright (C) 2024-2025, Pyronear.

# This program is licensed under the Apache License 2.0.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0> for full license details.

from typing import TYPE_CHECKING, Any, Dict

import logging_config
import pandas as pd

import config as cfg
from components.reports import Report
from utils.data import load_eval_set
from utils.significance import CLUSTER_WARNING, greedy_clusters, significance_matrix

if TYPE_CHECKING:
    from main import RunConfig

__all__ = ["cmd_compare"]

logger = logging_config.configure_logging(cfg.DEBUG, cfg.SENTRY_DSN, __name__)


def cmd_compare(config: "RunConfig") -> Report:
    """
    PERM-INPUTS significance between metrics, with greedy cluster ranks, for each requested meta-metric.

    Tables: `ranking` (meta, rank, metric, score, cluster) and one `p_values_<meta>` matrix per
    meta-metric, rows and columns in ranking order.
    """
    eval_set = load_eval_set(str(config.evalset))
    rankings = []
    tables: Dict[str, pd.DataFrame] = {}
    summary: Dict[str, Any] = {}
    for meta in config.metas:
        sig = significance_matrix(
            eval_set,
            config.metrics,
            meta,
            n_resamples=config.resamples,
            alpha=config.alpha,
            seed=config.seed,
            n_perms=config.perms,
            threads=config.threads,
        )
        clusters = greedy_clusters(sig)
        logger.info(
            "%s: %d/%d significant comparisons, %d clusters",
            meta.upper(),
            sig.n_significant(),
            sig.max_comparisons,
            clusters.n_clusters,
        )
        summary[f"n_significant_{meta}"] = sig.n_significant()
        summary[f"n_clusters_{meta}"] = clusters.n_clusters
        summary["max_comparisons"] = sig.max_comparisons
        rankings += [
            {"meta": meta, "rank": i + 1, "metric": name, "score": score, "cluster": clusters.ranks[name]}
            for i, (name, score) in enumerate(zip(sig.metric_names, sig.scores))
        ]
        matrix = pd.DataFrame(sig.pvals, columns=list(sig.metric_names))
        matrix.insert(0, "metric", list(sig.metric_names))
        tables[f"p_values_{meta}"] = matrix
    summary["warning"] = CLUSTER_WARNING
    return Report("compare", config.metadata(), {"ranking": pd.DataFrame(rankings), **tables}, summary)
