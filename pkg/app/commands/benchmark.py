# Copyright (C) 2024-2025, Pyronear.

# This program is licensed under the Apache License 2.0.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0> for full license details.

import time
from typing import TYPE_CHECKING

import logging_config
import numpy as np
import pandas as pd

import config as cfg
from components.reports import Report
from utils.data import load_eval_set
from utils.permutations import generate_sign_matrix, naive_p_value_matrix, pairwise_p_values, project_systems
from utils.synthetic import make_synthetic_eval_set

if TYPE_CHECKING:
    from main import RunConfig

__all__ = ["cmd_benchmark"]

logger = logging_config.configure_logging(cfg.DEBUG, cfg.SENTRY_DSN, __name__)


def cmd_benchmark(config: "RunConfig") -> Report:
    """
    Times the full human p-value matrix: cached engine (sign generation included) against the
    naive per-pair reference. Timings vary between runs, unlike every other report.
    """
    if config.evalset is None:
        eval_set = make_synthetic_eval_set(config.systems, config.segments, n_metrics=1, seed=config.seed)
    else:
        eval_set = load_eval_set(config.evalset)
    m = eval_set.human

    start = time.perf_counter()
    sm = generate_sign_matrix(config.seed, config.perms, m.n_segments, threads=config.threads)
    cached = pairwise_p_values(project_systems(m, sm), config.threads)
    cached_seconds = time.perf_counter() - start

    start = time.perf_counter()
    naive = naive_p_value_matrix(m, config.seed, config.perms)
    naive_seconds = time.perf_counter() - start

    speedup = naive_seconds / cached_seconds if cached_seconds > 0 else float("inf")
    logger.info("Cached %.3fs, naive %.3fs, speedup x%.1f", cached_seconds, naive_seconds, speedup)
    table = pd.DataFrame([
        {"engine": "cached", "seconds": cached_seconds},
        {"engine": "naive", "seconds": naive_seconds},
    ])
    summary = {
        "n_systems": m.n_systems,
        "n_segments": m.n_segments,
        "speedup": round(speedup, 2),
        # Independent streams, so only agreement up to Monte Carlo error is expected
        "max_abs_p_diff": float(np.max(np.abs(cached.p - naive.p))),
    }
    return Report("benchmark", config.metadata(), {"timings": table}, summary)
