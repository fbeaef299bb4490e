# Copyright (C) 2024-2025, Pyronear.

# This program is licensed under the Apache License 2.0.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0> for full license details.

from itertools import combinations
from typing import TYPE_CHECKING, Dict, List, Tuple

import logging_config
import pandas as pd

import config as cfg
from components.reports import Report
from utils.data import ScoreMatrix, load_eval_set
from utils.permutations import exact_pairwise_p_value, generate_sign_matrix, pairwise_p_values, project_systems
from utils.synthetic import make_uniform_score_matrix

if TYPE_CHECKING:
    from main import RunConfig

__all__ = ["cmd_oracle_check", "oracle_rows"]

logger = logging_config.configure_logging(cfg.DEBUG, cfg.SENTRY_DSN, __name__)

# Shape of the generated instances when no evalset is given
ORACLE_SYSTEMS = 4
ORACLE_SEGMENTS = 10


def oracle_rows(label: str, m: ScoreMatrix, seed: int, n_perms: int, threads: int = 1) -> List[Dict]:
    """Monte Carlo p-value on the shared cache next to the exact enumeration, for every system pair."""
    sm = generate_sign_matrix(seed, n_perms, m.n_segments, threads=threads)
    p = pairwise_p_values(project_systems(m, sm), threads).p
    rows = []
    for i, j in combinations(range(m.n_systems), 2):
        exact = exact_pairwise_p_value(m, i, j)
        rows.append({
            "matrix": label,
            "system_i": m.system_names[i],
            "system_j": m.system_names[j],
            "p_mc": float(p[i, j]),
            "p_exact": exact,
            "abs_diff": abs(float(p[i, j]) - exact),
        })
    return rows


def _instances(config: "RunConfig") -> List[Tuple[str, ScoreMatrix]]:
    if config.evalset is None:
        return [
            (f"random{k:03d}", make_uniform_score_matrix(ORACLE_SYSTEMS, ORACLE_SEGMENTS, seed=config.seed + k))
            for k in range(config.instances)
        ]
    eval_set = load_eval_set(config.evalset)
    return [("human", eval_set.human)] + [(name, eval_set.metrics[name]) for name in eval_set.metric_names]


def cmd_oracle_check(config: "RunConfig") -> Report:
    """
    Cross-validates the cached permutation engine against exact 2^S enumeration on small inputs.

    The report fails (exit code 1) when any pair differs by more than `tolerance`.
    """
    rows = []
    for label, m in _instances(config):
        if m.n_segments > cfg.MAX_EXACT_SEGMENTS:
            raise ValueError(
                f"oracle-check needs at most {cfg.MAX_EXACT_SEGMENTS} segments, '{label}' has {m.n_segments}"
            )
        rows += oracle_rows(label, m, config.seed, config.perms, config.threads)
    table = pd.DataFrame(rows)
    n_outside = int((table["abs_diff"] > config.tolerance).sum())
    if n_outside:
        logger.warning("%d/%d pairs outside tolerance %s", n_outside, len(table), config.tolerance)
    summary = {
        "tolerance": config.tolerance,
        "n_pairs": len(table),
        "n_outside": n_outside,
        "max_abs_diff": float(table["abs_diff"].max()),
    }
    return Report("oracle-check", config.metadata(), {"oracle": table}, summary, ok=n_outside == 0)
