# Copyright (C) 2024-2025, Pyronear.

# This program is licensed under the Apache License 2.0.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0> for full license details.

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence

import numpy as np
from scipy import stats

import config as cfg
from services import thread_map
from utils.data import EvalSet
from utils.meta_metrics import META_CHOICES, meta_value
from utils.permutations import (
    PValueMatrix,
    eval_p_values,
    generate_sign_matrix,
    pairwise_p_values,
    project_eval_set,
    project_systems,
)
from utils.streams import ABLATION_SUBSETS, BOOTSTRAP_SEGMENTS, BOOTSTRAP_SIGNS, derive_key, keyed_stream

__all__ = [
    "CIResult",
    "DegenerateCorrelationError",
    "StabilityResult",
    "bootstrap_ci",
    "bootstrap_cis",
    "pearson_r",
    "system_ablation_stability",
    "system_ablation_sweep",
]

logger = logging.getLogger(__name__)

MIN_BOOTSTRAP_TRIALS = 100
CI_PERCENTILES = (2.5, 97.5)


class DegenerateCorrelationError(ValueError):
    """Pearson's r is undefined for a constant vector."""


@dataclass(frozen=True)
class CIResult:
    metric_name: str
    meta: str
    sample_size: int
    lower: float
    upper: float
    point: float


@dataclass(frozen=True)
class StabilityResult:
    meta: str
    systems_kept: int
    mean_pearson_r: float
    trials: int
    # Trials whose ablated meta-score vector was constant; excluded from the mean
    degenerate_trials: int = 0


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    """
    Product-moment correlation between two equal-length vectors.

    Args:
        x: first vector, at least 2 values
        y: second vector

    Returns:
        float: r in [-1, 1], exactly 1.0 for identical vectors
    """
    x_arr, y_arr = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    if x_arr.shape != y_arr.shape or x_arr.ndim != 1 or x_arr.size < 2:
        raise ValueError(f"expected two vectors of equal length >= 2, got shapes {x_arr.shape} and {y_arr.shape}")
    if np.ptp(x_arr) == 0 or np.ptp(y_arr) == 0:
        raise DegenerateCorrelationError("correlation is undefined for a constant vector")
    if np.array_equal(x_arr, y_arr):
        return 1.0
    r, _ = stats.pearsonr(x_arr, y_arr)
    return float(r)


def _check_meta(meta: str) -> None:
    if meta not in META_CHOICES:
        raise ValueError(f"unknown meta-metric '{meta}', expected one of {META_CHOICES}")


def _meta_vector(meta: str, ph: PValueMatrix, pms: Mapping[str, PValueMatrix], names: Sequence[str]) -> np.ndarray:
    return np.array([meta_value(meta, ph, pms[name]) for name in names])


def _ablation(
    meta: str,
    ph: PValueMatrix,
    pms: Mapping[str, PValueMatrix],
    k: int,
    trials: int,
    seed: int,
    threads: int,
) -> StabilityResult:
    names = sorted(pms)
    n_systems = ph.n_systems
    full = _meta_vector(meta, ph, pms, names)
    if np.ptp(full) == 0:
        raise DegenerateCorrelationError(f"all metrics share the same full-set {meta.upper()}; stability is undefined")

    subset_key = derive_key(seed, ABLATION_SUBSETS, k)

    def _trial(t: int) -> float:
        # A k-subset's p-values on the shared cache are the sub-matrix of the full ones
        subset = np.sort(keyed_stream(subset_key, t).choice(n_systems, size=k, replace=False))
        sub_ph = ph.select_systems(subset)
        ablated = _meta_vector(meta, sub_ph, {n: pms[n].select_systems(subset) for n in names}, names)
        try:
            return pearson_r(ablated, full)
        except DegenerateCorrelationError:
            return float("nan")

    rs = np.array(thread_map(_trial, range(trials), threads))
    valid = ~np.isnan(rs)
    if not valid.any():
        raise DegenerateCorrelationError(f"every ablation trial with k={k} produced constant {meta.upper()} scores")
    n_degenerate = int((~valid).sum())
    if n_degenerate:
        logger.info("k=%d, %s: %d/%d degenerate trials excluded", k, meta.upper(), n_degenerate, trials)
    return StabilityResult(meta, k, float(np.mean(rs[valid])), trials, n_degenerate)


def _check_ablation(eval_set: EvalSet, k: int, trials: int) -> None:
    if len(eval_set.metrics) < 2:
        raise ValueError("system ablation needs at least 2 metrics")
    if not 2 <= k <= len(eval_set.system_names):
        raise ValueError(f"systems kept must lie in [2, {len(eval_set.system_names)}], got {k}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")


def system_ablation_stability(
    eval_set: EvalSet,
    meta: str,
    k: int,
    trials: int = cfg.DEFAULT_TRIALS,
    seed: int = cfg.DEFAULT_SEED,
    n_perms: int = cfg.DEFAULT_PERMS,
    threads: int = 1,
) -> StabilityResult:
    """
    Mean Pearson r between the metric meta-scores on random k-system subsets and on all systems.

    Args:
        eval_set: test set with at least 2 metrics
        meta: "spa" or "pa"
        k: number of systems kept, 2 <= k <= N
        trials: number of random subsets
        seed: master seed of the sign cache and subset draws
        n_perms: permutations of the sign cache
        threads: trials evaluated in parallel

    Returns:
        StabilityResult: mean r over non-degenerate trials
    """
    return system_ablation_sweep(eval_set, [meta], [k], trials, seed, n_perms, threads)[0]


def system_ablation_sweep(
    eval_set: EvalSet,
    metas: Sequence[str],
    k_values: Sequence[int],
    trials: int = cfg.DEFAULT_TRIALS,
    seed: int = cfg.DEFAULT_SEED,
    n_perms: int = cfg.DEFAULT_PERMS,
    threads: int = 1,
) -> List[StabilityResult]:
    """Ablation stability for every (k, meta), sharing one set of full p-value matrices."""
    for meta in metas:
        _check_meta(meta)
    for k in k_values:
        _check_ablation(eval_set, k, trials)
    sm = generate_sign_matrix(seed, n_perms, len(eval_set.segment_ids), threads=threads)
    ph, pms = eval_p_values(project_eval_set(eval_set, sm), threads)
    return [_ablation(meta, ph, pms, k, trials, seed, threads) for k in k_values for meta in metas]


def bootstrap_cis(
    eval_set: EvalSet,
    metric: str,
    sample_sizes: Sequence[int],
    trials: int = cfg.DEFAULT_TRIALS,
    seed: int = cfg.DEFAULT_SEED,
    n_perms: int = cfg.DEFAULT_PERMS,
    allow_oversampling: bool = False,
    threads: int = 1,
) -> Dict[str, List[CIResult]]:
    """
    95% percentile bootstrap intervals of SPA and PA for several segment sample sizes.

    Each replicate draws m segments with replacement, regenerates the sign cache for those
    segments (key derived from seed, m and trial) and recomputes both meta-scores.

    Args:
        eval_set: test set
        metric: metric name
        sample_sizes: segment counts m, each in [1, S] unless `allow_oversampling`
        trials: replicates per sample size, at least 100
        seed: master seed
        n_perms: permutations per sign cache
        allow_oversampling: permit m > S
        threads: replicates evaluated in parallel

    Returns:
        Dict[str, List[CIResult]]: one list per meta-metric, in sample size order
    """
    human, scores = eval_set.human, eval_set.metric(metric)
    n_segments = human.n_segments
    if trials < MIN_BOOTSTRAP_TRIALS:
        raise ValueError(f"bootstrap needs at least {MIN_BOOTSTRAP_TRIALS} trials, got {trials}")
    for m in sample_sizes:
        if m < 1:
            raise ValueError(f"sample size must be >= 1, got {m}")
        if m > n_segments and not allow_oversampling:
            raise ValueError(f"sample size {m} exceeds the {n_segments} available segments")

    sm = generate_sign_matrix(seed, n_perms, n_segments, threads=threads)
    full_h = pairwise_p_values(project_systems(human, sm))
    full_m = pairwise_p_values(project_systems(scores, sm))
    points = {meta: meta_value(meta, full_h, full_m) for meta in META_CHOICES}

    segment_keys = {m: derive_key(seed, BOOTSTRAP_SEGMENTS, m) for m in sample_sizes}

    def _replicate(m: int, t: int) -> Dict[str, float]:
        idx = keyed_stream(segment_keys[m], t).integers(0, n_segments, size=m)
        replicate_sm = generate_sign_matrix(seed, n_perms, m, coordinates=(BOOTSTRAP_SIGNS, m, t))
        ph = pairwise_p_values(project_systems(human.select_segments(idx), replicate_sm))
        pm = pairwise_p_values(project_systems(scores.select_segments(idx), replicate_sm))
        return {meta: meta_value(meta, ph, pm) for meta in META_CHOICES}

    results: Dict[str, List[CIResult]] = {meta: [] for meta in META_CHOICES}
    for m in sample_sizes:
        replicates = thread_map(lambda t, m=m: _replicate(m, t), range(trials), threads)
        for meta in META_CHOICES:
            lower, upper = np.percentile([r[meta] for r in replicates], CI_PERCENTILES)
            results[meta].append(CIResult(metric, meta, m, float(lower), float(upper), points[meta]))
        logger.debug("Bootstrap m=%d done (%d trials)", m, trials)
    return results


def bootstrap_ci(
    eval_set: EvalSet,
    metric: str,
    meta: str,
    sample_sizes: Sequence[int],
    trials: int = cfg.DEFAULT_TRIALS,
    seed: int = cfg.DEFAULT_SEED,
    n_perms: int = cfg.DEFAULT_PERMS,
    allow_oversampling: bool = False,
    threads: int = 1,
) -> List[CIResult]:
    """Bootstrap confidence intervals of one meta-metric, see `bootstrap_cis`."""
    _check_meta(meta)
    return bootstrap_cis(eval_set, metric, sample_sizes, trials, seed, n_perms, allow_oversampling, threads)[meta]
