# Copyright (C) 2024-2025, Pyronear.

# This program is licensed under the Apache License 2.0.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0> for full license details.

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

import config as cfg
from services import thread_map
from utils.data import EvalSet
from utils.meta_metrics import META_CHOICES, meta_value
from utils.permutations import (
    EvalProjection,
    PValueMatrix,
    cross_p_values,
    generate_sign_matrix,
    pairwise_p_values,
    project_eval_set,
)
from utils.streams import METRIC_SWAPS, derive_key, keyed_stream

__all__ = [
    "ClusterAssignment",
    "MetricSigMatrix",
    "exact_perm_inputs_p_value",
    "greedy_clusters",
    "perm_inputs_compare",
    "significance_matrix",
]

logger = logging.getLogger(__name__)

CLUSTER_WARNING = (
    "Greedy clustering can place two metrics that are statistically indistinguishable in different "
    "significance clusters."
)


@dataclass(frozen=True, eq=False)
class MetricSigMatrix:
    """One-sided PERM-INPUTS p-values between metrics sorted by descending meta-score.

    pvals[a, b] is the p-value for "metric a is better than metric b"; the diagonal is unused (1.0).
    """

    metric_names: Tuple[str, ...]
    scores: Tuple[float, ...]
    pvals: np.ndarray = field(repr=False)
    alpha: float = cfg.DEFAULT_ALPHA
    meta: str = "spa"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.pvals.shape != (len(self.metric_names), len(self.metric_names)):
            raise ValueError(f"p-value matrix shape {self.pvals.shape} does not match {len(self.metric_names)} metrics")

    @property
    def n_metrics(self) -> int:
        return len(self.metric_names)

    @property
    def max_comparisons(self) -> int:
        return self.n_metrics * (self.n_metrics - 1) // 2

    def is_significant(self, p: float) -> bool:
        # alpha = 0 declares nothing significant, even p-values of exactly 0
        return self.alpha > 0 and p <= self.alpha

    def significant_pairs(self) -> List[Tuple[str, str]]:
        return [
            (self.metric_names[a], self.metric_names[b])
            for a, b in combinations(range(self.n_metrics), 2)
            if self.is_significant(self.pvals[a, b])
        ]

    def n_significant(self) -> int:
        return len(self.significant_pairs())


@dataclass(frozen=True)
class ClusterAssignment:
    ranks: Dict[str, int]
    n_clusters: int


def _check_meta(meta: str) -> None:
    if meta not in META_CHOICES:
        raise ValueError(f"unknown meta-metric '{meta}', expected one of {META_CHOICES}")


def _meta_rows(meta: str, ph_upper: np.ndarray, pm_rows: np.ndarray) -> np.ndarray:
    if meta == "spa":
        return np.mean(1.0 - np.abs(ph_upper - pm_rows), axis=-1)
    return np.count_nonzero((ph_upper >= 0.5) == (pm_rows >= 0.5), axis=-1) / ph_upper.size


class _SwapResampler:
    """Meta-score deltas of two metrics under per-system swaps of their score vectors.

    Swapping system i between metrics swaps its projection rows, so the p-value of a pair (i, j)
    only depends on which metric each system comes from. The four cross p-value matrices
    are computed once and every swap pattern is a gather.
    """

    def __init__(self, projection: EvalProjection, ph: PValueMatrix, metric_a: str, metric_b: str, meta: str):
        _check_meta(meta)
        self.meta = meta
        self.n_systems = ph.n_systems
        self.rows, self.cols = np.triu_indices(self.n_systems, k=1)
        self.ph_upper = ph.upper()
        sources = (projection.metrics[metric_a], projection.metrics[metric_b])
        self.stack = np.stack([np.stack([cross_p_values(x, y) for y in sources]) for x in sources])

    def deltas(self, masks: np.ndarray) -> np.ndarray:
        """masks: (R, N) 0/1 array, 1 where a system's vectors are swapped."""
        mi, mj = masks[:, self.rows], masks[:, self.cols]
        pm_a = self.stack[mi, mj, self.rows, self.cols]
        pm_b = self.stack[1 - mi, 1 - mj, self.rows, self.cols]
        return _meta_rows(self.meta, self.ph_upper, pm_a) - _meta_rows(self.meta, self.ph_upper, pm_b)

    def observed(self) -> float:
        return float(self.deltas(np.zeros((1, self.n_systems), dtype=np.intp))[0])


def _mid_p(deltas: np.ndarray, observed: float) -> float:
    return (np.count_nonzero(deltas > observed) + 0.5 * np.count_nonzero(deltas == observed)) / deltas.size


def _pair_index(eval_set: EvalSet, metric_a: str, metric_b: str) -> int:
    # Stream coordinate of an unordered metric pair, independent of meta-score order
    names = sorted(eval_set.metric_names)
    a, b = sorted((names.index(metric_a), names.index(metric_b)))
    return a * len(names) + b


def _swap_masks(seed: int, pair_index: int, n_resamples: int, n_systems: int) -> np.ndarray:
    key = derive_key(seed, METRIC_SWAPS, pair_index)
    return np.stack([keyed_stream(key, r).integers(0, 2, size=n_systems, dtype=np.intp) for r in range(n_resamples)])


def _project(eval_set: EvalSet, seed: int, n_perms: int, threads: int) -> EvalProjection:
    sm = generate_sign_matrix(seed, n_perms, len(eval_set.segment_ids), threads=threads)
    return project_eval_set(eval_set, sm)


def _compare(
    eval_set: EvalSet,
    projection: EvalProjection,
    ph: PValueMatrix,
    metric_a: str,
    metric_b: str,
    meta: str,
    n_resamples: int,
    seed: int,
) -> float:
    resampler = _SwapResampler(projection, ph, metric_a, metric_b, meta)
    masks = _swap_masks(seed, _pair_index(eval_set, metric_a, metric_b), n_resamples, ph.n_systems)
    return _mid_p(resampler.deltas(masks), resampler.observed())


def perm_inputs_compare(
    eval_set: EvalSet,
    metric_a: str,
    metric_b: str,
    meta: str,
    n_resamples: int = cfg.DEFAULT_RESAMPLES,
    seed: int = cfg.DEFAULT_SEED,
    n_perms: int = cfg.DEFAULT_PERMS,
    threads: int = 1,
) -> float:
    """
    One-sided PERM-INPUTS p-value for "metric_a has a higher meta-score than metric_b".

    Each resample swaps, independently per system with probability 0.5, the two metrics' score
    vectors, recomputes both meta-scores on the shared sign cache and records the delta.

    Args:
        eval_set: test set holding both metrics
        metric_a: the higher-scoring metric under `meta`
        metric_b: the other metric
        meta: "spa" or "pa"
        n_resamples: number of swap resamples R
        seed: master seed for the sign cache and swap streams
        n_perms: permutations B of the sign cache
        threads: worker threads for the p-value computations

    Returns:
        float: mid-p value in [0, 1]
    """
    _check_meta(meta)
    for name in (metric_a, metric_b):
        eval_set.metric(name)
    if n_resamples < 1:
        raise ValueError(f"n_resamples must be >= 1, got {n_resamples}")
    projection = _project(eval_set, seed, n_perms, threads)
    ph = pairwise_p_values(projection.human, threads)
    return _compare(eval_set, projection, ph, metric_a, metric_b, meta, n_resamples, seed)


def exact_perm_inputs_p_value(
    eval_set: EvalSet,
    metric_a: str,
    metric_b: str,
    meta: str,
    seed: int = cfg.DEFAULT_SEED,
    n_perms: int = cfg.DEFAULT_PERMS,
) -> float:
    """Mid-p value over all 2^N swap patterns (N <= MAX_EXACT_SYSTEMS), on the same sign cache."""
    _check_meta(meta)
    for name in (metric_a, metric_b):
        eval_set.metric(name)
    n_systems = len(eval_set.system_names)
    if n_systems > cfg.MAX_EXACT_SYSTEMS:
        raise ValueError(f"exact enumeration is limited to {cfg.MAX_EXACT_SYSTEMS} systems, got {n_systems}")
    projection = _project(eval_set, seed, n_perms, 1)
    ph = pairwise_p_values(projection.human)
    resampler = _SwapResampler(projection, ph, metric_a, metric_b, meta)
    codes = np.arange(1 << n_systems, dtype=np.intp)
    masks = (codes[:, None] >> np.arange(n_systems)) & 1
    return _mid_p(resampler.deltas(masks), resampler.observed())


def significance_matrix(
    eval_set: EvalSet,
    metrics: Optional[Sequence[str]] = None,
    meta: str = "spa",
    n_resamples: int = cfg.DEFAULT_RESAMPLES,
    alpha: float = cfg.DEFAULT_ALPHA,
    seed: int = cfg.DEFAULT_SEED,
    n_perms: int = cfg.DEFAULT_PERMS,
    threads: int = 1,
) -> MetricSigMatrix:
    """
    PERM-INPUTS p-values between every pair of metrics.

    Metrics are sorted by descending meta-score (ties by name); each pair is tested with the
    higher-scoring metric as the alternative and the lower triangle holds the complement.

    Args:
        eval_set: test set
        metrics: metric names to compare, all by default
        meta: "spa" or "pa"
        n_resamples: swap resamples per pair
        alpha: significance level
        seed: master seed
        n_perms: permutations of the shared sign cache
        threads: metric pairs evaluated in parallel

    Returns:
        MetricSigMatrix: sorted names, meta-scores and p-values
    """
    _check_meta(meta)
    names = list(metrics) if metrics is not None else eval_set.metric_names
    for name in names:
        eval_set.metric(name)
    if len(set(names)) < 2:
        raise ValueError("at least 2 metrics are required to compare")
    if n_resamples < 1:
        raise ValueError(f"n_resamples must be >= 1, got {n_resamples}")

    projection = _project(eval_set, seed, n_perms, threads)
    ph = pairwise_p_values(projection.human, threads)
    values = {name: meta_value(meta, ph, pairwise_p_values(projection.metrics[name], threads)) for name in names}
    ordered = sorted(set(names), key=lambda name: (-values[name], name))

    pairs = list(combinations(range(len(ordered)), 2))
    logger.info("Comparing %d metric pairs under %s with %d resamples", len(pairs), meta.upper(), n_resamples)
    pvals = thread_map(
        lambda ab: _compare(eval_set, projection, ph, ordered[ab[0]], ordered[ab[1]], meta, n_resamples, seed),
        pairs,
        threads,
    )
    matrix = np.ones((len(ordered), len(ordered)))
    for (a, b), p in zip(pairs, pvals):
        matrix[a, b] = p
        matrix[b, a] = 1.0 - p
    return MetricSigMatrix(tuple(ordered), tuple(values[name] for name in ordered), matrix, alpha, meta)


def greedy_clusters(sig: MetricSigMatrix, since_cluster_start: bool = False) -> ClusterAssignment:
    """
    Greedy significance clusters over metrics sorted by descending meta-score.

    Walking down the list, a metric opens a new cluster when it is significantly worse than at
    least one previously ranked metric; otherwise it joins the current cluster.

    Args:
        sig: metric significance matrix
        since_cluster_start: only compare against metrics of the current cluster

    Returns:
        ClusterAssignment: 1-based contiguous ranks
    """
    if any(later > earlier for earlier, later in zip(sig.scores, sig.scores[1:])):
        raise ValueError("metrics must be sorted by descending meta-score")
    if sig.n_metrics == 0:
        return ClusterAssignment({}, 0)
    ranks = [1]
    start = 0
    for k in range(1, sig.n_metrics):
        previous = range(start if since_cluster_start else 0, k)
        if any(sig.is_significant(sig.pvals[j, k]) for j in previous):
            start = k
            ranks.append(ranks[-1] + 1)
        else:
            ranks.append(ranks[-1])
    return ClusterAssignment(dict(zip(sig.metric_names, ranks)), ranks[-1])
