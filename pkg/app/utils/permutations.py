# Copyright (C) 2024-2025, Pyronear.

# This program is licensed under the Apache License 2.0.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0> for full license details.

import logging
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple, Union

import numpy as np

import config as cfg
from services import thread_map
from utils.data import EvalSet, ScoreMatrix
from utils.streams import NAIVE_SWAPS, derive_key, random_bit_rows, stream

__all__ = [
    "EvalProjection",
    "PValueMatrix",
    "SignMatrix",
    "SystemProjection",
    "cross_p_values",
    "eval_p_values",
    "exact_pairwise_p_value",
    "generate_sign_matrix",
    "naive_pair_p_value",
    "naive_p_value_matrix",
    "pairwise_p_values",
    "project_eval_set",
    "project_systems",
]

logger = logging.getLogger(__name__)

SIGN_CHUNK_ROWS = 256
EXACT_CHUNK_PATTERNS = 1 << 15
# Swapped sums closer than TIE_RTOL * S * max|score| are ties; rounding of a sum stays far below it
TIE_RTOL = 1e-12

SystemRef = Union[int, str]


@dataclass(frozen=True, eq=False)
class SignMatrix:
    """Shared paired-permutation cache.

    Row 0 is the observed assignment (all +1); rows 1..B are random swaps.
    """

    signs: np.ndarray = field(repr=False)
    seed: int
    coordinates: Tuple[int, ...] = ()

    @property
    def n_perms(self) -> int:
        return self.signs.shape[0] - 1

    @property
    def n_segments(self) -> int:
        return self.signs.shape[1]

    def negated(self) -> np.ndarray:
        """Float 0/1 mask of swapped segments, shape (B + 1, S)."""
        return (self.signs < 0).astype(np.float64)


@dataclass(frozen=True, eq=False)
class SystemProjection:
    """Per-system sums of the scores each sign row swaps.

    swapped[i, b] sums scores[i, s] over the segments negated in row b, so that
    proj[i, b] = totals[i] - 2 * swapped[i, b] = sum_s signs[b, s] * scores[i, s].
    magnitudes[i] = S * max|scores[i]| scales the tie tolerance of row i.
    """

    swapped: np.ndarray = field(repr=False)
    totals: np.ndarray = field(repr=False)
    magnitudes: np.ndarray = field(repr=False)
    system_names: Tuple[str, ...]
    n_segments: int

    @property
    def n_perms(self) -> int:
        return self.swapped.shape[1] - 1

    @property
    def proj(self) -> np.ndarray:
        return self.totals[:, None] - 2.0 * self.swapped

    def select_systems(self, indices: Sequence[int]) -> "SystemProjection":
        idx = list(indices)
        return SystemProjection(
            self.swapped[idx],
            self.totals[idx],
            self.magnitudes[idx],
            tuple(self.system_names[i] for i in idx),
            self.n_segments,
        )


@dataclass(frozen=True, eq=False)
class PValueMatrix:
    """p[i, j]: one-tailed p-value for "system i is better than system j"."""

    p: np.ndarray = field(repr=False)
    system_names: Tuple[str, ...]

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] != len(self.system_names):
            raise ValueError(f"p-value matrix shape {p.shape} does not match {len(self.system_names)} systems")
        if np.any((p < 0) | (p > 1)):
            raise ValueError("p-values must lie in [0, 1]")
        p.flags.writeable = False
        object.__setattr__(self, "p", p)

    @property
    def n_systems(self) -> int:
        return self.p.shape[0]

    def upper(self) -> np.ndarray:
        """p-values of the pairs i < j, in row-major order."""
        return self.p[np.triu_indices(self.n_systems, k=1)]

    def select_systems(self, indices: Sequence[int]) -> "PValueMatrix":
        idx = np.asarray(list(indices))
        return PValueMatrix(self.p[np.ix_(idx, idx)], tuple(self.system_names[i] for i in idx))


@dataclass(frozen=True, eq=False)
class EvalProjection:
    """Human and metric projections of one test set on a single shared SignMatrix."""

    name: str
    sign_matrix: SignMatrix
    human: SystemProjection
    metrics: Dict[str, SystemProjection]

    @property
    def system_names(self) -> Tuple[str, ...]:
        return self.human.system_names


def generate_sign_matrix(
    seed: int,
    n_perms: int,
    n_segments: int,
    coordinates: Sequence[int] = (),
    threads: int = 1,
) -> SignMatrix:
    """
    Builds the shared sign cache; a pure function of (seed, coordinates, n_perms, n_segments).

    Args:
        seed: master seed (non-negative)
        n_perms: number of random rows B
        n_segments: number of segments S
        coordinates: extra key coordinates, e.g. (sample size, trial) for bootstrap replicates
        threads: worker threads for chunked generation

    Returns:
        SignMatrix: (B + 1) x S matrix of int8 signs
    """
    if n_perms < 1 or n_segments < 1:
        raise ValueError(f"n_perms and n_segments must be >= 1, got B={n_perms}, S={n_segments}")
    key = derive_key(seed, *coordinates)
    starts = range(0, n_perms, SIGN_CHUNK_ROWS)

    def _chunk(start: int) -> np.ndarray:
        return random_bit_rows(key, start, min(SIGN_CHUNK_ROWS, n_perms - start), n_segments)

    bits = np.concatenate(thread_map(_chunk, starts, threads), axis=0)
    signs = np.empty((n_perms + 1, n_segments), dtype=np.int8)
    signs[0] = 1
    signs[1:] = np.where(bits, 1, -1)
    signs.flags.writeable = False
    logger.debug("Generated sign matrix: B=%d, S=%d, seed=%d, coordinates=%s", n_perms, n_segments, seed, coordinates)
    return SignMatrix(signs, int(seed), tuple(int(c) for c in coordinates))


def _project(scores: np.ndarray, negated: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Identical score rows share one computed row, so their swapped sums are bit-identical
    unique_rows, inverse = np.unique(scores, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    swapped = (unique_rows @ negated.T)[inverse]
    totals = unique_rows.sum(axis=1)[inverse]
    magnitudes = scores.shape[1] * np.abs(scores).max(axis=1)
    return swapped, totals, magnitudes


def _projection(m: ScoreMatrix, negated: np.ndarray) -> SystemProjection:
    return SystemProjection(*_project(m.scores, negated), m.system_names, m.n_segments)


def _mid_p_counts(excess: np.ndarray, tolerance: Union[float, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Counts of permuted statistics above the observed one and tied with it, along the last axis."""
    greater = np.count_nonzero(excess > tolerance, axis=-1)
    ties = np.count_nonzero(np.abs(excess) <= tolerance, axis=-1)
    return greater, ties


def project_systems(m: ScoreMatrix, sm: SignMatrix) -> SystemProjection:
    """
    Per-system dot products with every sign row, so each pair costs a subtraction.

    Args:
        m: score matrix with S segments
        sm: sign matrix over the same S segments

    Returns:
        SystemProjection: N x (B + 1) projections
    """
    if sm.n_segments != m.n_segments:
        raise ValueError(f"sign matrix covers {sm.n_segments} segments, score matrix has {m.n_segments}")
    return _projection(m, sm.negated())


def project_eval_set(eval_set: EvalSet, sm: SignMatrix) -> EvalProjection:
    """Projects the human scores and every metric on the same cache."""
    negated = sm.negated()
    if sm.n_segments != len(eval_set.segment_ids):
        raise ValueError(f"sign matrix covers {sm.n_segments} segments, evalset has {len(eval_set.segment_ids)}")
    return EvalProjection(
        eval_set.name,
        sm,
        _projection(eval_set.human, negated),
        {name: _projection(matrix, negated) for name, matrix in eval_set.metrics.items()},
    )


def _mid_p_rows(x: SystemProjection, idx: np.ndarray, y: SystemProjection) -> np.ndarray:
    # Permuted minus observed difference is 2 * (swapped_j - swapped_i): rows 1..B only
    excess = y.swapped[None, :, 1:] - x.swapped[idx, None, 1:]
    tolerance = TIE_RTOL * np.maximum(x.magnitudes[idx, None], y.magnitudes[None, :])
    greater, ties = _mid_p_counts(excess, tolerance[..., None])
    return (greater + 0.5 * ties) / excess.shape[-1]


def cross_p_values(proj_x: SystemProjection, proj_y: SystemProjection, threads: int = 1) -> np.ndarray:
    """
    Mid-p values for "row i of x is better than row j of y" on a shared cache.

    Args:
        proj_x: projection whose rows are the first system of each pair
        proj_y: projection over the same cache whose rows are the second system
        threads: worker threads, one block of rows each

    Returns:
        np.ndarray: N_x x N_y matrix of p-values
    """
    if proj_x.n_perms != proj_y.n_perms or proj_x.n_segments != proj_y.n_segments:
        raise ValueError("projections were not computed on the same sign matrix")
    if proj_x.n_perms < 1:
        raise ValueError("at least one random permutation is required")
    n_rows = len(proj_x.system_names)
    blocks = np.array_split(np.arange(n_rows), max(1, min(threads, n_rows)))
    rows = thread_map(lambda idx: _mid_p_rows(proj_x, idx, proj_y), blocks, threads)
    return np.concatenate(rows, axis=0)


def pairwise_p_values(proj: SystemProjection, threads: int = 1) -> PValueMatrix:
    """
    One-tailed mid-p values for every ordered pair of systems.

    For i < j, p[i, j] counts permuted differences above the observed one, ties at half weight.
    The lower triangle is the exact complement so that p[i, j] + p[j, i] == 1.

    Args:
        proj: system projection with B >= 1 random rows
        threads: worker threads

    Returns:
        PValueMatrix: N x N p-values with 0.5 on the diagonal
    """
    p = cross_p_values(proj, proj, threads)
    n = p.shape[0]
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    p = np.where(upper, p, 1.0 - p.T)
    np.fill_diagonal(p, 0.5)
    return PValueMatrix(p, proj.system_names)


def _system_index(m: ScoreMatrix, system: SystemRef) -> int:
    if isinstance(system, str):
        if system not in m.system_names:
            raise ValueError(f"unknown system '{system}'")
        return m.system_names.index(system)
    if not 0 <= system < m.n_systems:
        raise ValueError(f"system index {system} out of range for {m.n_systems} systems")
    return int(system)


def exact_pairwise_p_value(m: ScoreMatrix, i: SystemRef, j: SystemRef) -> float:
    """
    Exact mid-p value over all 2^S paired sign patterns (S <= MAX_EXACT_SEGMENTS).

    The observed pattern is one of the enumerated ones, and the projection goes through the same
    code path as the cached engine, so ties are detected identically.
    """
    n_segments = m.n_segments
    if n_segments > cfg.MAX_EXACT_SEGMENTS:
        raise ValueError(f"exact enumeration is limited to {cfg.MAX_EXACT_SEGMENTS} segments, got {n_segments}")
    rows = m.scores[[_system_index(m, i), _system_index(m, j)]]
    n_patterns = 1 << n_segments
    bit_positions = np.arange(n_segments, dtype=np.int64)
    greater, ties = 0, 0
    for start in range(0, n_patterns, EXACT_CHUNK_PATTERNS):
        codes = np.arange(start, min(start + EXACT_CHUNK_PATTERNS, n_patterns), dtype=np.int64)
        negated = ((codes[:, None] >> bit_positions) & 1).astype(np.float64)
        swapped, _, magnitudes = _project(rows, negated)
        above, tied = _mid_p_counts(swapped[1] - swapped[0], TIE_RTOL * magnitudes.max())
        greater += int(above)
        ties += int(tied)
    return (greater + 0.5 * ties) / n_patterns


def naive_pair_p_value(
    m: ScoreMatrix, i: SystemRef, j: SystemRef, seed: int, n_perms: int = cfg.DEFAULT_PERMS
) -> float:
    """
    Reference paired permutation test drawing fresh swaps for this pair only.

    Same statistic and tie convention as the cached engine; used for cross-validation and benchmarks.
    """
    if n_perms < 1:
        raise ValueError(f"n_perms must be >= 1, got {n_perms}")
    a, b = _system_index(m, i), _system_index(m, j)
    x, y = m.scores[a], m.scores[b]
    observed = x.mean() - y.mean()
    swap = stream(seed, NAIVE_SWAPS, a, b).integers(0, 2, size=(n_perms, m.n_segments), dtype=np.int8).astype(bool)
    perm_x = np.where(swap, y, x)
    perm_y = np.where(swap, x, y)
    diffs = perm_x.mean(axis=1) - perm_y.mean(axis=1)
    # Same relative tie tolerance as the cached engine, in units of mean differences
    tolerance = 2.0 * TIE_RTOL * max(np.abs(x).max(), np.abs(y).max())
    greater, ties = _mid_p_counts(diffs - observed, tolerance)
    return (greater + 0.5 * ties) / n_perms


def naive_p_value_matrix(m: ScoreMatrix, seed: int, n_perms: int = cfg.DEFAULT_PERMS) -> PValueMatrix:
    """Full p-value matrix with one independent naive test per pair."""
    n = m.n_systems
    p = np.full((n, n), 0.5)
    for a in range(n):
        for b in range(a + 1, n):
            p[a, b] = naive_pair_p_value(m, a, b, seed, n_perms)
            p[b, a] = 1.0 - p[a, b]
    return PValueMatrix(p, m.system_names)


def eval_p_values(projection: EvalProjection, threads: int = 1) -> Tuple[PValueMatrix, Dict[str, PValueMatrix]]:
    """Human and per-metric p-value matrices of a projected test set."""
    human = pairwise_p_values(projection.human, threads)
    metrics = {name: pairwise_p_values(proj, threads) for name, proj in projection.metrics.items()}
    return human, metrics
