# Copyright (C) 2024-2025, Pyronear.

# This program is licensed under the Apache License 2.0.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0> for full license details.

import numpy as np

from utils.data import EvalSet, ScoreMatrix

__all__ = ["make_synthetic_eval_set", "make_uniform_score_matrix"]


def make_synthetic_eval_set(
    n_systems: int = 14,
    n_segments: int = 600,
    n_metrics: int = 20,
    seed: int = 0,
    name: str = "synthetic",
) -> EvalSet:
    """
    WMT-shaped test set: systems of graded quality, noisy human judgments and metrics of graded quality.

    Every segment has a latent quality per system (system quality + segment difficulty + translation
    noise). Humans observe it with mild noise; metric k adds a per-system bias and segment noise that
    both grow with k, then applies its own positive scale and offset.

    Args:
        n_systems: number of MT systems
        n_segments: number of segments per system
        n_metrics: number of metrics, from best (index 0) to worst
        seed: generator seed

    Returns:
        EvalSet: systems `sys00..`, metrics `metric00..`
    """
    rng = np.random.default_rng(seed)
    quality = np.sort(rng.normal(0.0, 0.25, size=n_systems))[::-1]
    difficulty = rng.normal(0.0, 1.0, size=n_segments)
    latent = quality[:, None] + difficulty[None, :] + rng.normal(0.0, 1.0, size=(n_systems, n_segments))
    human = latent + rng.normal(0.0, 0.5, size=latent.shape)

    systems = tuple(f"sys{i:02d}" for i in range(n_systems))
    segments = tuple(f"seg{s:04d}" for s in range(n_segments))
    noise_levels = np.linspace(0.5, 3.0, n_metrics)
    bias_levels = np.linspace(0.01, 0.15, n_metrics)
    metrics = {}
    for k in range(n_metrics):
        bias = rng.normal(0.0, bias_levels[k], size=(n_systems, 1))
        noisy = latent + bias + rng.normal(0.0, noise_levels[k], size=latent.shape)
        scale, offset = rng.uniform(0.5, 10.0), rng.uniform(-5.0, 5.0)
        metrics[f"metric{k:02d}"] = ScoreMatrix(systems, segments, scale * noisy + offset)
    return EvalSet(name, ScoreMatrix(systems, segments, human), metrics)


def make_uniform_score_matrix(n_systems: int = 4, n_segments: int = 10, seed: int = 0) -> ScoreMatrix:
    """i.i.d. uniform scores on [0, 1), the random instances of the exact-enumeration oracle."""
    rng = np.random.default_rng(seed)
    return ScoreMatrix(
        tuple(f"sys{i:02d}" for i in range(n_systems)),
        tuple(f"seg{s:04d}" for s in range(n_segments)),
        rng.uniform(0.0, 1.0, size=(n_systems, n_segments)),
    )
