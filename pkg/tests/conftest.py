from pathlib import Path
from typing import List, Sequence

import numpy as np
import pytest

from utils.data import EvalSet, ScoreMatrix, write_eval_set
from utils.permutations import PValueMatrix
from utils.synthetic import make_synthetic_eval_set


def write_tsv(path: Path, header: Sequence[str], rows: List[Sequence[object]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["\t".join(header)] + ["\t".join(str(cell) for cell in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def p_matrix(upper: Sequence[float], n_systems: int) -> PValueMatrix:
    """Full p-value matrix from its upper triangle (row-major), lower triangle = 1 - p."""
    p = np.full((n_systems, n_systems), 0.5)
    rows, cols = np.triu_indices(n_systems, k=1)
    p[rows, cols] = upper
    p[cols, rows] = 1.0 - np.asarray(upper)
    return PValueMatrix(p, tuple(f"sys{i}" for i in range(n_systems)))


def random_p_matrix(rng: np.random.Generator, n_systems: int) -> PValueMatrix:
    return p_matrix(rng.uniform(0.0, 1.0, size=n_systems * (n_systems - 1) // 2), n_systems)


@pytest.fixture(scope="session")
def small_eval_set() -> EvalSet:
    return make_synthetic_eval_set(n_systems=6, n_segments=60, n_metrics=3, seed=1, name="small")


@pytest.fixture()
def self_eval_set(small_eval_set) -> EvalSet:
    """Small set with an extra metric that is an exact copy of the human scores."""
    metrics = dict(small_eval_set.metrics)
    metrics["human_copy"] = ScoreMatrix(
        small_eval_set.system_names, small_eval_set.segment_ids, small_eval_set.human.scores.copy()
    )
    return EvalSet("self", small_eval_set.human, metrics)


@pytest.fixture()
def evalset_dir(tmp_path, small_eval_set) -> Path:
    directory = tmp_path / small_eval_set.name
    write_eval_set(small_eval_set, directory)
    return directory


@pytest.fixture()
def handmade_dir(tmp_path) -> Path:
    """Three systems, four segments; humans have NA on seg3, the metric is lower-is-better."""
    directory = tmp_path / "handmade"
    write_tsv(
        directory / "humans.tsv",
        ["segment_id", "sysB", "sysA", "sysC"],
        [["seg1", 0.5, 0.25, 1], ["seg2", 1.5, 2, -1], ["seg3", "NA", 1, 1], ["seg4", 3, 0, 2]],
    )
    write_tsv(
        directory / "metrics" / "ter.tsv",
        ["segment_id", "sysA", "sysC", "sysB"],
        [["seg4", 0.1, 0.2, 0.3], ["seg3", "NA", "NA", "NA"], ["seg2", 0.4, 0.5, 0.6], ["seg1", 0.7, 0.8, 0.9]],
    )
    (directory / "meta.json").write_text('{"metrics/ter.tsv": {"higher_is_better": false}}\n', encoding="utf-8")
    return directory
