# Copyright (C) 2024-2025, Pyronear.

# This program is licensed under the Apache License 2.0.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0> for full license details.

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

import config as cfg

__all__ = [
    "EvalDataError",
    "EvalSet",
    "ScoreMatrix",
    "load_eval_set",
    "load_score_matrix",
    "system_means",
    "write_eval_set",
]

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class EvalDataError(ValueError):
    """Malformed or inconsistent evaluation-set file."""

    def __init__(self, message: str, path: Optional[PathLike] = None, line: Optional[int] = None):
        self.path = str(path) if path is not None else None
        self.line = line
        location = ""
        if self.path is not None:
            location = f"{self.path}:{line}: " if line is not None else f"{self.path}: "
        super().__init__(f"{location}{message}")


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """Systems x segments segment-level scores, higher-is-better.

    Args:
        system_names: ordered, unique system identifiers (one per row)
        segment_ids: ordered, unique segment identifiers (one per column)
        scores: dense float64 array of shape (N, S)
    """

    system_names: Tuple[str, ...]
    segment_ids: Tuple[str, ...]
    scores: np.ndarray = field(repr=False)

    def __post_init__(self):
        scores = np.array(self.scores, dtype=np.float64)
        if scores.ndim != 2:
            raise ValueError(f"scores must be a 2D array, got shape {scores.shape}")
        if scores.shape != (len(self.system_names), len(self.segment_ids)):
            raise ValueError(
                f"scores shape {scores.shape} does not match "
                f"{len(self.system_names)} systems x {len(self.segment_ids)} segments"
            )
        if len(self.system_names) < 2:
            raise ValueError(f"at least 2 systems are required, got {len(self.system_names)}")
        if len(self.segment_ids) < 1:
            raise ValueError("at least 1 segment is required")
        if len(set(self.system_names)) != len(self.system_names):
            raise ValueError("system names must be unique")
        if len(set(self.segment_ids)) != len(self.segment_ids):
            raise ValueError("segment ids must be unique")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite (complete-case)")
        scores.flags.writeable = False
        object.__setattr__(self, "system_names", tuple(self.system_names))
        object.__setattr__(self, "segment_ids", tuple(self.segment_ids))
        object.__setattr__(self, "scores", scores)

    @property
    def n_systems(self) -> int:
        return self.scores.shape[0]

    @property
    def n_segments(self) -> int:
        return self.scores.shape[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScoreMatrix):
            return NotImplemented
        return (
            self.system_names == other.system_names
            and self.segment_ids == other.segment_ids
            and np.array_equal(self.scores, other.scores)
        )

    def __hash__(self) -> int:
        return hash((self.system_names, self.segment_ids, self.scores.tobytes()))

    def select_systems(self, indices: Sequence[int]) -> "ScoreMatrix":
        idx = list(indices)
        return ScoreMatrix(tuple(self.system_names[i] for i in idx), self.segment_ids, self.scores[idx])

    def select_segments(self, indices: Sequence[int]) -> "ScoreMatrix":
        """Column selection; repeated indices get suffixed ids so they stay unique."""
        idx = list(indices)
        seen: Dict[str, int] = {}
        ids = []
        for i in idx:
            sid = self.segment_ids[i]
            count = seen.get(sid, 0)
            seen[sid] = count + 1
            ids.append(sid if count == 0 else f"{sid}#{count}")
        return ScoreMatrix(self.system_names, tuple(ids), self.scores[:, idx])

    def affine(self, scale: float, shift: float = 0.0) -> "ScoreMatrix":
        return ScoreMatrix(self.system_names, self.segment_ids, scale * self.scores + shift)

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.scores.T, columns=list(self.system_names))
        df.insert(0, cfg.SEGMENT_COLUMN, list(self.segment_ids))
        return df


@dataclass(frozen=True, eq=False)
class EvalSet:
    """Human judgments and metric scores of one test set, aligned on systems and segments."""

    name: str
    human: ScoreMatrix
    metrics: Mapping[str, ScoreMatrix]

    def __post_init__(self):
        if len(self.metrics) == 0:
            raise ValueError("an EvalSet needs at least one metric")
        for metric_name, matrix in self.metrics.items():
            if matrix.system_names != self.human.system_names or matrix.segment_ids != self.human.segment_ids:
                raise ValueError(f"metric '{metric_name}' is not aligned with the human scores")
        object.__setattr__(self, "metrics", dict(sorted(self.metrics.items())))

    @property
    def system_names(self) -> Tuple[str, ...]:
        return self.human.system_names

    @property
    def segment_ids(self) -> Tuple[str, ...]:
        return self.human.segment_ids

    @property
    def metric_names(self) -> List[str]:
        return list(self.metrics)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EvalSet):
            return NotImplemented
        return (
            self.name == other.name
            and self.human == other.human
            and list(self.metrics) == list(other.metrics)
            and all(self.metrics[k] == other.metrics[k] for k in self.metrics)
        )

    def __hash__(self) -> int:
        return hash((self.name, self.human, tuple(self.metrics.items())))

    def metric(self, name: str) -> ScoreMatrix:
        if name not in self.metrics:
            raise ValueError(f"unknown metric '{name}', available: {', '.join(self.metrics)}")
        return self.metrics[name]

    def select_systems(self, indices: Sequence[int]) -> "EvalSet":
        return EvalSet(
            self.name,
            self.human.select_systems(indices),
            {k: v.select_systems(indices) for k, v in self.metrics.items()},
        )

    def select_segments(self, indices: Sequence[int]) -> "EvalSet":
        return EvalSet(
            self.name,
            self.human.select_segments(indices),
            {k: v.select_segments(indices) for k, v in self.metrics.items()},
        )


def system_means(m: ScoreMatrix) -> np.ndarray:
    """System-level scores, i.e. the mean of each row's segment scores."""
    return m.scores.mean(axis=1)


def _scan_layout(path: Path) -> Tuple[List[str], List[int]]:
    """
    Checks encoding, line endings and cell counts of a score file.

    Returns:
        the system names of the header and the 1-based line number of every data row
    """
    try:
        with path.open("r", encoding="utf-8", newline="") as f:
            lines = f.read().split("\n")
    except UnicodeDecodeError as e:
        raise EvalDataError(f"not valid UTF-8 (byte {e.start})", path)
    for number, line in enumerate(lines, start=1):
        if line.endswith("\r"):
            raise EvalDataError("CRLF line endings are not supported, convert the file to LF", path, number)

    header = lines[0].split("\t")
    if header[0] != cfg.SEGMENT_COLUMN:
        raise EvalDataError(f"first header cell must be '{cfg.SEGMENT_COLUMN}', got '{header[0]}'", path, 1)
    systems = header[1:]
    if len(systems) == 0:
        raise EvalDataError("header lists no systems", path, 1)
    dupes = sorted({s for s in systems if systems.count(s) > 1})
    if dupes:
        raise EvalDataError(f"duplicate system names in header: {', '.join(dupes)}", path, 1)

    # Empty lines are skipped by the parser as well
    rows = []
    for number, line in enumerate(lines[1:], start=2):
        if line == "":
            continue
        n_cells = line.count("\t") + 1
        if n_cells != len(header):
            raise EvalDataError(f"expected {len(header)} cells, got {n_cells}", path, number)
        rows.append(number)
    return systems, rows


def load_score_matrix(path: PathLike, higher_is_better: bool = True) -> pd.DataFrame:
    """
    Parses one score file into a segments x systems frame of float64, NA kept as NaN.

    Args:
        path: TSV file whose first header cell is `segment_id`
        higher_is_better: scores are negated when False

    Returns:
        pd.DataFrame: indexed by segment id, one column per system
    """
    path = Path(path)
    if not path.is_file():
        raise EvalDataError("missing file", path)
    systems, line_numbers = _scan_layout(path)
    try:
        raw = pd.read_csv(
            path,
            sep="\t",
            dtype=str,
            keep_default_na=False,
            na_filter=False,
            encoding="utf-8",
            header=0,
            names=[cfg.SEGMENT_COLUMN, *systems],
            index_col=False,
        )
    except pd.errors.ParserError as e:
        raise EvalDataError(f"malformed TSV: {e}", path)
    lines = np.asarray(line_numbers, dtype=np.int64)

    dup_mask = raw[cfg.SEGMENT_COLUMN].duplicated()
    if dup_mask.any():
        first = int(np.flatnonzero(dup_mask.to_numpy())[0])
        raise EvalDataError(f"duplicate segment id '{raw[cfg.SEGMENT_COLUMN].iloc[first]}'", path, int(lines[first]))

    cells = raw[systems]
    missing = cells == cfg.MISSING_VALUE
    values = cells.apply(pd.to_numeric, errors="coerce")
    bad = (values.isna() & ~missing) | ~np.isfinite(values.fillna(0.0))
    if bad.to_numpy().any():
        row, col = map(int, np.argwhere(bad.to_numpy())[0])
        raise EvalDataError(
            f"non-numeric cell '{cells.iat[row, col]}' for system '{systems[col]}'", path, int(lines[row])
        )

    # Python float parsing reads shortest-repr output back exactly
    values = pd.DataFrame(
        cells.mask(missing, "nan").to_numpy(dtype=str).astype(np.float64),
        columns=systems,
        index=pd.Index(raw[cfg.SEGMENT_COLUMN], name=cfg.SEGMENT_COLUMN),
    )
    values.attrs["lines"] = dict(zip(raw[cfg.SEGMENT_COLUMN], lines.tolist()))
    if not higher_is_better:
        values = -values
    return values


def _read_orientation(directory: Path) -> Dict[str, bool]:
    meta_path = directory / cfg.META_FILE
    if not meta_path.is_file():
        return {}
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except UnicodeDecodeError as e:
        raise EvalDataError(f"not valid UTF-8 (byte {e.start})", meta_path)
    except json.JSONDecodeError as e:
        raise EvalDataError(f"invalid JSON: {e.msg}", meta_path, e.lineno)
    if not isinstance(meta, dict):
        raise EvalDataError("expected a JSON object mapping file names to settings", meta_path)
    orientation = {}
    for file_name, settings in meta.items():
        if not isinstance(settings, dict) or not isinstance(settings.get("higher_is_better", True), bool):
            raise EvalDataError(f"invalid settings for '{file_name}'", meta_path)
        orientation[file_name] = settings.get("higher_is_better", True)
    return orientation


def _is_higher_better(orientation: Mapping[str, bool], relative: str) -> bool:
    # Keys may be given relative to the evalset root or as bare file names
    if relative in orientation:
        return orientation[relative]
    return orientation.get(Path(relative).name, True)


def load_eval_set(directory_path: PathLike, orientation: Optional[Mapping[str, bool]] = None) -> EvalSet:
    """
    Loads `humans.tsv` and `metrics/*.tsv` from an evaluation-set directory.

    Segments where the human file has NA for any system are dropped from every matrix. Systems are
    matched by header name and segments by id, so column and row order in metric files is irrelevant.

    Args:
        directory_path: evaluation-set directory
        orientation: per-file `higher_is_better` flags, overriding `meta.json`

    Returns:
        EvalSet: complete, aligned, higher-is-better matrices
    """
    directory = Path(directory_path)
    if not directory.is_dir():
        raise EvalDataError("evaluation-set directory not found", directory)
    flags = {**_read_orientation(directory), **(orientation or {})}

    human_path = directory / cfg.HUMAN_FILE
    human = load_score_matrix(human_path, _is_higher_better(flags, cfg.HUMAN_FILE))
    # Systems are ordered by name so that column order in any file is irrelevant
    systems = sorted(human.columns)
    human = human[systems]

    metric_paths = sorted((directory / cfg.METRICS_DIR).glob("*.tsv"))
    if len(metric_paths) == 0:
        raise EvalDataError(f"no metric files found in '{cfg.METRICS_DIR}/'", directory)

    complete = ~human.isna().any(axis=1)
    n_dropped = int((~complete).sum())
    if n_dropped:
        logger.info("Dropping %d segment(s) with incomplete human judgments", n_dropped)
    human = human[complete]
    if len(human) == 0:
        raise EvalDataError("no segment has complete human judgments", human_path)
    if len(systems) < 2:
        raise EvalDataError(f"at least 2 systems are required, got {len(systems)}", human_path, 1)

    metrics = {}
    for metric_path in metric_paths:
        relative = f"{cfg.METRICS_DIR}/{metric_path.name}"
        frame = load_score_matrix(metric_path, _is_higher_better(flags, relative))
        if set(frame.columns) != set(systems):
            missing = sorted(set(systems) - set(frame.columns))
            extra = sorted(set(frame.columns) - set(systems))
            raise EvalDataError(
                f"header mismatch with {cfg.HUMAN_FILE}: missing systems {missing}, unexpected systems {extra}",
                metric_path,
                1,
            )
        if set(frame.index) != set(complete.index):
            raise EvalDataError(f"segment ids differ from {cfg.HUMAN_FILE}", metric_path)
        aligned = frame.loc[human.index, systems]
        holes = aligned.isna().any(axis=1)
        if holes.any():
            segment = aligned.index[holes.to_numpy()][0]
            raise EvalDataError(
                f"NA on segment '{segment}' which has complete human judgments",
                metric_path,
                frame.attrs["lines"][segment],
            )
        metrics[metric_path.stem] = ScoreMatrix(tuple(systems), tuple(human.index), aligned.to_numpy().T)

    eval_set = EvalSet(directory.name, ScoreMatrix(tuple(systems), tuple(human.index), human.to_numpy().T), metrics)
    logger.debug(
        "Loaded evalset '%s': %d systems, %d segments, %d metrics",
        eval_set.name,
        len(systems),
        len(human),
        len(metrics),
    )
    return eval_set


def write_eval_set(eval_set: EvalSet, directory_path: PathLike) -> None:
    """Writes an EvalSet in the evaluation-set layout; every file is stored higher-is-better."""
    directory = Path(directory_path)
    (directory / cfg.METRICS_DIR).mkdir(parents=True, exist_ok=True)
    eval_set.human.to_frame().to_csv(directory / cfg.HUMAN_FILE, sep="\t", index=False, lineterminator="\n")
    meta = {cfg.HUMAN_FILE: {"higher_is_better": True}}
    for name, matrix in eval_set.metrics.items():
        relative = f"{cfg.METRICS_DIR}/{name}.tsv"
        matrix.to_frame().to_csv(directory / relative, sep="\t", index=False, lineterminator="\n")
        meta[relative] = {"higher_is_better": True}
    (directory / cfg.META_FILE).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
