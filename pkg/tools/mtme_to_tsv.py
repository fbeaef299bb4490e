# Copyright (C) 2024-2025, Pyronear.

# This program is licensed under the Apache License 2.0.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0> for full license details.

"""Converts one MT Metrics Eval V2 test set into the evaluation-set layout read by `app/index.py`.

    python tools/mtme_to_tsv.py ~/.mt-metrics-eval/mt-metrics-eval-v2 wmt22 en-de data/wmt22-en-de
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd

logger = logging.getLogger("mtme_to_tsv")

SEG_SUFFIX = ".seg.score"
QE_VARIANT = "src"
MISSING = ("None", "")


def read_seg_scores(path: Path) -> pd.DataFrame:
    """Segments x systems frame of a `<system>\\t<score>` file listing every system's segments in order."""
    raw = pd.read_csv(
        path,
        sep="\t",
        header=None,
        names=["system", "score"],
        dtype=str,
        keep_default_na=False,
        quoting=csv.QUOTE_NONE,
    )
    counts = raw["system"].value_counts()
    if counts.nunique() != 1:
        raise ValueError(f"{path}: systems list different numbers of segments")
    raw["segment"] = raw.groupby("system").cumcount()
    frame = raw.pivot(index="segment", columns="system", values="score")
    return frame.mask(frame.isin(MISSING), "NA")


def _write(frame: pd.DataFrame, segment_ids: List[str], path: Path) -> None:
    out = frame.reset_index(drop=True)
    out.insert(0, "segment_id", segment_ids)
    out.to_csv(path, sep="\t", index=False, lineterminator="\n", quoting=csv.QUOTE_NONE)


def convert(
    root: Path,
    testset: str,
    lang_pair: str,
    output: Path,
    human: str = "mqm",
    ref: str = "refA",
    include_qe: bool = False,
    metrics: Optional[Sequence[str]] = None,
    exclude: Sequence[str] = (),
) -> Dict[str, int]:
    """
    Writes `humans.tsv`, `metrics/<metric>.tsv` and `meta.json` under `output`.

    Systems are those with at least one human score, minus `exclude`. Reference-based metrics are read
    from their `-<ref>` files; reference-free ones (`-src`) only with `include_qe`. A metric that does not
    cover every kept system is skipped.

    Returns:
        Dict[str, int]: numbers of systems, segments and metrics written
    """
    base = Path(root) / testset
    humans = read_seg_scores(base / "human-scores" / f"{lang_pair}.{human}{SEG_SUFFIX}")
    systems = sorted(s for s in humans.columns if (humans[s] != "NA").any() and s not in set(exclude))
    if len(systems) < 2:
        raise ValueError(f"fewer than 2 annotated systems in {testset} {lang_pair} ({human})")
    segment_ids = [f"seg{i:05d}" for i in range(len(humans))]

    out = Path(output)
    (out / "metrics").mkdir(parents=True, exist_ok=True)
    _write(humans[systems], segment_ids, out / "humans.tsv")
    meta = {"humans.tsv": {"higher_is_better": True}}

    variants = {ref, QE_VARIANT} if include_qe else {ref}
    for path in sorted((base / "metric-scores" / lang_pair).glob(f"*{SEG_SUFFIX}")):
        metric, _, variant = path.name[: -len(SEG_SUFFIX)].rpartition("-")
        if variant not in variants or (metrics is not None and metric not in metrics):
            continue
        frame = read_seg_scores(path)
        missing = sorted(set(systems) - set(frame.columns))
        if missing or len(frame) != len(humans):
            logger.warning("Skipping %s: missing systems %s, %d segments", path.name, missing, len(frame))
            continue
        _write(frame[systems], segment_ids, out / "metrics" / f"{metric}.tsv")
        meta[f"metrics/{metric}.tsv"] = {"higher_is_better": True}

    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    summary = {"systems": len(systems), "segments": len(segment_ids), "metrics": len(meta) - 1}
    logger.info("Wrote %s: %s", out, summary)
    return summary


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        description="MT Metrics Eval V2 to evaluation-set converter",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("root", type=Path, help="MT Metrics Eval V2 data directory")
    parser.add_argument("testset", type=str, help="test set, e.g. wmt22")
    parser.add_argument("lang_pair", type=str, help="language pair, e.g. en-de")
    parser.add_argument("output", type=Path, help="evaluation-set directory to write")
    parser.add_argument("--human", type=str, default="mqm", help="human score name")
    parser.add_argument("--ref", type=str, default="refA", help="reference used by reference-based metrics")
    parser.add_argument("--include-qe", action="store_true", help="also convert reference-free metrics")
    parser.add_argument("--metrics", nargs="+", default=None, help="metric names to keep (default: all)")
    parser.add_argument("--exclude", nargs="*", default=None, help="systems to drop (default: the reference)")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")
    exclude = [args.ref] if args.exclude is None else args.exclude
    try:
        convert(
            args.root,
            args.testset,
            args.lang_pair,
            args.output,
            human=args.human,
            ref=args.ref,
            include_qe=args.include_qe,
            metrics=args.metrics,
            exclude=exclude,
        )
    except (ValueError, OSError) as e:
        logger.error("Conversion failed: %s", e)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
