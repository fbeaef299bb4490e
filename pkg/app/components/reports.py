# Copyright (C) 2024-2025, Pyronear.

# This program is licensed under the Apache License 2.0.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0> for full license details.

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import pandas as pd

__all__ = ["BREAKDOWN_SECTION", "FORMATS", "Report", "render_report", "write_report"]

FORMATS = ("tsv", "csv", "json")
BREAKDOWN_SECTION = "breakdown"
_SEPARATORS = {"tsv": "\t", "csv": ","}


@dataclass
class Report:
    """Output of one command: metadata, scalar summary values and named tables, in display order."""

    command: str
    metadata: Dict[str, Any]
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)
    ok: bool = True


def _comment_lines(values: Dict[str, Any]) -> str:
    return "".join(f"# {key}={'' if value is None else value}\n" for key, value in values.items())


def _render_delimited(report: Report, sep: str) -> str:
    out = _comment_lines(report.metadata) + _comment_lines(report.summary)
    for i, (name, table) in enumerate(report.tables.items()):
        # Single-table reports stay directly loadable with `comment="#"`
        if len(report.tables) > 1:
            out += ("\n" if i else "") + f"# [{name}]\n"
        out += table.to_csv(sep=sep, index=False, lineterminator="\n")
    return out


def _render_json(report: Report) -> str:
    payload: Dict[str, Any] = {"meta": report.metadata}
    payload.update(report.summary)
    for name, table in report.tables.items():
        payload[name] = table.to_dict(orient="records")
    return json.dumps(payload, indent=2, allow_nan=False) + "\n"


def render_report(report: Report, fmt: str) -> str:
    """
    Serializes a report. Nothing run-dependent besides the metadata block is written, so identical
    inputs give byte-identical output.

    Args:
        report: report to render
        fmt: one of "tsv", "csv", "json"

    Returns:
        str: the rendered report
    """
    if fmt == "json":
        return _render_json(report)
    if fmt not in _SEPARATORS:
        raise ValueError(f"unknown output format '{fmt}', expected one of {FORMATS}")
    return _render_delimited(report, _SEPARATORS[fmt])


def write_report(report: Report, fmt: str, output: Optional[str] = None) -> None:
    """Writes a report to `output` (stdout when None).

    With an output file, the breakdown table goes to a sibling `<output>.breakdown.csv`.
    """
    if output is None:
        sys.stdout.write(render_report(report, fmt))
        return
    tables = dict(report.tables)
    breakdown = tables.pop(BREAKDOWN_SECTION, None)
    main = Report(report.command, report.metadata, tables, report.summary, report.ok)
    Path(output).write_text(render_report(main, fmt), encoding="utf-8")
    if breakdown is not None:
        sibling = Report(report.command, report.metadata, {BREAKDOWN_SECTION: breakdown})
        Path(f"{output}.{BREAKDOWN_SECTION}.csv").write_text(render_report(sibling, "csv"), encoding="utf-8")
