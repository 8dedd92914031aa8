"""Write experiment results as CSV tables and SVG figures."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Sequence

from .experiments import BinStat, GapStat, OptgapResult, SweepResult
from .records import RunRecord, format_float, write_csv

FORMATS = ("csv", "svg", "both")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if math.isnan(value) else format_float(value)
    return str(value)


def write_table(rows: Sequence[dict], path: Path, columns: Sequence[str] | None = None) -> Path:
    columns = list(columns or (rows[0].keys() if rows else []))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])
    return path


def write_records(records: Iterable[RunRecord], path: Path) -> Path:
    with open(path, "w", newline="") as fh:
        write_csv(records, fh)
    return path


def _bin_rows(stats: Sequence[BinStat]) -> list[dict]:
    return [asdict(s) for s in stats]


def emit_outputs(name: str, result, out_dir: Path, fmt: str = "csv") -> list[Path]:
    """``<name>_runs.csv``, ``<name>_points.csv``, ``<name>_summary.csv`` and/or ``<name>.svg``."""
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if isinstance(result, OptgapResult):
        summary_rows = [asdict(s) for s in result.summary]
        summary_cols = [f for f in GapStat.__dataclass_fields__]
    elif isinstance(result, SweepResult):
        summary_rows = _bin_rows(result.summary)
        summary_cols = [f for f in BinStat.__dataclass_fields__]
    else:
        raise TypeError(f"cannot emit {type(result).__name__}")
    if fmt in ("csv", "both"):
        written.append(write_records(result.records, out_dir / f"{name}_runs.csv"))
        written.append(write_table(result.points, out_dir / f"{name}_points.csv"))
        written.append(write_table(summary_rows, out_dir / f"{name}_summary.csv", summary_cols))
    if fmt in ("svg", "both"):
        from . import plots

        path = out_dir / f"{name}.svg"
        if isinstance(result, OptgapResult):
            written.append(plots.gap_figure(result.summary, path))
        else:
            xlabel = "capweight" if name.startswith("capweight") else "RVTR"
            written.append(plots.binned_figure(result.summary, xlabel, path))
    return written
