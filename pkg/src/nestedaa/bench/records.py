"""Per-datapoint run records and their CSV form.

Floats are quantized to 12 significant digits when a record is built, so a
record read back from CSV compares equal to the one written and every
aggregate computed from either is identical.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional

CSV_COLUMNS = (
    "instance_id",
    "n",
    "corr_type",
    "range_r",
    "tightness_s",
    "capweight",
    "protocol",
    "seed",
    "bias_b",
    "lambda",
    "L",
    "depth_policy",
    "k",
    "r_in",
    "C_total",
    "C_inner",
    "C_outer",
    "y_greedy",
    "y_final",
    "y_star",
    "alpha",
    "gamma",
    "c_rel",
)

_INT_COLS = {"n", "range_r", "tightness_s", "seed", "L", "k", "r_in", "y_greedy", "y_final", "y_star"}
_FLOAT_COLS = {"capweight", "bias_b", "lambda", "C_total", "C_inner", "C_outer", "alpha", "gamma", "c_rel"}


def quantize(x: Optional[float]) -> Optional[float]:
    return None if x is None else float(format(float(x), ".12g"))


def format_float(x: float) -> str:
    return format(float(x), ".12g")


@dataclass
class RunRecord:
    instance_id: str
    n: int
    corr_type: str
    range_r: int
    tightness_s: int
    capweight: float
    protocol: str
    seed: int
    bias_b: float
    lam: float
    L: Optional[int]
    depth_policy: Optional[str]
    k: Optional[int]
    r_in: Optional[int]
    C_total: float
    C_inner: float
    C_outer: float
    y_greedy: int
    y_final: int
    y_star: int
    alpha: float
    gamma: Optional[float]
    c_rel: Optional[float] = None
    trajectory: list[tuple[float, int]] = field(default_factory=list, compare=False, repr=False)

    def __post_init__(self):
        for name in _FLOAT_COLS:
            attr = "lam" if name == "lambda" else name
            setattr(self, attr, quantize(getattr(self, attr)))

    def row(self) -> dict[str, str]:
        out = {}
        for col in CSV_COLUMNS:
            value = getattr(self, "lam" if col == "lambda" else col)
            if value is None:
                out[col] = ""
            elif col in _FLOAT_COLS:
                out[col] = format_float(value)
            else:
                out[col] = str(value)
        return out

    @classmethod
    def from_row(cls, row: dict[str, str]) -> "RunRecord":
        kwargs = {}
        for col in CSV_COLUMNS:
            raw = row[col]
            attr = "lam" if col == "lambda" else col
            if raw == "":
                kwargs[attr] = None
            elif col in _INT_COLS:
                kwargs[attr] = int(raw)
            elif col in _FLOAT_COLS:
                kwargs[attr] = float(raw)
            else:
                kwargs[attr] = raw
        return cls(**kwargs)


def write_csv(records: Iterable[RunRecord], fh: IO[str]) -> None:
    writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow(rec.row())


def read_csv(fh: IO[str]) -> list[RunRecord]:
    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    return [RunRecord.from_row(row) for row in reader]


def to_csv_text(records: Iterable[RunRecord]) -> str:
    buf = io.StringIO()
    write_csv(records, buf)
    return buf.getvalue()

