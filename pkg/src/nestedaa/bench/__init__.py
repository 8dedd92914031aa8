"""Experiment drivers, metrics, CSV/SVG output and the command line."""

from .experiments import (
    ProtocolParams,
    SweepSpec,
    capweight_sweep,
    optgap_experiment,
    rvtr_sweep,
)
from .metrics import approximation_ratio, optimality_gap
from .records import RunRecord, read_csv, write_csv

__all__ = [
    "ProtocolParams",
    "RunRecord",
    "SweepSpec",
    "approximation_ratio",
    "capweight_sweep",
    "optgap_experiment",
    "optimality_gap",
    "read_csv",
    "rvtr_sweep",
    "write_csv",
]
