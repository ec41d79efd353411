"""
Run harness: configuration, dispatch, append-only registry and reports
"""

from .config import RunConfig, SweepSpec, Sectors, apply_overrides, load_config, load_thresholds
from .registry import Registry, RunRecord
from .report import ReportBundle, report
from .runner import parallel_map, recompute_verdicts, run

__all__ = [
    "RunConfig",
    "SweepSpec",
    "Sectors",
    "apply_overrides",
    "load_config",
    "load_thresholds",
    "Registry",
    "RunRecord",
    "ReportBundle",
    "report",
    "parallel_map",
    "recompute_verdicts",
    "run",
]
