"""
Report bundles

Collates registry records into a plot-ready CSV (ln lambda, ln norm and a
reference line with the predicted slope) and a JSON summary of verdicts.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

from ..core.exceptions import RegistryError
from ..utils.json_support import to_jsonable
from .registry import Registry, RunRecord

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["ln_lambda", "ln_norm", "ln_reference"]


@dataclass
class ReportBundle:
    records: List[RunRecord]
    summary: Dict[str, Any]
    csv_path: Path
    summary_path: Path

    @property
    def empty(self) -> bool:
        return not self.records


def _series(record: RunRecord) -> Iterable[Dict[str, Any]]:
    payload = record.payload
    for scan in payload.get("scans", []):
        yield from scan.get("series", [])
    yield from payload.get("series", [])


def _finite(value) -> Optional[float]:
    value = float(value)
    return value if math.isfinite(value) else None


def series_rows(series: Dict[str, Any]) -> List[List[float]]:
    """[ln lambda, ln norm, reference] with the reference through the first point"""
    points = [(_finite(x), _finite(y)) for x, y in zip(series["ln_lambda"], series["ln_norm"])]
    points = [(x, y) for x, y in points if x is not None and y is not None]
    if not points:
        return []
    x0, y0 = points[0]
    slope = float(series["predicted"])
    return [[x, y, y0 + slope * (x - x0)] for x, y in points]


def summarize(records: List[RunRecord]) -> Dict[str, Any]:
    by_kind: Dict[str, Dict[str, int]] = {}
    for record in records:
        counts = by_kind.setdefault(record.kind, {"total": 0, "passed": 0, "failed": 0})
        counts["total"] += 1
        counts["passed" if record.passed else "failed"] += 1
    return {
        "records": len(records),
        "passed": sum(r.passed for r in records),
        "failed": sum(not r.passed for r in records),
        "by_kind": by_kind,
        "verdicts": [{"id": r.record_id, "kind": r.kind, "k": r.config.get("k"),
                      "passed": r.passed, "checks": r.verdicts} for r in records],
    }


def report(registry: Registry, output_dir: Union[str, Path], kind: Optional[str] = None,
           k: Optional[int] = None, verdict: Optional[str] = None) -> ReportBundle:
    """
    Write report.csv and summary.json for the selected records.

    An empty selection still writes both files (header only / zero counts).
    """
    records = registry.select(kind=kind, k=k, verdict=verdict)
    if not records:
        logger.warning(f"No records match kind={kind} k={k} verdict={verdict}")
    out = Path(output_dir)
    csv_path, summary_path = out / "report.csv", out / "summary.json"
    summary = summarize(records)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            footers = []
            for record in records:
                for series in _series(record):
                    for row in series_rows(series):
                        writer.writerow([f"{v:.12g}" for v in row])
                    slope = series.get("slope")
                    slope_text = "n/a" if slope is None else f"{float(slope):.6g}"
                    footers.append(f"# {record.record_id} {series['name']}: slope={slope_text} "
                                   f"predicted={float(series['predicted']):.6g}")
            for line in footers:
                fh.write(line + "\n")
        summary_path.write_text(json.dumps(to_jsonable(summary), indent=2, sort_keys=True),
                                encoding="utf-8")
    except OSError as e:
        raise RegistryError(f"Failed to write report to {out}: {e}")
    logger.info(f"📊 Report with {len(records)} records written to {out}")
    return ReportBundle(records, summary, csv_path, summary_path)
