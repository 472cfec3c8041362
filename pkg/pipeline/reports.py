"""
Report Bundle
Collects stage reports of a pipeline run (JSON summaries plus tabular
series), the constants each stage used or measured, and writes them out
as JSON and CSV plot data.
"""
import csv
import io
import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import ExperimentSpec

logger = logging.getLogger(__name__)

PROVENANCES = ("configured", "measured")

# kind -> (owning stage, CSV columns)
PLOT_KINDS: Dict[str, Tuple[str, Tuple[str, ...]]] = {
    "lambda_n": ("dim", ("n", "lambda_n", "tilde_lambda_n")),
    "L2-vs-leaf": ("marstrand", ("block", "weight", "l2", "selected")),
    "failure-vs-rho": ("mc", ("rho", "trials", "n_points", "max_failure", "resolved")),
    "hit-fraction-vs-resolution": ("project", ("resolution", "n_bins", "hit_fraction", "longest_run")),
}


class UnknownPlotKind(ValueError):
    def __init__(self, kind: str):
        super().__init__(f"unknown plot kind '{kind}'; valid kinds: {', '.join(PLOT_KINDS)}")
        self.kind = kind


def _plain(value: Any) -> Any:
    """numpy scalars and arrays as plain JSON values"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value


def canonical_json(data: Any) -> str:
    return json.dumps(_plain(data), sort_keys=True, indent=2)


@dataclass
class StageReport:
    """Output of one stage: a JSON summary and named row series"""
    stage: str
    summary: Dict[str, Any]
    series: Dict[str, List[dict]] = field(default_factory=dict)
    status: str = "ok"

    def to_dict(self) -> dict:
        return {"stage": self.stage, "status": self.status, "summary": _plain(self.summary)}


class ReportBundle:
    """
    Thread-safe collection of stage reports for one resolved spec.
    Constants are recorded with their provenance and echoed with the spec.
    """

    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        self._reports: Dict[str, StageReport] = {}
        self._constants: Dict[str, dict] = {}
        self._lock = threading.RLock()

    # ============ PUBLISH ============

    def publish(self, report: StageReport) -> None:
        with self._lock:
            self._reports[report.stage] = report
        logger.info("stage %s finished with status %s", report.stage, report.status)

    def record_constant(self, name: str, value: Any, provenance: str) -> None:
        if provenance not in PROVENANCES:
            raise ValueError(f"provenance must be one of {PROVENANCES}, got '{provenance}'")
        with self._lock:
            self._constants[name] = {"value": _plain(value), "provenance": provenance}

    def record_constants(self, constants: Dict[str, dict]) -> None:
        """Merge entries already shaped as {"value", "provenance"}"""
        for name, entry in constants.items():
            self.record_constant(name, entry["value"], entry["provenance"])

    # ============ LOOKUP ============

    def get(self, stage: str) -> Optional[StageReport]:
        with self._lock:
            return self._reports.get(stage)

    @property
    def stages(self) -> List[str]:
        with self._lock:
            return list(self._reports)

    @property
    def constants(self) -> Dict[str, dict]:
        with self._lock:
            return dict(self._constants)

    @property
    def counterexample(self) -> bool:
        with self._lock:
            return any(r.status == "counterexample" for r in self._reports.values())

    def series(self, kind: str) -> List[dict]:
        if kind not in PLOT_KINDS:
            raise UnknownPlotKind(kind)
        report = self.get(PLOT_KINDS[kind][0])
        if report is None:
            return []
        return report.series.get(kind, [])

    # ============ SERIALIZATION ============

    def to_dict(self) -> dict:
        with self._lock:
            return {
                "spec": self.spec.model_dump(mode="json"),
                "constants": dict(sorted(self._constants.items())),
                "stages": {name: r.to_dict() for name, r in self._reports.items()},
            }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    def stage_json(self, stage: str) -> str:
        report = self.get(stage)
        if report is None:
            raise KeyError(f"no report for stage '{stage}'")
        return canonical_json({
            "spec": self.spec.model_dump(mode="json"),
            "constants": dict(sorted(self.constants.items())),
            **report.to_dict(),
        })

    def write(self, out_dir) -> List[Path]:
        """<stage>.json per stage, summary.json, and one CSV per available plot kind"""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for stage in self.stages:
            path = out / f"{stage}.json"
            path.write_text(self.stage_json(stage))
            written.append(path)
        summary = out / "summary.json"
        summary.write_text(self.to_json())
        written.append(summary)
        for kind, (stage, _) in PLOT_KINDS.items():
            if self.get(stage) is None:
                continue
            path = out / f"{kind}.csv"
            path.write_text(emit_plotdata(self, kind))
            written.append(path)
        logger.info("wrote %d report files to %s", len(written), out)
        return written


def _cell(value: Any) -> Any:
    value = _plain(value)
    return "" if value is None else value


def emit_plotdata(report: ReportBundle, kind: str) -> str:
    """
    CSV text (header row first) for one plot kind. A missing or empty
    series gives the header alone.

    Raises:
        UnknownPlotKind: listing the valid kinds
    """
    rows = report.series(kind)
    columns: Sequence[str] = PLOT_KINDS[kind][1]
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(col)) for col in columns])
    return buffer.getvalue()
