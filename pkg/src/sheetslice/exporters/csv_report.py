"""Experiment report to ``report.csv`` plus ``header.json``."""
import io
import json
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from ..experiments.report import ExperimentReport

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["param", "estimate", "ci_lo", "ci_hi", "n_trials"]
HEADER_VERSION = 1


def report_dir(report: ExperimentReport, output_dir: str | Path) -> Path:
    """``<output_dir>/<experiment>/<config-hash>``."""
    return Path(output_dir) / report.name / report.config_hash


def sanitize(value: Any) -> Any:
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(value, dict):
        return {str(k): sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [sanitize(v) for v in value]
    if isinstance(value, np.ndarray):
        return sanitize(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isfinite(value):
            return value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


class ReportCSVWriter:
    """Write an ExperimentReport as a CSV table with a self-describing JSON header."""

    def __init__(self, float_format: str = "%.12g"):
        self.float_format = float_format

    def render(self, report: ExperimentReport) -> tuple[str, str]:
        """(CSV text, header JSON text); both depend on the report contents only."""
        frame = pd.DataFrame(report.rows(), columns=CSV_COLUMNS)
        buffer = io.StringIO()
        frame.to_csv(buffer, index=False, float_format=self.float_format, lineterminator="\n")
        header = {
            "version": HEADER_VERSION,
            "experiment": report.name,
            "config_hash": report.config_hash,
            "config": report.config,
            "seed": report.seed,
            "trial_ranges": [list(r) for r in report.trial_ranges],
            "n_trials": report.n_trials,
            "status": report.status,
            "error": report.error,
            "outcome": report.outcome,
            "checks": report.checks,
            "fits": report.fits,
            "notes": report.notes,
            "extras": report.extras,
            "policies": report.policies,
        }
        text = json.dumps(sanitize(header), indent=2, sort_keys=True, allow_nan=False)
        return buffer.getvalue(), text + "\n"

    def write(self, report: ExperimentReport, output_dir: str | Path) -> Path:
        """Write ``report.csv`` and ``header.json``; returns the report directory.

        Args:
            report: Finished or failed report
            output_dir: Root of the ``<experiment>/<config-hash>`` layout

        Returns:
            Directory holding the written files
        """
        target = report_dir(report, output_dir)
        target.mkdir(parents=True, exist_ok=True)
        csv_text, header_text = self.render(report)
        (target / "report.csv").write_text(csv_text, encoding="utf-8")
        (target / "header.json").write_text(header_text, encoding="utf-8")
        logger.info(f"Report written: {target}")
        return target
