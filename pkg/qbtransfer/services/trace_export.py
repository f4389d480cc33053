"""CSV and YAML writers for traces, sweep tables and reports."""

from __future__ import annotations

import csv
import io
import logging
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from qbtransfer.models import EnergyTrace

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ("g_t", "omega_b_t", "E_B", "E_C", "E_M")
SWEEP_COLUMNS = ("g_over_omega_b", "scenario", "omega_b_t_max", "method")


def format_number(value: float) -> str:
    """12 significant digits; negative zero is written as zero."""
    return f"{float(value) + 0.0:.11e}"


@dataclass(frozen=True, order=True)
class SweepRow:
    g_over_omega_b: float
    scenario: str
    method: str
    omega_b_t_max: float

    def as_csv_row(self) -> list[str]:
        return [format_number(self.g_over_omega_b), self.scenario, format_number(self.omega_b_t_max), self.method]


def trace_to_csv(trace: EnergyTrace) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    e_m = trace.e_m
    for index, (g_t, omega_b_t) in enumerate(zip(trace.g_t, trace.omega_b_t, strict=True)):
        writer.writerow(
            [
                format_number(g_t),
                format_number(omega_b_t),
                format_number(trace.e_b[index]),
                format_number(trace.e_c[index]),
                "" if e_m is None else format_number(e_m[index]),
            ]
        )
    return buffer.getvalue()


def write_trace_csv(trace: EnergyTrace, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(trace_to_csv(trace), encoding="utf-8")
    logger.info("wrote %s trace (%d samples) to %s", trace.method, len(trace), path)
    return path


def sweep_to_csv(rows: Iterable[SweepRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in sorted(rows):
        writer.writerow(row.as_csv_row())
    return buffer.getvalue()


def write_sweep_csv(rows: Iterable[SweepRow], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(sweep_to_csv(rows), encoding="utf-8")
    logger.info("wrote sweep table to %s", path)
    return path


def write_yaml_report(data: dict[str, Any], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(data, sort_keys=True, default_flow_style=False), encoding="utf-8")
    logger.info("wrote report to %s", path)
    return path


def method_trace_path(trace_path: Path, method: str) -> Path:
    """``out/direct.csv`` -> ``out/direct.<method>.csv``."""
    return trace_path.with_name(f"{trace_path.stem}.{method}{trace_path.suffix or '.csv'}")


def comparison_report_path(report_path: Path) -> Path:
    return report_path.with_name(f"{report_path.stem}.comparison{report_path.suffix or '.yaml'}")


def read_trace_csv(path: Path) -> list[dict[str, str]]:
    """Rows of a written trace, keyed by column name."""
    with path.open(encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))
