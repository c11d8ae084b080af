"""
Evaluation reports: PSNR, per-image rows, CSV output and console printing.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from rich.console import Console
from rich.table import Table

from ..errors import AmpCsError, DimensionError

log = logging.getLogger(__name__)

EVAL_HEADER = ["image", "ratio", "psnr_db", "seconds"]
MEAN_ROW = "mean"


@dataclass
class ReportError:
    """Represents a failure recorded by a batch command instead of raised."""
    error_type: str
    message: str
    file_path: Optional[str] = None
    details: Optional[Dict[str, Any]] = None

    @classmethod
    def from_exception(cls, error: AmpCsError, file_path: Optional[str] = None) -> "ReportError":
        return cls(error.error_type, error.message, file_path, error.details or None)


def psnr(reference: np.ndarray, estimate: np.ndarray, peak: float = 255.0) -> float:
    """10 log10(peak^2 / MSE); infinite for identical images."""
    reference = np.asarray(reference, dtype=np.float64)
    estimate = np.asarray(estimate, dtype=np.float64)
    if reference.shape != estimate.shape:
        raise DimensionError(f"psnr: shape mismatch {reference.shape} vs {estimate.shape}")
    error = float(np.mean((reference - estimate) ** 2))
    if error == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / error)


@dataclass
class EvalRow:
    image: str
    ratio: float
    psnr_db: float
    seconds: float
    fallback_blocks: int = 0


@dataclass
class EvalReport:
    method: str
    rows: List[EvalRow] = field(default_factory=list)
    errors: List[ReportError] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return len(self.errors) == 0

    @property
    def ratios(self) -> List[float]:
        return sorted({row.ratio for row in self.rows})

    def mean_psnr(self, ratio: Optional[float] = None) -> float:
        """Arithmetic mean over images, leaving out infinite PSNR values."""
        values = [row.psnr_db for row in self.rows if ratio is None or row.ratio == ratio]
        finite = [v for v in values if math.isfinite(v)]
        if len(finite) < len(values):
            log.warning("excluding %d infinite PSNR value(s) from the mean", len(values) - len(finite))
        return float(np.mean(finite)) if finite else math.inf

    def mean_seconds(self, ratio: Optional[float] = None) -> float:
        values = [row.seconds for row in self.rows if ratio is None or row.ratio == ratio]
        return float(np.mean(values)) if values else 0.0


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    """Floats are written with repr so they read back exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_csv(path: Path) -> List[Dict[str, str]]:
    with open(path, "r", newline="") as f:
        return list(csv.DictReader(f))


def write_eval_csv(report: EvalReport, path: Path) -> None:
    rows: List[List[Any]] = []
    for ratio in report.ratios:
        ratio_rows = [row for row in report.rows if row.ratio == ratio]
        rows += [[row.image, row.ratio, row.psnr_db, row.seconds] for row in ratio_rows]
        rows.append([MEAN_ROW, ratio, report.mean_psnr(ratio), report.mean_seconds(ratio)])
    write_csv(path, EVAL_HEADER, rows)


def read_eval_csv(path: Path, method: str = "") -> EvalReport:
    report = EvalReport(method)
    for record in read_csv(path):
        if record["image"] == MEAN_ROW:
            continue
        report.rows.append(EvalRow(record["image"], float(record["ratio"]),
                                   float(record["psnr_db"]), float(record["seconds"])))
    return report


def print_errors(errors: Sequence[ReportError], console: Optional[Console] = None) -> None:
    console = console or Console()
    for error in errors:
        console.print(f"[red]{error.error_type}[/red]: {error.message}")
        if error.file_path:
            console.print(f"     File: {error.file_path}")
        for key, value in (error.details or {}).items():
            console.print(f"     {key}: {value}")


def print_eval_report(report: EvalReport, console: Optional[Console] = None) -> None:
    console = console or Console()
    table = Table(title=f"{report.method} reconstruction")
    table.add_column("image")
    table.add_column("ratio", justify="right")
    table.add_column("PSNR (dB)", justify="right")
    table.add_column("seconds", justify="right")
    table.add_column("pinv fallbacks", justify="right")
    for ratio in report.ratios:
        for row in (r for r in report.rows if r.ratio == ratio):
            table.add_row(row.image, f"{row.ratio:g}", f"{row.psnr_db:.2f}", f"{row.seconds:.3f}",
                          str(row.fallback_blocks))
        table.add_row(f"[bold]{MEAN_ROW}[/bold]", f"{ratio:g}", f"[bold]{report.mean_psnr(ratio):.2f}[/bold]",
                      f"{report.mean_seconds(ratio):.3f}", "")
    console.print(table)
    if report.errors:
        console.print(f"[red]{len(report.errors)} error(s):[/red]")
        print_errors(report.errors, console)
