"""BenchReport output: JSON, CSV and gnuplot data files."""
import csv
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List

from src.bench.experiments import BenchReport

logger = logging.getLogger(__name__)

FORMATS = ("json", "csv", "dat")

CSV_FIELDS = [
    "experiment",
    "seed",
    "config_key",
    "evaluator",
    "status",
    "element_touches",
    "node_visits",
    "max_materialized",
    "finalization_touches",
    "result_size",
    "result_digest",
    "wall_time",
]


def report_to_json(report: BenchReport) -> str:
    data = report.model_dump()
    data["passed"] = report.passed
    return json.dumps(data, indent=2, sort_keys=True)


def row_dicts(report: BenchReport) -> List[Dict]:
    """Flat rows; per-row extras become extra columns."""
    rows = []
    for row in report.rows:
        flat = {"experiment": report.experiment, "seed": report.seed}
        flat.update(row.model_dump(exclude={"params", "extra"}))
        flat.update(row.extra)
        rows.append(flat)
    return rows


def _extra_fields(report: BenchReport) -> List[str]:
    return sorted({key for row in report.rows for key in row.extra})


def write_json(report: BenchReport, path: Path) -> None:
    path.write_text(report_to_json(report) + "\n", encoding="utf-8")


def write_csv(report: BenchReport, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_FIELDS + _extra_fields(report))
        writer.writeheader()
        writer.writerows(row_dicts(report))


def write_gnuplot(report: BenchReport, path: Path) -> None:
    """One whitespace-separated block per evaluator, blocks split by two blank lines."""
    columns = ["element_touches", "node_visits", "max_materialized"] + _extra_fields(report)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# {report.experiment} seed={report.seed}\n")
        evaluators = list(dict.fromkeys(r.evaluator for r in report.rows))
        for i, evaluator in enumerate(evaluators):
            if i:
                f.write("\n\n")
            f.write(f"# evaluator={evaluator}\n# config {' '.join(columns)}\n")
            for row in report.rows_for(evaluator):
                flat = row.model_dump()
                values = [str(flat.get(c, row.extra.get(c, "NaN"))) for c in columns]
                f.write(f"{row.config_key} {' '.join(values)}\n")


WRITERS = {"json": write_json, "csv": write_csv, "dat": write_gnuplot}


def write_report(report: BenchReport, output_dir, formats: Iterable[str] = FORMATS) -> List[Path]:
    """Write `<experiment>.<fmt>` files into `output_dir`; returns the paths."""
    directory = Path(output_dir)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        path = directory / f"{report.experiment}.{fmt}"
        WRITERS[fmt](report, path)
        written.append(path)
    logger.info("wrote %s report to %s", report.experiment, ", ".join(str(p) for p in written))
    return written
