"""CSV exporter for report tables."""

import csv
import io
from pathlib import Path

from babblenhmm.exporters.base import BaseExporter
from babblenhmm.models import ConfusionMatrix, Report

TableRow = tuple[str, str, str, float]


def report_rows(report: Report) -> list[TableRow]:
    """
    Flatten a report into (table, row, column, value) tuples.

    Evaluation reports give the ``metrics`` table (rows noisy, enhanced and delta) and the
    ``shadow`` table; cross-prediction reports give one table per confusion matrix.
    """
    rows: list[TableRow] = []
    if report.evaluation is not None:
        evaluation = report.evaluation
        for name, values in (
            ("noisy", evaluation.noisy.metrics.model_dump()),
            ("enhanced", evaluation.enhanced.metrics.model_dump()),
            ("delta", evaluation.delta.model_dump()),
        ):
            rows.extend(("metrics", name, column, float(v)) for column, v in values.items())
        if evaluation.shadow is not None:
            rows.extend(
                ("shadow", "enhanced", column, float(v)) for column, v in evaluation.shadow.model_dump().items()
            )
    if report.cross_prediction is not None:
        for matrix in (report.cross_prediction.sd, report.cross_prediction.segsnr):
            rows.extend(_matrix_rows(matrix))
    return rows


def _matrix_rows(matrix: ConfusionMatrix) -> list[TableRow]:
    return [
        (matrix.metric, signal, model, float(matrix.values[r][c]))
        for r, signal in enumerate(matrix.rows)
        for c, model in enumerate(matrix.columns)
    ]


class CSVExporter(BaseExporter):
    """Export report tables as comma-separated values with a metadata header."""

    filename = "report.csv"

    def render(self, report: Report, output_dir: Path) -> str:
        """Metadata lines start with ``#`` and precede the ``table,row,column,value`` header."""
        buffer = io.StringIO()
        for key in ("format", "version", "kind", "package_version"):
            buffer.write(f"# {key}: {getattr(report, key)}\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["table", "row", "column", "value"])
        for table, row, column, value in report_rows(report):
            writer.writerow([table, row, column, repr(value)])
        return buffer.getvalue()
