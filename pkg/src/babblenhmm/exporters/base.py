"""Base exporter class and the metric table shared by the document formats."""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import ClassVar, NamedTuple

from babblenhmm.models import EvaluationSummary, MetricDelta, MetricSet, Report


class Measure(NamedTuple):
    """One column of the metric table."""

    field: str
    header: str
    lower_is_better: bool


MEASURES: tuple[Measure, ...] = (
    Measure("sdr_db", "SDR (dB)", False),
    Measure("snr_db", "SNR (dB)", False),
    Measure("segsnr_db", "SegSNR (dB)", False),
    Measure("sd_db", "SD (dB)", True),
)


class MetricCell(NamedTuple):
    """Formatted value; ``improved`` is None outside the change row."""

    text: str
    improved: bool | None


class MetricRow(NamedTuple):
    """Labelled row of the metric table."""

    label: str
    cells: list[MetricCell]


def _cells(values: MetricSet | MetricDelta, signed: bool) -> list[MetricCell]:
    cells = []
    for measure in MEASURES:
        value = float(getattr(values, measure.field))
        if not signed:
            cells.append(MetricCell(f"{value:.2f}", None))
            continue
        improved = value < 0 if measure.lower_is_better else value > 0
        cells.append(MetricCell(f"{value:+.2f}", improved))
    return cells


def metric_rows(evaluation: EvaluationSummary) -> list[MetricRow]:
    """Noisy, enhanced and change rows in ``MEASURES`` column order."""
    return [
        MetricRow("noisy", _cells(evaluation.noisy.metrics, signed=False)),
        MetricRow("enhanced", _cells(evaluation.enhanced.metrics, signed=False)),
        MetricRow("change", _cells(evaluation.delta, signed=True)),
    ]


class BaseExporter(ABC):
    """Abstract base class for all report exporters."""

    filename: ClassVar[str]

    def export(self, report: Report, output_dir: Path) -> Path:
        """
        Write a report into ``output_dir`` under the exporter's file name.

        Args:
            report: Report to export
            output_dir: Directory to save the output file

        Returns:
            Path to the created file
        """
        output_path = output_dir / self.filename
        output_path.write_text(self.render(report, output_dir), encoding="utf-8")
        return output_path

    @abstractmethod
    def render(self, report: Report, output_dir: Path) -> str:
        """Document text; ``output_dir`` resolves the report's relative image paths."""
