"""Markdown exporter for reports."""

from pathlib import Path

from jinja2 import Environment, PackageLoader

from babblenhmm.exporters.base import MEASURES, BaseExporter, metric_rows
from babblenhmm.models import Report


class MarkdownExporter(BaseExporter):
    """Export reports to Markdown tables with relative image links."""

    filename = "report.md"

    def __init__(self) -> None:
        """Initialize the Markdown exporter with Jinja2 environment."""
        self.env = Environment(loader=PackageLoader("babblenhmm", "templates"), trim_blocks=True)

    def render(self, report: Report, output_dir: Path) -> str:
        rows = metric_rows(report.evaluation) if report.evaluation is not None else []
        return self.env.get_template("report.md.j2").render(report=report, measures=MEASURES, rows=rows)
