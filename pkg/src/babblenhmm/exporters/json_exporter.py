"""JSON exporter for reports."""

from pathlib import Path

from babblenhmm.exporters.base import BaseExporter
from babblenhmm.models import Report


class JSONExporter(BaseExporter):
    """Write the report document itself; it validates back with ``Report.model_validate_json``."""

    filename = "report.json"

    def render(self, report: Report, output_dir: Path) -> str:
        return report.model_dump_json(indent=2) + "\n"
