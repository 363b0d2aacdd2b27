"""HTML exporter for reports."""

import base64
from pathlib import Path
from typing import Any

from jinja2 import Environment, PackageLoader, select_autoescape

from babblenhmm.exporters.base import MEASURES, BaseExporter, metric_rows
from babblenhmm.models import Report, SpectrogramImage


class HTMLExporter(BaseExporter):
    """Export reports to a single HTML page with embedded spectrograms."""

    filename = "report.html"

    def __init__(self) -> None:
        """Initialize the HTML exporter with Jinja2 environment."""
        self.env = Environment(
            loader=PackageLoader("babblenhmm", "templates"),
            autoescape=select_autoescape(["html", "j2"]),
        )

    def render(self, report: Report, output_dir: Path) -> str:
        """
        Render the page; change cells are coloured by whether the measure improved.

        Args:
            report: Report to export
            output_dir: Directory the spectrogram paths are relative to

        Returns:
            HTML document
        """
        rows = metric_rows(report.evaluation) if report.evaluation is not None else []
        images = self._embed_images(report.spectrograms, output_dir)
        return self.env.get_template("report.html.j2").render(
            report=report, measures=MEASURES, rows=rows, images=images
        )

    def _embed_images(self, spectrograms: list[SpectrogramImage], output_dir: Path) -> list[dict[str, Any]]:
        """
        Convert spectrogram paths to base64 data URLs.

        Args:
            spectrograms: Images referenced by the report
            output_dir: Base directory for image paths

        Returns:
            List of image dictionaries; missing files have no ``data_url``
        """
        result: list[dict[str, Any]] = []

        for image in spectrograms:
            entry: dict[str, Any] = {"label": image.label, "path": str(image.path)}

            full_path = output_dir / image.path
            if full_path.exists():
                b64 = base64.b64encode(full_path.read_bytes()).decode()
                entry["data_url"] = f"data:image/png;base64,{b64}"

            result.append(entry)

        return result
