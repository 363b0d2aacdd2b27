"""Exporters for report output formats."""

from babblenhmm.exporters.base import BaseExporter
from babblenhmm.exporters.csv_exporter import CSVExporter
from babblenhmm.exporters.html_exporter import HTMLExporter
from babblenhmm.exporters.json_exporter import JSONExporter
from babblenhmm.exporters.markdown_exporter import MarkdownExporter

__all__ = [
    "BaseExporter",
    "CSVExporter",
    "JSONExporter",
    "MarkdownExporter",
    "HTMLExporter",
]
