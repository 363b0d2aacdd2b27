"""Tests for exporters."""

import csv
import json
from pathlib import Path

import numpy as np

from babblenhmm.exporters import CSVExporter, HTMLExporter, JSONExporter, MarkdownExporter
from babblenhmm.exporters.base import MEASURES, metric_rows
from babblenhmm.exporters.csv_exporter import report_rows
from babblenhmm.models import MetricDelta, Report
from babblenhmm.plots import render_spectrogram


class TestMetricRows:
    """Tests for the metric table shared by the document exporters."""

    def test_rows_follow_measures(self, sample_report: Report) -> None:
        """Test row labels and column order."""
        rows = metric_rows(sample_report.evaluation)

        assert [row.label for row in rows] == ["noisy", "enhanced", "change"]
        assert all(len(row.cells) == len(MEASURES) for row in rows)
        assert [cell.text for cell in rows[1].cells] == ["3.40", "3.10", "0.80", "7.60"]

    def test_change_marks_improvement(self, sample_report: Report) -> None:
        """Test that a drop in SD counts as an improvement and a drop in SDR does not."""
        worse = sample_report.evaluation.model_copy(
            update={"delta": MetricDelta(sdr_db=-0.5, snr_db=1.0, segsnr_db=0.0, sd_db=-1.7)}
        )
        change = metric_rows(worse)[2]

        assert [cell.improved for cell in change.cells] == [False, True, False, True]
        assert [cell.improved for cell in metric_rows(worse)[0].cells] == [None] * 4


class TestJSONExporter:
    """Tests for JSON exporter."""

    def test_export_creates_file(self, sample_report: Report, temp_dir: Path) -> None:
        """Test that export creates a JSON file."""
        exporter = JSONExporter()
        output_path = exporter.export(sample_report, temp_dir)

        assert output_path.exists()
        assert output_path.name == "report.json"

    def test_export_valid_json(self, sample_report: Report, temp_dir: Path) -> None:
        """Test that exported file is valid JSON."""
        exporter = JSONExporter()
        output_path = exporter.export(sample_report, temp_dir)

        data = json.loads(output_path.read_text(encoding="utf-8"))

        assert data["format"] == "babblenhmm.report"
        assert data["kind"] == "evaluation"
        assert data["evaluation"]["enhanced"]["metrics"]["sdr_db"] == 3.4

    def test_export_round_trips(self, sample_report: Report, temp_dir: Path) -> None:
        """Test that the document validates back into the same report."""
        output_path = JSONExporter().export(sample_report, temp_dir)

        loaded = Report.model_validate_json(output_path.read_text(encoding="utf-8"))

        assert loaded == sample_report

    def test_export_cross_prediction(self, sample_cross_report: Report, temp_dir: Path) -> None:
        """Test exporting a cross-prediction report."""
        data = json.loads(JSONExporter().export(sample_cross_report, temp_dir).read_text(encoding="utf-8"))

        assert data["evaluation"] is None
        assert data["cross_prediction"]["sd"]["values"] == [[4.0, 6.5], [7.0, 3.5]]


class TestCSVExporter:
    """Tests for CSV exporter."""

    def test_export_creates_file(self, sample_report: Report, temp_dir: Path) -> None:
        """Test that export creates a CSV file."""
        output_path = CSVExporter().export(sample_report, temp_dir)

        assert output_path.name == "report.csv"

    def test_metadata_then_table(self, sample_report: Report, temp_dir: Path) -> None:
        """Test the comment header precedes the column header."""
        lines = CSVExporter().export(sample_report, temp_dir).read_text(encoding="utf-8").splitlines()

        assert lines[0] == "# format: babblenhmm.report"
        assert all(line.startswith("#") for line in lines[:4])
        assert lines[4] == "table,row,column,value"

    def test_rows(self, sample_report: Report, temp_dir: Path) -> None:
        """Test the metric and shadow tables."""
        output_path = CSVExporter().export(sample_report, temp_dir)
        body = [line for line in output_path.read_text(encoding="utf-8").splitlines() if not line.startswith("#")]
        rows = list(csv.DictReader(body))

        assert len(rows) == 3 * 4 + 2
        delta = [r for r in rows if r["row"] == "delta" and r["column"] == "snr_db"]
        assert float(delta[0]["value"]) == 3.1
        assert {r["table"] for r in rows} == {"metrics", "shadow"}

    def test_cross_prediction_rows(self, sample_cross_report: Report) -> None:
        """Test one row per confusion cell."""
        rows = report_rows(sample_cross_report)

        assert len(rows) == 8
        assert ("sd_db", "babble", "speech", 7.0) in rows
        assert ("segsnr_db", "speech", "speech", 5.0) in rows


class TestMarkdownExporter:
    """Tests for Markdown exporter."""

    def test_export_creates_file(self, sample_report: Report, temp_dir: Path) -> None:
        """Test that export creates a Markdown file."""
        output_path = MarkdownExporter().export(sample_report, temp_dir)

        assert output_path.exists()
        assert output_path.name == "report.md"

    def test_export_contains_title(self, sample_report: Report, temp_dir: Path) -> None:
        """Test that Markdown contains the title."""
        content = MarkdownExporter().export(sample_report, temp_dir).read_text(encoding="utf-8")

        assert "# Evaluation of <noisy>.wav" in content

    def test_export_contains_metrics(self, sample_report: Report, temp_dir: Path) -> None:
        """Test the metric table and shadow section."""
        content = MarkdownExporter().export(sample_report, temp_dir).read_text(encoding="utf-8")

        assert "| enhanced | 3.40 | 3.10 | 0.80 | 7.60 |" in content
        assert "| change | +3.30 | +3.10 | +3.30 | -1.70 |" in content
        assert "Segmental noise reduction: 4.90 dB" in content
        assert "![noisy](spectrograms/noisy.png)" in content

    def test_metric_table_is_contiguous(self, sample_report: Report, temp_dir: Path) -> None:
        """Test that the header, separator and rows sit on consecutive lines."""
        lines = MarkdownExporter().export(sample_report, temp_dir).read_text(encoding="utf-8").splitlines()
        start = lines.index("| Signal | SDR (dB) | SNR (dB) | SegSNR (dB) | SD (dB) |")

        assert lines[start + 1] == "|--------|---:|---:|---:|---:|"
        assert [line.split("|")[1].strip() for line in lines[start + 2 : start + 5]] == ["noisy", "enhanced", "change"]

    def test_export_cross_prediction(self, sample_cross_report: Report, temp_dir: Path) -> None:
        """Test the confusion tables."""
        content = MarkdownExporter().export(sample_cross_report, temp_dir).read_text(encoding="utf-8")

        assert "Diagonal dominant: yes" in content
        assert "| babble | 7.00 | 3.50 |" in content
        assert "Objective measures" not in content


class TestHTMLExporter:
    """Tests for HTML exporter."""

    def test_export_creates_file(self, sample_report: Report, temp_dir: Path) -> None:
        """Test that export creates an HTML file."""
        output_path = HTMLExporter().export(sample_report, temp_dir)

        assert output_path.exists()
        assert output_path.name == "report.html"

    def test_export_valid_html(self, sample_report: Report, temp_dir: Path) -> None:
        """Test that exported file is valid HTML structure."""
        content = HTMLExporter().export(sample_report, temp_dir).read_text(encoding="utf-8")

        assert "<!DOCTYPE html>" in content
        assert "</html>" in content

    def test_title_escaped(self, sample_report: Report, temp_dir: Path) -> None:
        """Test that the title is HTML-escaped."""
        content = HTMLExporter().export(sample_report, temp_dir).read_text(encoding="utf-8")

        assert "Evaluation of &lt;noisy&gt;.wav" in content
        assert "<noisy>" not in content

    def test_export_cross_prediction(self, sample_cross_report: Report, temp_dir: Path) -> None:
        """Test the cross-prediction section."""
        content = HTMLExporter().export(sample_cross_report, temp_dir).read_text(encoding="utf-8")

        assert "Cross-predictive test" in content
        assert "Objective measures" not in content

    def test_embed_spectrograms(self, sample_report: Report, temp_dir: Path) -> None:
        """Test that rendered spectrograms are embedded as base64."""
        render_spectrogram(np.ones((9, 20)), temp_dir / "spectrograms" / "noisy.png")

        content = HTMLExporter().export(sample_report, temp_dir).read_text(encoding="utf-8")

        assert "data:image/png;base64," in content

    def test_missing_spectrogram_not_embedded(self, sample_report: Report, temp_dir: Path) -> None:
        """Test that a missing image file is skipped without failing."""
        content = HTMLExporter().export(sample_report, temp_dir).read_text(encoding="utf-8")

        assert "data:image/png;base64," not in content

    def test_change_cells_coloured(self, sample_report: Report, temp_dir: Path) -> None:
        """Test that improved measures are marked good."""
        content = HTMLExporter().export(sample_report, temp_dir).read_text(encoding="utf-8")

        assert '<td class="good">-1.70</td>' in content
        assert 'class="bad"' not in content
