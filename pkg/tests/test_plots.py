"""Tests for spectrogram rendering."""

from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from babblenhmm.errors import InputError
from babblenhmm.plots import render_spectrogram, spectrogram_pixels


class TestSpectrogramPixels:
    """Tests for the gray-level mapping."""

    def test_loudest_is_white(self) -> None:
        """Test the top of the range."""
        pixels = spectrogram_pixels(np.array([[1.0, 1e-3], [1e-9, 1e-12]]))
        assert pixels.dtype == np.uint8
        assert pixels.max() == 255

    def test_below_range_is_black(self) -> None:
        """Test cells more than the range below the peak."""
        pixels = spectrogram_pixels(np.array([[1.0, 1e-9]]), dynamic_range_db=80.0)
        assert pixels[0, 1] == 0

    def test_midpoint(self) -> None:
        """Test a cell halfway down the range."""
        pixels = spectrogram_pixels(np.array([[1.0, 1e-4]]), dynamic_range_db=80.0)
        assert pixels[0, 1] == 128

    def test_low_frequencies_at_bottom(self) -> None:
        """Test the vertical flip."""
        power = np.array([[1.0, 1.0], [1e-9, 1e-9]])
        pixels = spectrogram_pixels(power)
        assert list(pixels[-1]) == [255, 255]
        assert list(pixels[0]) == [0, 0]

    @pytest.mark.parametrize("power", [np.ones(4), np.ones((0, 3))])
    def test_bad_shape(self, power: np.ndarray) -> None:
        """Test that a non-empty matrix is required."""
        with pytest.raises(InputError):
            spectrogram_pixels(power)

    def test_bad_range(self) -> None:
        """Test that the range must be positive."""
        with pytest.raises(InputError):
            spectrogram_pixels(np.ones((2, 2)), dynamic_range_db=0.0)


class TestRenderSpectrogram:
    """Tests for PNG output."""

    def test_creates_png(self, temp_dir: Path, rng: np.random.Generator) -> None:
        """Test the file and image size."""
        path = render_spectrogram(rng.gamma(1.0, 1.0, size=(161, 50)), temp_dir / "spec" / "noisy.png")
        assert path.exists()
        with Image.open(path) as img:
            assert img.size == (50, 161)
            assert img.mode == "L"

    def test_label(self, temp_dir: Path) -> None:
        """Test that a caption changes the pixels."""
        power = np.full((40, 120), 1e-9)
        power[0, 0] = 1.0
        plain = render_spectrogram(power, temp_dir / "plain.png")
        labelled = render_spectrogram(power, temp_dir / "labelled.png", label="enhanced")
        with Image.open(plain) as a, Image.open(labelled) as b:
            assert np.asarray(a).tobytes() != np.asarray(b).tobytes()
