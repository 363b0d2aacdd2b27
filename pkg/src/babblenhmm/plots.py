"""Spectrogram images for reports."""

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from babblenhmm.dsp import ABSOLUTE_POWER_FLOOR
from babblenhmm.errors import InputError


def spectrogram_pixels(power: np.ndarray, dynamic_range_db: float = 80.0) -> np.ndarray:
    """
    Map a power spectrogram to 8-bit gray levels.

    The loudest cell is white and everything ``dynamic_range_db`` below it is black. Rows are
    flipped so low frequencies end up at the bottom of the image.

    Args:
        power: Nonnegative power, shape (K, T)
        dynamic_range_db: Displayed range below the maximum

    Returns:
        uint8 array of shape (K, T)
    """
    p = np.asarray(power, dtype=np.float64)
    if p.ndim != 2 or p.size == 0:
        raise InputError(f"power must be a non-empty 2-D array, got shape {p.shape}")
    if dynamic_range_db <= 0:
        raise InputError("dynamic range must be positive")
    db = 10.0 * np.log10(np.maximum(p, ABSOLUTE_POWER_FLOOR))
    top = db.max()
    level = np.clip((db - (top - dynamic_range_db)) / dynamic_range_db, 0.0, 1.0)
    return np.flipud(np.round(255.0 * level).astype(np.uint8))


def render_spectrogram(
    power: np.ndarray,
    output_path: Path,
    dynamic_range_db: float = 80.0,
    label: str | None = None,
) -> Path:
    """
    Save a grayscale log-power spectrogram as PNG.

    Args:
        power: Nonnegative power, shape (K, T)
        output_path: PNG file to write
        dynamic_range_db: Displayed range below the maximum
        label: Optional caption drawn in the top-left corner

    Returns:
        Path to the saved image
    """
    output_path.parent.mkdir(parents=True, exist_ok=True)
    img = Image.fromarray(spectrogram_pixels(power, dynamic_range_db))

    if label:
        draw = ImageDraw.Draw(img)
        draw.text((2, 1), label, fill=255)

    img.save(output_path, format="PNG")
    return output_path
