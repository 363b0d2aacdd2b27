"""WAV input/output."""

import logging
from pathlib import Path

import numpy as np
import soundfile as sf

from babblenhmm.errors import InputError

logger = logging.getLogger(__name__)

EXPECTED_SAMPLE_RATE = 16000


def read_wav(path: Path, expected_rate: int = EXPECTED_SAMPLE_RATE) -> tuple[np.ndarray, int]:
    """
    Read a mono WAV file as float64 samples in [-1, 1].

    Args:
        path: File to read (PCM 16-bit or 32-bit float)
        expected_rate: Rate the models were trained for; a mismatch is logged, not resampled

    Returns:
        Tuple (signal, sample_rate)
    """
    try:
        data, rate = sf.read(str(path), dtype="float64", always_2d=True)
    except (RuntimeError, OSError) as e:
        raise InputError(f"cannot read audio file {path}: {e}") from e
    if data.shape[1] != 1:
        raise InputError(f"{path}: expected mono audio, got {data.shape[1]} channels")
    if rate != expected_rate:
        logger.warning("%s: sample rate %d Hz, models assume %d Hz", path, rate, expected_rate)
    return data[:, 0], int(rate)


def write_wav(path: Path, signal: np.ndarray, sample_rate: int, subtype: str = "FLOAT") -> Path:
    """Write a mono signal; the default 32-bit float subtype keeps values outside [-1, 1]."""
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise InputError(f"expected a mono 1-D signal, got shape {x.shape}")
    path.parent.mkdir(parents=True, exist_ok=True)
    sf.write(str(path), x, sample_rate, subtype=subtype)
    return path
