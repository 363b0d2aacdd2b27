"""Framing, STFT/ISTFT and periodograms on the configured frame grid."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.signal import check_COLA, get_window

from babblenhmm.config import FrameConfig
from babblenhmm.errors import InputError

# Per-frame floor applied before any gamma likelihood is evaluated.
RELATIVE_POWER_FLOOR = 1e-12
ABSOLUTE_POWER_FLOOR = 1e-20


class Spectrogram(BaseModel):
    """One-sided complex STFT, K bins by T frames."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    frames: np.ndarray = Field(description="Complex DFT coefficients, shape (K, T)")
    config: FrameConfig = Field(description="Frame grid the frames were computed on")

    @model_validator(mode="after")
    def _check_frames(self) -> "Spectrogram":
        if self.frames.ndim != 2:
            raise ValueError(f"frames must be 2-D, got shape {self.frames.shape}")
        if self.frames.shape[0] != self.config.n_bins:
            raise ValueError(
                f"frames have {self.frames.shape[0]} bins, frame config needs {self.config.n_bins}"
            )
        if not np.all(np.isfinite(self.frames)):
            raise ValueError("frames contain non-finite values")
        return self

    @property
    def n_bins(self) -> int:
        return int(self.frames.shape[0])

    @property
    def n_frames(self) -> int:
        return int(self.frames.shape[1])


def analysis_window(cfg: FrameConfig) -> np.ndarray:
    """Periodic (DFT-symmetric) window of length ``frame_len``."""
    return get_window(cfg.window, cfg.frame_len, fftbins=True)


def frame_count(n_samples: int, cfg: FrameConfig) -> int:
    """Number of full frames that fit in ``n_samples`` samples."""
    if n_samples < cfg.frame_len:
        return 0
    return (n_samples - cfg.frame_len) // cfg.hop + 1


def frame_signal(signal: np.ndarray, cfg: FrameConfig) -> np.ndarray:
    """
    Cut a signal into overlapping rectangular frames.

    Args:
        signal: 1-D real signal
        cfg: Frame grid

    Returns:
        Read-only view of shape (T, frame_len); frame t starts at sample t*hop
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise InputError(f"expected a mono 1-D signal, got shape {x.shape}")
    if x.size < cfg.frame_len:
        raise InputError(f"signal has {x.size} samples, need at least frame_len={cfg.frame_len}")
    return sliding_window_view(x, cfg.frame_len)[:: cfg.hop]


def stft(signal: np.ndarray, cfg: FrameConfig) -> Spectrogram:
    """
    Short-time Fourier transform on the configured grid.

    Edge frames without full coverage are dropped, there is no padding.

    Args:
        signal: 1-D real signal of at least ``frame_len`` samples
        cfg: Frame grid

    Returns:
        Spectrogram with T = floor((len - frame_len) / hop) + 1 frames
    """
    x = np.asarray(signal, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InputError("signal contains non-finite samples")
    frames = frame_signal(x, cfg) * analysis_window(cfg)
    coefficients = np.fft.rfft(frames, n=cfg.frame_len, axis=1)
    return Spectrogram(frames=np.ascontiguousarray(coefficients.T), config=cfg)


def istft(spec: Spectrogram) -> np.ndarray:
    """
    Overlap-add synthesis.

    The analysis window sums to one at 50% overlap, so frames are added back without a
    synthesis window. Samples in ``synthesis_region`` reproduce the input exactly.

    Returns:
        Signal of length (T - 1) * hop + frame_len
    """
    cfg = spec.config
    window = analysis_window(cfg)
    if not check_COLA(window, cfg.frame_len, cfg.frame_len - cfg.hop):
        raise InputError(f"{cfg.window} window with hop {cfg.hop} is not COLA-compliant")

    n_frames = spec.n_frames
    segments = np.fft.irfft(spec.frames.T, n=cfg.frame_len, axis=1)
    out = np.zeros((n_frames + 1) * cfg.hop)
    # hop == frame_len / 2: every sample receives the tail of one frame and the head of the next
    out[: n_frames * cfg.hop] += segments[:, : cfg.hop].ravel()
    out[cfg.hop :] += segments[:, cfg.hop :].ravel()
    return out


def synthesis_region(n_frames: int, cfg: FrameConfig) -> slice:
    """Samples covered by two overlapping frames after ``istft``: [hop, T*hop)."""
    return slice(cfg.hop, n_frames * cfg.hop)


def periodogram(spec: Spectrogram) -> np.ndarray:
    """Elementwise squared magnitude |y|^2, shape (K, T)."""
    return spec.frames.real**2 + spec.frames.imag**2


def floor_power(power: np.ndarray) -> np.ndarray:
    """
    Floor each frame at max(1e-12 * frame mean power, 1e-20).

    Args:
        power: Nonnegative matrix, shape (K, T)

    Returns:
        Strictly positive copy
    """
    p = np.asarray(power, dtype=np.float64)
    if p.ndim != 2:
        raise InputError(f"power must be 2-D (bins, frames), got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise InputError("power must be finite and nonnegative")
    floor = np.maximum(RELATIVE_POWER_FLOOR * p.mean(axis=0), ABSOLUTE_POWER_FLOOR)
    return np.maximum(p, floor[np.newaxis, :])


def power_spectrogram(signal: np.ndarray, cfg: FrameConfig) -> np.ndarray:
    """Floored periodogram of a signal, ready for model evaluation."""
    return floor_power(periodogram(stft(signal, cfg)))
