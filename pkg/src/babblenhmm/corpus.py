"""
Corpus tools: synthetic speech-like material, multi-speaker babble and SNR-controlled mixing.

Everything here is deterministic under its seed.
"""

import logging
import math
from collections.abc import Sequence
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.ndimage import gaussian_filter1d

from babblenhmm.config import FrameConfig
from babblenhmm.dsp import Spectrogram, frame_count, frame_signal, istft
from babblenhmm.errors import InputError
from babblenhmm.gamma_hmm import SpeechHmm
from babblenhmm.hmm import stationary_distribution

logger = logging.getLogger(__name__)

ACTIVITY_GATE_DB = 40.0
PEAK_LEVEL = 0.99
SELF_TRANSITION_WEIGHT = 0.7


class MixSpec(BaseModel):
    """How to build one babble or noisy mixture."""

    target_snr_db: float = Field(default=0.0, description="Mixture SNR; inf gives clean speech")
    speaker_count: int = Field(default=1, ge=1, description="Number of babble speakers M")
    offsets_db: list[float] = Field(default_factory=lambda: [0.0], description="Per-speaker level offsets")
    seed: int = Field(default=0, description="Seed for loop points and source selection")

    @model_validator(mode="after")
    def _check_offsets(self) -> "MixSpec":
        if len(self.offsets_db) != self.speaker_count:
            raise ValueError(
                f"offsets_db has {len(self.offsets_db)} entries for {self.speaker_count} speakers"
            )
        return self


def active_speech_level(
    signal: np.ndarray, frame_cfg: FrameConfig, gate_db: float = ACTIVITY_GATE_DB
) -> float:
    """
    Mean power over frames within ``gate_db`` of the loudest frame.

    Signals shorter than one frame are measured as a whole.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise InputError("active speech level needs a non-empty mono signal")
    if frame_count(x.size, frame_cfg) == 0:
        level = float(np.mean(x**2))
    else:
        power = np.mean(frame_signal(x, frame_cfg) ** 2, axis=1)
        level = float(np.mean(power[power >= power.max() * 10.0 ** (-gate_db / 10.0)]))
    if level <= 0:
        raise InputError("signal is silent")
    return level


class BabbleMix(NamedTuple):
    """Synthesised babble and its bookkeeping."""

    signal: np.ndarray
    unscaled: np.ndarray
    peak_scale: float
    source_gains: list[float]


def synth_babble(sources: Sequence[np.ndarray], spec: MixSpec, frame_cfg: FrameConfig) -> BabbleMix:
    """
    Sum of M speakers at equal active-speech level, shifted by the per-speaker offsets.

    Sources are cropped to the shortest one. The sum is peak-normalised to 0.99 and the applied
    factor is returned as ``peak_scale``.

    Args:
        sources: One signal per speaker; must match ``spec.speaker_count``
        spec: Speaker count and level offsets
        frame_cfg: Frame grid of the level measurement

    Returns:
        BabbleMix with the normalised and unnormalised sums and the per-source gains
    """
    if len(sources) != spec.speaker_count:
        raise InputError(f"expected {spec.speaker_count} sources, got {len(sources)}")
    if any(np.asarray(s).size == 0 for s in sources):
        raise InputError("babble sources must not be empty")
    n = min(np.asarray(s).size for s in sources)
    total = np.zeros(n)
    gains: list[float] = []
    for source, offset in zip(sources, spec.offsets_db, strict=True):
        x = np.asarray(source, dtype=np.float64)[:n]
        gain = 10.0 ** (offset / 20.0) / math.sqrt(active_speech_level(x, frame_cfg))
        total += gain * x
        gains.append(gain)
    peak = float(np.max(np.abs(total)))
    if peak == 0:
        raise InputError("babble sources cancel to silence")
    scale = PEAK_LEVEL / peak
    logger.debug("babble of %d speakers, %d samples, peak scale %.4g", spec.speaker_count, n, scale)
    return BabbleMix(signal=scale * total, unscaled=total, peak_scale=scale, source_gains=gains)


class Mixture(NamedTuple):
    """Noisy mixture with its aligned, scaled noise component."""

    noisy: np.ndarray
    noise: np.ndarray
    scale: float


def loop_noise(noise: np.ndarray, n_samples: int, seed: int) -> np.ndarray:
    """Noise cropped or looped to ``n_samples`` from a seeded random start."""
    v = np.asarray(noise, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise InputError("noise must be a non-empty mono signal")
    start = int(np.random.default_rng(seed).integers(v.size))
    return v[(start + np.arange(n_samples)) % v.size]


def mix_at_snr(
    speech: np.ndarray,
    noise: np.ndarray,
    snr_db: float,
    frame_cfg: FrameConfig,
    seed: int = 0,
) -> Mixture:
    """
    Add noise at a target active-speech-to-noise ratio.

    Args:
        speech: Clean speech
        noise: Noise of any length; looped from a seeded offset
        snr_db: Target SNR; +inf returns the speech unchanged
        frame_cfg: Frame grid of the active level measurement
        seed: Loop-point seed

    Returns:
        Mixture with noisy signal, scaled noise and the applied noise scale
    """
    x = np.asarray(speech, dtype=np.float64)
    speech_level = active_speech_level(x, frame_cfg)
    aligned = loop_noise(noise, x.size, seed)
    if math.isinf(snr_db) and snr_db > 0:
        return Mixture(noisy=x.copy(), noise=np.zeros_like(x), scale=0.0)
    noise_level = float(np.mean(aligned**2))
    if noise_level <= 0:
        raise InputError("noise is silent")
    scale = math.sqrt(speech_level / (noise_level * 10.0 ** (snr_db / 10.0)))
    scaled = scale * aligned
    return Mixture(noisy=x + scaled, noise=scaled, scale=scale)


def measured_snr(speech: np.ndarray, noise: np.ndarray, frame_cfg: FrameConfig) -> float:
    """Active speech level over long-term noise power, in dB."""
    return 10.0 * math.log10(active_speech_level(speech, frame_cfg) / float(np.mean(np.asarray(noise) ** 2)))


# -----------------------------------------------------------------------------
# Synthetic gamma-HMM speech
# -----------------------------------------------------------------------------


def synthetic_model(
    n_states: int,
    n_bins: int,
    seed: int,
    shape: float = 1.0,
    gain_shape: float = 15.0,
) -> SpeechHmm:
    """
    Random ergodic gamma-HMM with smooth, well separated spectral shapes.

    Transitions are sticky Dirichlet draws; log-scales are smoothed Gaussian noise along
    frequency. The basis is normalised so that the mean of shape * basis is 1.
    """
    if n_states < 1 or n_bins < 1:
        raise InputError("n_states and n_bins must be positive")
    rng = np.random.default_rng(seed)
    mixing = rng.dirichlet(np.ones(n_states), size=n_states)
    trans = SELF_TRANSITION_WEIGHT * np.eye(n_states) + (1.0 - SELF_TRANSITION_WEIGHT) * mixing
    trans /= trans.sum(axis=1, keepdims=True)

    noise = rng.standard_normal((n_bins, n_states))
    smooth = gaussian_filter1d(noise, sigma=max(1.0, n_bins / 12.0), axis=0, mode="nearest")
    smooth -= smooth.mean(axis=0, keepdims=True)
    spread = smooth.std(axis=0, keepdims=True)
    smooth /= np.where(spread > 0, spread, 1.0)
    basis = np.exp(1.5 * smooth)
    shapes = np.full(n_bins, float(shape))
    basis /= float(np.mean(shapes[:, np.newaxis] * basis))
    return SpeechHmm(trans=trans, basis=basis, shape=shapes, gain_shape=gain_shape)


def sample_states(trans: np.ndarray, n_frames: int, rng: np.random.Generator) -> np.ndarray:
    """Markov chain path started in the stationary distribution."""
    cumulative = np.cumsum(trans, axis=1)
    draws = rng.random(n_frames)
    states = np.empty(n_frames, dtype=np.int64)
    current = int(np.searchsorted(np.cumsum(stationary_distribution(trans)), draws[0], side="right"))
    states[0] = min(current, trans.shape[0] - 1)
    for t in range(1, n_frames):
        current = int(np.searchsorted(cumulative[states[t - 1]], draws[t], side="right"))
        states[t] = min(current, trans.shape[0] - 1)
    return states


class SyntheticSpeech(NamedTuple):
    """Sampled gamma-HMM material with its ground truth."""

    power: np.ndarray
    states: np.ndarray
    gains: np.ndarray
    model: SpeechHmm
    gain_scale: float
    signal: np.ndarray | None


def gen_synthetic_speech(
    n_states: int,
    n_bins: int,
    n_frames: int,
    seed: int,
    model: SpeechHmm | None = None,
    shape: float = 1.0,
    gain_shape: float = 15.0,
    gain_scale: float | None = None,
    frame_cfg: FrameConfig | None = None,
) -> SyntheticSpeech:
    """
    Sample power spectra, and optionally a waveform, from a gamma-HMM.

    Args:
        n_states: Number of states of the generated model
        n_bins: Number of frequency bins
        n_frames: Number of frames to sample
        seed: Seed for both the model and the sample
        model: Generate from this model instead of a random one
        shape: Per-bin gamma shape of a random model
        gain_shape: Gain prior shape of a random model
        gain_scale: Gain scale; defaults to 1 / gain_shape (unit mean gain)
        frame_cfg: When given, a waveform is synthesised with random phases; its bin count
            must equal ``n_bins``

    Returns:
        SyntheticSpeech with power (K, T), the state path, the gains and the generating model
    """
    if n_frames < 1:
        raise InputError("n_frames must be positive")
    truth = model if model is not None else synthetic_model(n_states, n_bins, seed, shape, gain_shape)
    scale = gain_scale if gain_scale is not None else 1.0 / truth.gain_shape
    rng = np.random.default_rng([seed, 1])
    states = sample_states(truth.trans, n_frames, rng)
    gains = rng.gamma(truth.gain_shape, scale, size=n_frames)
    power = rng.gamma(truth.shape[:, np.newaxis], gains[np.newaxis, :] * truth.basis[:, states])

    signal = None
    if frame_cfg is not None:
        if frame_cfg.n_bins != truth.n_bins:
            raise InputError(f"frame grid has {frame_cfg.n_bins} bins, model has {truth.n_bins}")
        phase = rng.uniform(0.0, 2.0 * np.pi, size=power.shape)
        frames = np.sqrt(power) * np.exp(1j * phase)
        signal = istft(Spectrogram(frames=frames, config=frame_cfg))
    return SyntheticSpeech(
        power=power, states=states, gains=gains, model=truth, gain_scale=scale, signal=signal
    )
