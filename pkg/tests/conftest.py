"""Pytest configuration and fixtures for babblenhmm tests."""

import tempfile
from pathlib import Path
from typing import Generator

import numpy as np
import pytest

from babblenhmm.babble import BabbleNhmm
from babblenhmm.config import EnhancerConfig, EvaluationConfig, FrameConfig, RunConfig
from babblenhmm.corpus import gen_synthetic_speech, synthetic_model
from babblenhmm.enhancer import CompositeModel
from babblenhmm.gamma_hmm import SpeechHmm
from babblenhmm.models import (
    ConfusionMatrix,
    CrossPrediction,
    EvalReport,
    EvaluationSummary,
    MetricDelta,
    MetricSet,
    Report,
    ShadowMetrics,
    SpectrogramImage,
)


# -----------------------------------------------------------------------------
# Pytest markers configuration
# -----------------------------------------------------------------------------


def pytest_configure(config: pytest.Config) -> None:
    """Register custom markers."""
    config.addinivalue_line("markers", "slow: marks tests as slow (deselect with '-m \"not slow\"')")
    config.addinivalue_line("markers", "integration: marks tests as integration tests")


# -----------------------------------------------------------------------------
# Path fixtures
# -----------------------------------------------------------------------------


@pytest.fixture
def temp_dir() -> Generator[Path, None, None]:
    """Create a temporary directory for test outputs."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


# -----------------------------------------------------------------------------
# Config fixtures
# -----------------------------------------------------------------------------


@pytest.fixture
def frame_cfg() -> FrameConfig:
    """Default 20 ms frame grid at 16 kHz."""
    return FrameConfig()


@pytest.fixture
def small_frame_cfg() -> FrameConfig:
    """Short frames (9 bins) for fast model tests."""
    return FrameConfig(frame_len=16, hop=8)


@pytest.fixture
def enhancer_cfg() -> EnhancerConfig:
    """Default enhancer constants."""
    return EnhancerConfig()


@pytest.fixture
def eval_cfg() -> EvaluationConfig:
    """Default evaluation settings."""
    return EvaluationConfig()


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator."""
    return np.random.default_rng(1234)


# -----------------------------------------------------------------------------
# Model fixtures
# -----------------------------------------------------------------------------


@pytest.fixture
def tiny_speech_model() -> SpeechHmm:
    """Hand-written 2-state, 3-bin speech model."""
    return SpeechHmm(
        trans=np.array([[0.9, 0.1], [0.2, 0.8]]),
        basis=np.array([[2.0, 0.5], [1.0, 1.0], [0.5, 2.0]]),
        shape=np.array([1.0, 1.5, 2.0]),
        gain_shape=4.0,
    )


@pytest.fixture
def tiny_babble_model(tiny_speech_model: SpeechHmm) -> BabbleNhmm:
    """Hand-written 2-state babble model over the tiny speech basis."""
    return BabbleNhmm(
        trans=np.array([[0.7, 0.3], [0.4, 0.6]]),
        state_values=np.array([[0.6, 0.4], [0.1, 0.9]]),
        shape=np.array([1.2, 0.8, 1.0]),
        gain_shape=3.0,
        speech=tiny_speech_model,
    )


@pytest.fixture
def small_speech_model(small_frame_cfg: FrameConfig) -> SpeechHmm:
    """Random 3-state exponential speech model on the short frame grid."""
    return synthetic_model(3, small_frame_cfg.n_bins, seed=7)


@pytest.fixture
def small_babble_model(small_speech_model: SpeechHmm) -> BabbleNhmm:
    """Two babble states mixing all speech states."""
    return BabbleNhmm(
        trans=np.array([[0.8, 0.2], [0.3, 0.7]]),
        state_values=np.array([[0.5, 0.3, 0.2], [0.1, 0.2, 0.7]]),
        shape=np.ones(small_speech_model.n_bins),
        gain_shape=15.0,
        speech=small_speech_model,
    )


@pytest.fixture
def small_composite(small_speech_model: SpeechHmm, small_babble_model: BabbleNhmm) -> CompositeModel:
    """Composite prior of the small models."""
    return CompositeModel.from_models(small_speech_model, small_babble_model)


# -----------------------------------------------------------------------------
# Signal fixtures
# -----------------------------------------------------------------------------


@pytest.fixture
def speech_like_signal(frame_cfg: FrameConfig) -> np.ndarray:
    """One second of synthetic gamma-HMM speech on the default grid."""
    sample = gen_synthetic_speech(3, frame_cfg.n_bins, 99, seed=3, frame_cfg=frame_cfg)
    assert sample.signal is not None
    return sample.signal


@pytest.fixture
def white_noise(rng: np.random.Generator) -> np.ndarray:
    """One second of unit-variance white noise."""
    return rng.standard_normal(16000)


# -----------------------------------------------------------------------------
# Report fixtures
# -----------------------------------------------------------------------------


@pytest.fixture
def sample_evaluation() -> EvaluationSummary:
    """Evaluation of a small improvement with shadow metrics."""
    noisy = MetricSet(sdr_db=0.1, snr_db=0.0, segsnr_db=-2.5, sd_db=9.3)
    enhanced = MetricSet(sdr_db=3.4, snr_db=3.1, segsnr_db=0.8, sd_db=7.6)
    return EvaluationSummary(
        noisy=EvalReport(reference_id="clean", estimate_id="noisy", input_snr_db=0.0, metrics=noisy, segsnr_trace=[-2.0, -3.0]),
        enhanced=EvalReport(reference_id="clean", estimate_id="enhanced", input_snr_db=0.0, metrics=enhanced),
        delta=MetricDelta.between(noisy, enhanced),
        shadow=ShadowMetrics(speech_segsnr_db=6.2, segnr_db=4.9),
    )


@pytest.fixture
def sample_cross_prediction() -> CrossPrediction:
    """Diagonally dominant cross-prediction result."""
    return CrossPrediction(
        sd=ConfusionMatrix(metric="sd_db", values=[[4.0, 6.5], [7.0, 3.5]], lower_is_better=True),
        segsnr=ConfusionMatrix(metric="segsnr_db", values=[[5.0, 1.0], [0.5, 4.0]], lower_is_better=False),
        n_speech_signals=3,
        n_babble_signals=2,
        diagonal_dominant=True,
    )


@pytest.fixture
def sample_report(sample_evaluation: EvaluationSummary) -> Report:
    """Evaluation report with one spectrogram."""
    return Report(
        kind="evaluation",
        title="Evaluation of <noisy>.wav",
        package_version="0.1.0",
        config=RunConfig(),
        evaluation=sample_evaluation,
        spectrograms=[SpectrogramImage(label="noisy", path=Path("spectrograms/noisy.png"))],
    )


@pytest.fixture
def sample_cross_report(sample_cross_prediction: CrossPrediction) -> Report:
    """Cross-prediction report without images."""
    return Report(
        kind="cross-predict",
        title="Cross-predictive test",
        package_version="0.1.0",
        config=RunConfig(),
        cross_prediction=sample_cross_prediction,
    )
