"""Integration tests for the train, enhance and evaluate pipeline."""

from itertools import pairwise
from pathlib import Path

import numpy as np
import pytest

from babblenhmm.babble import BabbleNhmm, train_babble
from babblenhmm.config import EnhancerConfig, EvaluationConfig, FrameConfig
from babblenhmm.corpus import gen_synthetic_speech, mix_at_snr, synthetic_model
from babblenhmm.dsp import power_spectrogram
from babblenhmm.enhancer import CompositeModel, enhance_signal
from babblenhmm.gamma_hmm import SpeechHmm, estimate_gain_scale, nmf_project, train
from babblenhmm.metrics import cross_predict, evaluate_enhancement
from babblenhmm.models import BabbleProvenance, EvaluationSummary, SpeechProvenance
from babblenhmm.persistence import (
    corpus_sha256,
    file_sha256,
    load_babble_model,
    load_speech_model,
    save_babble_model,
    save_speech_model,
)

GRID = FrameConfig(frame_len=16, hop=8)
N_BINS = GRID.n_bins
SPEAKERS = 6
SWEEP_SNRS = [0.0, 5.0, 10.0]
MIXTURES_PER_SNR = 4


def speech_signal(seed: int, n_frames: int = 300) -> np.ndarray:
    model = synthetic_model(3, N_BINS, seed=0)
    sample = gen_synthetic_speech(3, N_BINS, n_frames, seed=seed, model=model, frame_cfg=GRID)
    assert sample.signal is not None
    return sample.signal


def babble_signal(seed: int, n_frames: int = 300) -> np.ndarray:
    return sum(speech_signal(1000 * seed + m, n_frames) for m in range(SPEAKERS)) / SPEAKERS


@pytest.fixture(scope="module")
def models() -> tuple[SpeechHmm, BabbleNhmm]:
    """Speech and babble models trained on synthetic material."""
    speech_powers = [power_spectrogram(speech_signal(seed), GRID) for seed in range(1, 5)]
    speech = train(speech_powers, n_states=3, n_iters=10, seed=0, threads=2).model

    init_coefficients = []
    for m in range(SPEAKERS):
        power = power_spectrogram(speech_signal(7000 + m), GRID)
        init_coefficients.append(nmf_project(speech, estimate_gain_scale(speech, power), power).coefficients)
    babble_powers = [power_spectrogram(babble_signal(seed), GRID) for seed in (1, 2)]
    babble = train_babble(
        babble_powers, speech, n_states=3, n_iters=6, seed=0, threads=2, init_coefficients=init_coefficients
    ).model
    return speech, babble


@pytest.fixture(scope="module")
def sweep(models: tuple[SpeechHmm, BabbleNhmm]) -> dict[float, list[EvaluationSummary]]:
    """Evaluation summaries of several enhanced mixtures per input SNR."""
    composite = CompositeModel.from_models(*models)
    results: dict[float, list[EvaluationSummary]] = {}
    for snr_db in SWEEP_SNRS:
        results[snr_db] = []
        for index in range(MIXTURES_PER_SNR):
            clean = speech_signal(50 + index)
            mixture = mix_at_snr(clean, babble_signal(50 + index), snr_db, GRID, seed=index)
            enhanced = enhance_signal(mixture.noisy, composite, GRID, EnhancerConfig()).signal
            results[snr_db].append(
                evaluate_enhancement(clean, mixture.noisy, enhanced, GRID, EvaluationConfig(), snr_db)
            )
    return results


@pytest.mark.integration
@pytest.mark.slow
class TestEnhancementPipeline:
    """Tests for enhancement with trained models."""

    @pytest.mark.parametrize("snr_db", SWEEP_SNRS)
    def test_improves_every_measure(self, sweep: dict[float, list[EvaluationSummary]], snr_db: float) -> None:
        """Test positive SDR, SNR and SegSNR changes at every input SNR."""
        for summary in sweep[snr_db]:
            assert summary.delta.sdr_db > 0
            assert summary.delta.snr_db > 0
            assert summary.delta.segsnr_db > 0

    def test_larger_gains_at_lower_snr(self, sweep: dict[float, list[EvaluationSummary]]) -> None:
        """Test the mean SDR improvement does not grow with the input SNR, within 1 dB."""
        means = [float(np.mean([s.delta.sdr_db for s in sweep[snr_db]])) for snr_db in SWEEP_SNRS]

        for lower, higher in pairwise(means):
            assert lower >= higher - 1.0
        assert means[0] >= means[-1] - 1.0

    def test_diagnostics_cover_frames(self, models: tuple[SpeechHmm, BabbleNhmm]) -> None:
        """Test one diagnostics record per frame and bounded gains."""
        speech, babble = models
        mixture = mix_at_snr(speech_signal(60), babble_signal(60), 0.0, GRID)

        result = enhance_signal(mixture.noisy, CompositeModel.from_models(speech, babble), GRID, EnhancerConfig())

        assert len(result.diagnostics) == result.gains.shape[1] == 300
        assert np.all((result.gains >= 0) & (result.gains <= 1))


@pytest.mark.integration
@pytest.mark.slow
class TestModelFit:
    """Tests for the cross-predictive test on held-out material."""

    def test_diagonal_dominance(self, models: tuple[SpeechHmm, BabbleNhmm]) -> None:
        """Test each signal type is reconstructed best by its own model."""
        speech, babble = models
        result = cross_predict(
            [speech_signal(s) for s in (80, 81)],
            [babble_signal(s) for s in (80, 81)],
            speech,
            babble,
            GRID,
            EvaluationConfig(),
            threads=2,
        )

        sd = result.sd.values
        assert sd[0][0] < sd[0][1]
        assert sd[1][1] < sd[1][0]


@pytest.mark.integration
class TestModelFiles:
    """Tests for enhancing with models read back from disk."""

    def test_saved_models_enhance_identically(self, models: tuple[SpeechHmm, BabbleNhmm], temp_dir: Path) -> None:
        """Test that saving and loading does not change the enhancer output."""
        speech, babble = models
        speech_path = save_speech_model(
            speech,
            SpeechProvenance(
                frame=GRID, corpus_sha256=corpus_sha256([]), n_iters=10, seed=0,
                package_version="test", loglik_trace=[], gains=[],
            ),
            temp_dir / "speech_model.json",
        )
        speech_hash = file_sha256(speech_path)
        babble_path = save_babble_model(
            babble,
            BabbleProvenance(
                frame=GRID, corpus_sha256=corpus_sha256([]), n_iters=6, seed=0, package_version="test",
                loglik_trace=[], gains=[], cccp_iterations=[], init_source="speaker-streams",
            ),
            speech_hash,
            temp_dir / "babble_model.json",
        )
        loaded_speech, _ = load_speech_model(speech_path)
        loaded_babble, _ = load_babble_model(babble_path, loaded_speech, speech_hash)
        noisy = mix_at_snr(speech_signal(90, 60), babble_signal(90, 60), 0.0, GRID).noisy

        original = enhance_signal(noisy, CompositeModel.from_models(speech, babble), GRID, EnhancerConfig())
        reloaded = enhance_signal(noisy, CompositeModel.from_models(loaded_speech, loaded_babble), GRID, EnhancerConfig())

        assert np.allclose(original.signal, reloaded.signal, rtol=1e-9, atol=1e-12)
