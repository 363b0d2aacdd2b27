"""
Objective measures: SDR, SNR, segmental SNR, spectral distortion, shadow filtering and the
cross-predictive model-fit test.
"""

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from babblenhmm import babble, gamma_hmm
from babblenhmm.babble import BabbleNhmm
from babblenhmm.config import EvaluationConfig, FrameConfig
from babblenhmm.dsp import (
    ABSOLUTE_POWER_FLOOR,
    Spectrogram,
    frame_count,
    frame_signal,
    istft,
    periodogram,
    stft,
    synthesis_region,
)
from babblenhmm.errors import InputError
from babblenhmm.gamma_hmm import NmfProjection, SpeechHmm
from babblenhmm.models import (
    ConfusionMatrix,
    CrossPrediction,
    EvalReport,
    EvaluationSummary,
    MetricDelta,
    MetricSet,
    ShadowMetrics,
)

logger = logging.getLogger(__name__)

GainFunction = Callable[[Spectrogram], np.ndarray]


def _pair(reference: np.ndarray, estimate: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(reference, dtype=np.float64)
    y = np.asarray(estimate, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise InputError(f"reference and estimate must be 1-D of equal length, got {x.shape} and {y.shape}")
    return x, y


def _ratio_db(signal_energy: float, error_energy: float, clamp_db: float) -> float:
    if error_energy <= 0:
        return clamp_db
    if signal_energy <= 0:
        return -clamp_db
    return float(np.clip(10.0 * np.log10(signal_energy / error_energy), -clamp_db, clamp_db))


def sdr(reference: np.ndarray, estimate: np.ndarray, clamp_db: float = 100.0) -> float:
    """
    Source-to-distortion ratio with a single reference source.

    The target is the orthogonal projection of the estimate onto the reference; everything
    else is distortion.
    """
    x, y = _pair(reference, estimate)
    energy = float(x @ x)
    if energy == 0:
        raise InputError("SDR is undefined for an all-zero reference")
    target = (float(y @ x) / energy) * x
    residual = y - target
    return _ratio_db(float(target @ target), float(residual @ residual), clamp_db)


def snr(reference: np.ndarray, estimate: np.ndarray, clamp_db: float = 100.0) -> float:
    """Long-term SNR 10 log10(sum x^2 / sum (x - x_hat)^2)."""
    x, y = _pair(reference, estimate)
    energy = float(x @ x)
    if energy == 0:
        raise InputError("SNR is undefined for an all-zero reference")
    error = x - y
    return _ratio_db(energy, float(error @ error), clamp_db)


def segsnr_trace(
    reference: np.ndarray,
    estimate: np.ndarray,
    frame_cfg: FrameConfig,
    floor_db: float = -10.0,
    ceiling_db: float = 30.0,
) -> np.ndarray:
    """
    Clamped per-frame SNR on the frame grid.

    Frames where the reference has zero energy are left out.

    Returns:
        1-D array of per-frame values in [floor_db, ceiling_db]
    """
    x, y = _pair(reference, estimate)
    if frame_count(x.size, frame_cfg) == 0:
        return np.empty(0)
    ref = frame_signal(x, frame_cfg)
    err = frame_signal(x - y, frame_cfg)
    signal_energy = np.sum(ref**2, axis=1)
    error_energy = np.sum(err**2, axis=1)
    keep = signal_energy > 0
    with np.errstate(divide="ignore"):
        values = 10.0 * np.log10(signal_energy[keep] / error_energy[keep])
    return np.clip(values, floor_db, ceiling_db)


def segsnr(
    reference: np.ndarray,
    estimate: np.ndarray,
    frame_cfg: FrameConfig,
    floor_db: float = -10.0,
    ceiling_db: float = 30.0,
) -> float:
    """Segmental SNR: mean of the clamped per-frame SNR."""
    trace = segsnr_trace(reference, estimate, frame_cfg, floor_db, ceiling_db)
    if trace.size == 0:
        logger.warning("no frame with reference energy, SegSNR set to %.1f dB", floor_db)
        return floor_db
    return float(trace.mean())


def spectral_distortion(
    reference: np.ndarray,
    estimate: np.ndarray,
    frame_cfg: FrameConfig,
    activity_gate_db: float = 40.0,
) -> float:
    """
    Spectral distortion in dB.

    Per frame, the root mean square over bins of the log-spectral difference; averaged over the
    frames whose reference power is within ``activity_gate_db`` of the long-term power.
    """
    x, y = _pair(reference, estimate)
    ref_power = np.maximum(periodogram(stft(x, frame_cfg)), ABSOLUTE_POWER_FLOOR)
    est_power = np.maximum(periodogram(stft(y, frame_cfg)), ABSOLUTE_POWER_FLOOR)
    frame_power = ref_power.mean(axis=0)
    gate = frame_power.mean() * 10.0 ** (-activity_gate_db / 10.0)
    active = frame_power >= gate
    if not np.any(active) or frame_power.mean() <= ABSOLUTE_POWER_FLOOR:
        raise InputError(f"no frame passes the {activity_gate_db:g} dB activity gate")
    diff = 10.0 * np.log10(ref_power[:, active]) - 10.0 * np.log10(est_power[:, active])
    return float(np.mean(np.sqrt(np.mean(diff**2, axis=0))))


def measure(
    reference: np.ndarray,
    estimate: np.ndarray,
    frame_cfg: FrameConfig,
    cfg: EvaluationConfig,
) -> tuple[MetricSet, np.ndarray]:
    """All four measures plus the SegSNR trace."""
    trace = segsnr_trace(reference, estimate, frame_cfg, cfg.segsnr_floor_db, cfg.segsnr_ceiling_db)
    if trace.size == 0:
        logger.warning("no frame with reference energy, SegSNR set to %.1f dB", cfg.segsnr_floor_db)
    metrics = MetricSet(
        sdr_db=sdr(reference, estimate, cfg.ratio_clamp_db),
        snr_db=snr(reference, estimate, cfg.ratio_clamp_db),
        segsnr_db=float(trace.mean()) if trace.size else cfg.segsnr_floor_db,
        sd_db=spectral_distortion(reference, estimate, frame_cfg, cfg.activity_gate_db),
    )
    return metrics, trace


def evaluate_pair(
    reference: np.ndarray,
    estimate: np.ndarray,
    frame_cfg: FrameConfig,
    cfg: EvaluationConfig,
    reference_id: str = "reference",
    estimate_id: str = "estimate",
    input_snr_db: float | None = None,
) -> EvalReport:
    """
    Score one estimate against its reference.

    Args:
        reference: Clean signal
        estimate: Signal under test, same length
        frame_cfg: Frame grid for the segmental and spectral measures
        cfg: Clamp and gate settings
        reference_id: Label stored in the report
        estimate_id: Label stored in the report
        input_snr_db: Known mixture SNR, if any

    Returns:
        EvalReport
    """
    metrics, trace = measure(reference, estimate, frame_cfg, cfg)
    return EvalReport(
        reference_id=reference_id,
        estimate_id=estimate_id,
        input_snr_db=input_snr_db,
        metrics=metrics,
        segsnr_trace=[float(v) for v in trace],
    )


def aligned_region(signals: Sequence[np.ndarray], frame_cfg: FrameConfig) -> list[np.ndarray]:
    """
    Crop signals to their common length and keep the overlap-add synthesis region.

    Enhanced and reconstructed signals are only exact inside [hop, T*hop), so every comparison
    is made there.
    """
    n = min(len(s) for s in signals)
    n_frames = frame_count(n, frame_cfg)
    if n_frames < 2:
        raise InputError(f"signals of {n} samples are too short to evaluate")
    region = synthesis_region(n_frames, frame_cfg)
    return [np.asarray(s, dtype=np.float64)[region] for s in signals]


def apply_gains(signal: np.ndarray, gains: np.ndarray, frame_cfg: FrameConfig) -> np.ndarray:
    """Filter a signal with per-bin, per-frame real gains and resynthesise."""
    spec = stft(signal, frame_cfg)
    if gains.shape != spec.frames.shape:
        raise InputError(f"gains have shape {gains.shape}, signal spectrogram has {spec.frames.shape}")
    return istft(Spectrogram(frames=gains * spec.frames, config=frame_cfg))


def segnr(
    noise: np.ndarray,
    filtered_noise: np.ndarray,
    frame_cfg: FrameConfig,
    floor_db: float = 0.0,
    ceiling_db: float = 40.0,
) -> float:
    """Segmental noise reduction: mean clamped per-frame ratio of noise power before and after filtering."""
    n, f = _pair(noise, filtered_noise)
    before = np.sum(frame_signal(n, frame_cfg) ** 2, axis=1)
    after = np.sum(frame_signal(f, frame_cfg) ** 2, axis=1)
    keep = before > 0
    if not np.any(keep):
        logger.warning("noise has no energy, SegNR set to %.1f dB", floor_db)
        return floor_db
    with np.errstate(divide="ignore"):
        values = 10.0 * np.log10(before[keep] / after[keep])
    return float(np.mean(np.clip(values, floor_db, ceiling_db)))


def shadow_filter_eval(
    clean: np.ndarray,
    noise: np.ndarray,
    gain_fn: GainFunction,
    frame_cfg: FrameConfig,
    cfg: EvaluationConfig,
) -> ShadowMetrics:
    """
    Shadow filtering: gains computed on the mixture, applied to each component separately.

    Args:
        clean: Clean speech
        noise: Noise, aligned with ``clean``
        gain_fn: Maps the mixture spectrogram to per-bin gains of the same shape
        frame_cfg: Frame grid
        cfg: Clamp settings

    Returns:
        ShadowMetrics with the speech-only SegSNR and the SegNR
    """
    x, v = _pair(clean, noise)
    gains = np.asarray(gain_fn(stft(x + v, frame_cfg)))
    filtered_clean = apply_gains(x, gains, frame_cfg)
    filtered_noise = apply_gains(v, gains, frame_cfg)
    x_ref, x_hat, v_ref, v_hat = aligned_region([x, filtered_clean, v, filtered_noise], frame_cfg)
    return ShadowMetrics(
        speech_segsnr_db=segsnr(x_ref, x_hat, frame_cfg, cfg.segsnr_floor_db, cfg.segsnr_ceiling_db),
        segnr_db=segnr(v_ref, v_hat, frame_cfg, cfg.segnr_floor_db, cfg.segnr_ceiling_db),
    )


def evaluate_enhancement(
    clean: np.ndarray,
    noisy: np.ndarray,
    enhanced: np.ndarray,
    frame_cfg: FrameConfig,
    cfg: EvaluationConfig,
    input_snr_db: float | None = None,
    shadow: ShadowMetrics | None = None,
) -> EvaluationSummary:
    """Score the noisy and enhanced signals against the clean one and take the differences."""
    ref, noisy_r, enhanced_r = aligned_region([clean, noisy, enhanced], frame_cfg)
    noisy_report = evaluate_pair(ref, noisy_r, frame_cfg, cfg, "clean", "noisy", input_snr_db)
    enhanced_report = evaluate_pair(ref, enhanced_r, frame_cfg, cfg, "clean", "enhanced", input_snr_db)
    return EvaluationSummary(
        noisy=noisy_report,
        enhanced=enhanced_report,
        delta=MetricDelta.between(noisy_report.metrics, enhanced_report.metrics),
        shadow=shadow,
    )


# -----------------------------------------------------------------------------
# Cross-predictive test
# -----------------------------------------------------------------------------


def project(model: SpeechHmm | BabbleNhmm, power: np.ndarray) -> NmfProjection:
    """NMF projection of a held-out spectrogram, with its gain scale fitted first."""
    if isinstance(model, BabbleNhmm):
        return babble.nmf_project(model, babble.estimate_gain_scale(model, power), power)
    return gamma_hmm.nmf_project(model, gamma_hmm.estimate_gain_scale(model, power), power)


def reconstruct(signal: np.ndarray, model: SpeechHmm | BabbleNhmm, frame_cfg: FrameConfig) -> np.ndarray:
    """Model-based reconstruction: projected magnitudes with the input phase."""
    spec = stft(signal, frame_cfg)
    approximation = project(model, periodogram(spec)).approximation
    frames = np.sqrt(approximation) * np.exp(1j * np.angle(spec.frames))
    return istft(Spectrogram(frames=frames, config=frame_cfg))


def _score_cell(
    signal: np.ndarray, model: SpeechHmm | BabbleNhmm, frame_cfg: FrameConfig, cfg: EvaluationConfig
) -> tuple[float, float]:
    ref, rec = aligned_region([signal, reconstruct(signal, model, frame_cfg)], frame_cfg)
    return (
        spectral_distortion(ref, rec, frame_cfg, cfg.activity_gate_db),
        segsnr(ref, rec, frame_cfg, cfg.segsnr_floor_db, cfg.segsnr_ceiling_db),
    )


def cross_predict(
    speech_test: Sequence[np.ndarray],
    babble_test: Sequence[np.ndarray],
    speech_model: SpeechHmm,
    babble_model: BabbleNhmm,
    frame_cfg: FrameConfig,
    cfg: EvaluationConfig,
    threads: int | None = None,
) -> CrossPrediction:
    """
    Score each signal type under each model.

    Each cell is the mean over signals of that row's type. Rows and columns are ordered
    (speech, babble).

    Returns:
        CrossPrediction with the SD and SegSNR confusion matrices
    """
    if not speech_test or not babble_test:
        raise InputError("cross prediction needs at least one speech and one babble signal")
    models: list[SpeechHmm | BabbleNhmm] = [speech_model, babble_model]
    rows = [list(speech_test), list(babble_test)]
    jobs = [(r, c, s) for r, signals in enumerate(rows) for c in range(2) for s in signals]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        scores = list(pool.map(lambda job: _score_cell(job[2], models[job[1]], frame_cfg, cfg), jobs))

    sd = np.zeros((2, 2))
    seg = np.zeros((2, 2))
    for (r, c, _), (sd_value, seg_value) in zip(jobs, scores, strict=True):
        sd[r, c] += sd_value / len(rows[r])
        seg[r, c] += seg_value / len(rows[r])

    sd_matrix = ConfusionMatrix(metric="sd_db", values=sd.tolist(), lower_is_better=True)
    seg_matrix = ConfusionMatrix(metric="segsnr_db", values=seg.tolist(), lower_is_better=False)
    result = CrossPrediction(
        sd=sd_matrix,
        segsnr=seg_matrix,
        n_speech_signals=len(rows[0]),
        n_babble_signals=len(rows[1]),
        diagonal_dominant=sd_matrix.diagonal_dominant and seg_matrix.diagonal_dominant,
    )
    logger.info("cross prediction: diagonal dominant = %s", result.diagonal_dominant)
    return result
