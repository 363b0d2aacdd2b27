"""Pydantic records for babblenhmm files: model files, diagnostics and reports."""

from pathlib import Path
from typing import Literal

from pydantic import BaseModel, Field

from babblenhmm.config import FrameConfig, RunConfig

SPEECH_MODEL_FORMAT = "babblenhmm.speech-model"
BABBLE_MODEL_FORMAT = "babblenhmm.babble-model"
DIAGNOSTICS_FORMAT = "babblenhmm.diagnostics"
REPORT_FORMAT = "babblenhmm.report"


# -----------------------------------------------------------------------------
# Model files
# -----------------------------------------------------------------------------


class SpeechProvenance(BaseModel):
    """How a speech model was produced."""

    frame: FrameConfig = Field(description="Frame grid of the training spectra")
    corpus_sha256: str = Field(description="SHA-256 over the training signals in order")
    n_iters: int = Field(description="EM iterations run")
    seed: int = Field(description="K-means seed")
    package_version: str = Field(description="babblenhmm version that wrote the file")
    loglik_trace: list[float] = Field(description="Total log-likelihood at each E-step")
    gains: list[float] = Field(description="Per-utterance gain scales")


class SpeechModelFile(BaseModel):
    """On-disk speech model."""

    format: Literal["babblenhmm.speech-model"] = Field(default=SPEECH_MODEL_FORMAT)
    version: Literal[1] = Field(default=1, description="File format version")
    n_states: int = Field(gt=0, description="Number of speech states")
    n_bins: int = Field(gt=0, description="Number of one-sided frequency bins")
    trans: list[list[float]] = Field(description="Transition matrix, row-major")
    basis: list[list[float]] = Field(description="Gamma scales, n_bins rows of n_states")
    shape: list[float] = Field(description="Per-bin gamma shapes")
    gain_shape: float = Field(description="Gain prior shape")
    provenance: SpeechProvenance = Field(description="How the model was trained")


class BabbleProvenance(SpeechProvenance):
    """How a babble model was produced."""

    cccp_iterations: list[int] = Field(description="Newton iterations spent in CCCP per EM iteration")
    init_source: Literal["speaker-streams", "self-projection"] = Field(
        description="Where the initial state vectors came from"
    )


class BabbleModelFile(BaseModel):
    """On-disk babble model; the basis lives in the referenced speech model."""

    format: Literal["babblenhmm.babble-model"] = Field(default=BABBLE_MODEL_FORMAT)
    version: Literal[1] = Field(default=1, description="File format version")
    speech_model_sha256: str = Field(description="SHA-256 of the speech model file")
    n_states: int = Field(gt=0, description="Number of babble states")
    n_speech_states: int = Field(gt=0, description="Number of speech states (length of state vectors)")
    n_bins: int = Field(gt=0, description="Number of one-sided frequency bins")
    trans: list[list[float]] = Field(description="Transition matrix, row-major")
    state_values: list[list[float]] = Field(description="State vectors, one row per babble state")
    shape: list[float] = Field(description="Per-bin gamma shapes")
    gain_shape: float = Field(description="Gain prior shape")
    provenance: BabbleProvenance = Field(description="How the model was trained")


# -----------------------------------------------------------------------------
# Enhancement diagnostics
# -----------------------------------------------------------------------------


class DiagnosticsHeader(BaseModel):
    """First line of a diagnostics stream."""

    format: Literal["babblenhmm.diagnostics"] = Field(default=DIAGNOSTICS_FORMAT)
    version: Literal[1] = Field(default=1, description="File format version")
    n_frames: int = Field(description="Number of frame records that follow")
    n_speech_states: int = Field(gt=0, description="Speech states in the composite model")
    n_babble_states: int = Field(gt=0, description="Babble states in the composite model")
    initial_speech_level: float = Field(description="Speech gain scale before the first frame")
    initial_babble_level: float = Field(description="Babble gain scale before the first frame")


class FrameDiagnostics(BaseModel):
    """Per-frame enhancer state after processing the frame."""

    frame: int = Field(description="Frame index (0-based)")
    speech_level: float = Field(description="Online speech gain scale")
    babble_level: float = Field(description="Online babble gain scale")
    speech_state: int = Field(description="Speech state of the highest-weight composite state")
    babble_state: int = Field(description="Babble state of the highest-weight composite state")
    top_weight: float = Field(description="Weight of that composite state")
    mean_gain: float = Field(description="Mean smoothed output gain over bins")
    map_unconverged: int = Field(default=0, description="States whose MAP gains did not converge")
    hessian_clamped: int = Field(default=0, description="States whose Hessian determinant was clamped")
    weights_underflow: bool = Field(default=False, description="All state weights underflowed")


# -----------------------------------------------------------------------------
# Evaluation reports
# -----------------------------------------------------------------------------


class MetricSet(BaseModel):
    """Objective measures of one estimate against a reference, in dB."""

    sdr_db: float = Field(description="Source-to-distortion ratio")
    snr_db: float = Field(description="Long-term SNR")
    segsnr_db: float = Field(description="Segmental SNR")
    sd_db: float = Field(ge=0, description="Spectral distortion")


class ShadowMetrics(BaseModel):
    """Enhancement gains applied separately to the clean and noise components."""

    speech_segsnr_db: float = Field(description="Segmental SNR of filtered speech vs clean speech")
    segnr_db: float = Field(description="Segmental noise reduction")


class EvalReport(BaseModel):
    """Metrics of one estimate, with frame traces and metadata."""

    reference_id: str = Field(description="Reference signal identifier")
    estimate_id: str = Field(description="Estimate signal identifier")
    input_snr_db: float | None = Field(default=None, description="Input SNR of the mixture, if known")
    metrics: MetricSet = Field(description="Objective measures")
    segsnr_trace: list[float] = Field(default_factory=list, description="Clamped per-frame SNR")


class MetricDelta(BaseModel):
    """Enhanced minus noisy, per measure (negative SD change is an improvement)."""

    sdr_db: float = Field(description="SDR change")
    snr_db: float = Field(description="Long-term SNR change")
    segsnr_db: float = Field(description="Segmental SNR change")
    sd_db: float = Field(description="Spectral distortion change")

    @classmethod
    def between(cls, noisy: MetricSet, enhanced: MetricSet) -> "MetricDelta":
        return cls(
            sdr_db=enhanced.sdr_db - noisy.sdr_db,
            snr_db=enhanced.snr_db - noisy.snr_db,
            segsnr_db=enhanced.segsnr_db - noisy.segsnr_db,
            sd_db=enhanced.sd_db - noisy.sd_db,
        )


class EvaluationSummary(BaseModel):
    """Noisy vs enhanced metrics and their differences."""

    noisy: EvalReport = Field(description="Unprocessed mixture against the clean reference")
    enhanced: EvalReport = Field(description="Enhanced signal against the clean reference")
    delta: MetricDelta = Field(description="Enhanced minus noisy")
    shadow: ShadowMetrics | None = Field(default=None, description="Present when noise and models are given")


SignalKind = Literal["speech", "babble"]


class ConfusionMatrix(BaseModel):
    """2x2 grid: rows are input signal types, columns are models."""

    metric: Literal["sd_db", "segsnr_db"] = Field(description="Scored measure")
    rows: list[SignalKind] = Field(default_factory=lambda: ["speech", "babble"], description="Signal type per row")
    columns: list[SignalKind] = Field(default_factory=lambda: ["speech", "babble"], description="Model per column")
    values: list[list[float]] = Field(description="values[row][column]")
    lower_is_better: bool = Field(description="True for distortion measures")

    @property
    def diagonal_dominant(self) -> bool:
        """Every row scores best in its own column."""
        for r, row in enumerate(self.values):
            own = row[r]
            others = [v for c, v in enumerate(row) if c != r]
            if self.lower_is_better and not all(own < v for v in others):
                return False
            if not self.lower_is_better and not all(own > v for v in others):
                return False
        return True


class CrossPrediction(BaseModel):
    """Cross-predictive model-fit test."""

    sd: ConfusionMatrix = Field(description="Spectral distortion per signal type and model")
    segsnr: ConfusionMatrix = Field(description="Segmental SNR per signal type and model")
    n_speech_signals: int = Field(description="Held-out speech signals scored")
    n_babble_signals: int = Field(description="Held-out babble signals scored")
    diagonal_dominant: bool = Field(description="Both matrices are row-diagonally dominant")


class SpectrogramImage(BaseModel):
    """Rendered spectrogram referenced by a report."""

    label: str = Field(description="Caption")
    path: Path = Field(description="PNG path relative to the report directory")


class Report(BaseModel):
    """Report document written by the evaluate and cross-predict commands."""

    format: Literal["babblenhmm.report"] = Field(default=REPORT_FORMAT)
    version: Literal[1] = Field(default=1, description="File format version")
    kind: Literal["evaluation", "cross-predict"] = Field(description="Which command wrote it")
    title: str = Field(description="Report title")
    package_version: str = Field(description="babblenhmm version that wrote the report")
    config: RunConfig = Field(description="Resolved configuration")
    evaluation: EvaluationSummary | None = Field(default=None, description="Set by evaluate")
    cross_prediction: CrossPrediction | None = Field(default=None, description="Set by cross-predict")
    spectrograms: list[SpectrogramImage] = Field(default_factory=list, description="Rendered spectrogram images")
