"""Run configuration: frame grid, training, enhancement and evaluation settings."""

import json
import logging
import tomllib
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from babblenhmm.errors import InputError

logger = logging.getLogger(__name__)

WindowName = Literal["hann"]


class FrameConfig(BaseModel):
    """Analysis/synthesis frame grid."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    frame_len: int = Field(default=320, gt=0, description="Frame length in samples")
    hop: int = Field(default=160, gt=0, description="Hop size in samples (half the frame)")
    window: WindowName = Field(default="hann", description="Analysis window (periodic)")
    sample_rate: int = Field(default=16000, gt=0, description="Sample rate in Hz")

    @model_validator(mode="after")
    def _check_grid(self) -> "FrameConfig":
        if self.frame_len % 2:
            raise ValueError(f"frame_len must be even, got {self.frame_len}")
        if self.hop * 2 != self.frame_len:
            raise ValueError(f"hop must be frame_len/2 ({self.frame_len // 2}), got {self.hop}")
        return self

    @property
    def n_bins(self) -> int:
        """Number of one-sided DFT bins."""
        return self.frame_len // 2 + 1


class SpeechTrainingConfig(BaseModel):
    """Gamma-HMM speech model training."""

    model_config = ConfigDict(extra="forbid")

    n_states: int = Field(default=55, ge=1, description="Number of speech states")
    n_iters: int = Field(default=20, ge=1, description="EM iterations")
    seed: int = Field(default=0, description="Seed for K-means initialisation")
    initial_gain_shape: float = Field(default=15.0, gt=0, description="Initial gain shape phi")


class BabbleTrainingConfig(BaseModel):
    """Gamma-NHMM babble model training."""

    model_config = ConfigDict(extra="forbid")

    n_states: int = Field(default=10, ge=1, le=200, description="Number of babble states")
    n_iters: int = Field(default=15, ge=1, description="EM iterations")
    cccp_iters: int = Field(default=3, ge=1, description="CCCP rounds per state per M-step")
    seed: int = Field(default=0, description="Seed for K-means initialisation")
    initial_gain_shape: float = Field(default=15.0, gt=0, description="Initial gain shape psi")

    @model_validator(mode="after")
    def _warn_cost(self) -> "BabbleTrainingConfig":
        if self.n_states > 50:
            logger.warning(
                "n_states=%d babble states: composite enhancement cost grows as N_speech*N_babble "
                "and no state pruning is implemented",
                self.n_states,
            )
        return self


class EnhancerConfig(BaseModel):
    """Online MMSE enhancer constants."""

    model_config = ConfigDict(extra="forbid")

    speech_gain_shape: float = Field(default=15.0, gt=0, description="phi used at enhancement")
    babble_gain_shape: float = Field(default=15.0, gt=0, description="psi used at enhancement")
    speech_forgetting: float = Field(default=0.99, gt=0, lt=1, description="xi_theta")
    babble_forgetting: float = Field(default=0.98, gt=0, lt=1, description="xi_gamma")
    speech_info_floor: float = Field(default=100.0, gt=0, description="beta_theta")
    babble_info_floor: float = Field(default=100.0, gt=0, description="beta_gamma")
    smoothing_memory: float = Field(default=0.4, ge=0, le=1, description="Weight of previous gain")
    smoothing_update: float = Field(default=0.6, ge=0, le=1, description="Weight of new gain")
    map_tolerance: float = Field(default=1e-6, gt=0, description="MAP-gain EM stopping tolerance")
    map_max_iters: int = Field(default=50, ge=1, description="MAP-gain EM iteration cap")
    init_frames: int = Field(default=6, ge=1, description="Leading frames used to set levels")
    level_min: float = Field(default=1e-12, gt=0, description="Lower clamp for online levels")
    level_max: float = Field(default=1e12, gt=0, description="Upper clamp for online levels")

    @model_validator(mode="after")
    def _check_smoothing(self) -> "EnhancerConfig":
        if abs(self.smoothing_memory + self.smoothing_update - 1.0) > 1e-12:
            raise ValueError("smoothing weights must sum to 1")
        return self


class EvaluationConfig(BaseModel):
    """Objective-measure settings."""

    model_config = ConfigDict(extra="forbid")

    segsnr_floor_db: float = Field(default=-10.0, description="Per-frame SegSNR lower clamp")
    segsnr_ceiling_db: float = Field(default=30.0, description="Per-frame SegSNR upper clamp")
    segnr_floor_db: float = Field(default=0.0, description="Per-frame SegNR lower clamp")
    segnr_ceiling_db: float = Field(default=40.0, description="Per-frame SegNR upper clamp")
    activity_gate_db: float = Field(default=40.0, gt=0, description="SD gate below long-term power")
    ratio_clamp_db: float = Field(default=100.0, gt=0, description="Report clamp for SDR/SNR")


class RunConfig(BaseModel):
    """Everything a command needs; written next to every output."""

    model_config = ConfigDict(extra="forbid")

    frame: FrameConfig = Field(default_factory=FrameConfig)
    speech: SpeechTrainingConfig = Field(default_factory=SpeechTrainingConfig)
    babble: BabbleTrainingConfig = Field(default_factory=BabbleTrainingConfig)
    enhance: EnhancerConfig = Field(default_factory=EnhancerConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    threads: int | None = Field(default=None, ge=1, description="Worker threads (None = all cores)")


def _parse_scalar(raw: str) -> Any:
    """Interpret an override value as JSON when possible, else as a plain string."""
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(data: dict[str, Any], overrides: list[str]) -> dict[str, Any]:
    """
    Apply ``dotted.path=value`` overrides to a raw config dictionary.

    Args:
        data: Raw (unvalidated) config mapping, modified in place
        overrides: Items like ``enhance.speech_gain_shape=15``

    Returns:
        The same mapping, for chaining
    """
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise InputError(f"override must look like section.field=value, got {item!r}")
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise InputError(f"override {item!r} descends into a scalar")
        node[parts[-1]] = _parse_scalar(raw)
    return data


def load_config(path: Path | None = None, overrides: list[str] | None = None) -> RunConfig:
    """
    Resolve a RunConfig from defaults, an optional JSON/TOML file and overrides.

    Args:
        path: Config file (``.json`` or ``.toml``), or None for defaults
        overrides: ``dotted.path=value`` items applied last

    Returns:
        Validated RunConfig
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise InputError(f"cannot read config {path}: {e}") from e
        try:
            data = tomllib.loads(text) if path.suffix == ".toml" else json.loads(text)
        except ValueError as e:
            raise InputError(f"cannot parse config {path}: {e}") from e
        if not isinstance(data, dict):
            raise InputError(f"config {path} must hold a table of sections, got {type(data).__name__}")
    apply_overrides(data, overrides or [])
    try:
        return RunConfig.model_validate(data)
    except ValueError as e:
        raise InputError(f"invalid configuration: {e}") from e


def write_snapshot(config: RunConfig, output_dir: Path) -> Path:
    """Write the resolved config as ``config.json`` and return its path."""
    output_path = output_dir / "config.json"
    output_path.write_text(config.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return output_path
