"""
Corpus manifests.

One entry per line: ``<role> <source> [seed=N]``. The source is a WAV path (relative to the
manifest) or ``synthetic:key=value,...`` with keys states, frames, speakers, model_seed and
shape. Blank lines and ``#`` comments are ignored.

Example::

    # speech material
    speech-train  data/speaker01.wav
    speech-train  synthetic:states=3,frames=2000
    babble-train  synthetic:states=3,frames=2000,speakers=6 seed=4
"""

import logging
from pathlib import Path
from typing import Literal, NamedTuple, get_args

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from babblenhmm.audio import read_wav
from babblenhmm.config import FrameConfig
from babblenhmm.corpus import MixSpec, gen_synthetic_speech, synth_babble, synthetic_model
from babblenhmm.errors import InputError

logger = logging.getLogger(__name__)

Role = Literal["speech-train", "babble-train", "babble-init", "speech-test", "babble-test"]
ROLES: tuple[str, ...] = get_args(Role)
SYNTHETIC_PREFIX = "synthetic:"
# Level recipe for multi-speaker initialisation material, cycled over speakers
INIT_OFFSETS_DB = (0.0, -1.25, -3.0, -6.0)


class SyntheticSource(BaseModel):
    """Gamma-HMM generated material."""

    states: int = Field(default=3, ge=1, description="States of the generating model")
    frames: int = Field(default=2000, ge=2, description="Frames per speaker stream")
    speakers: int = Field(default=1, ge=1, description="Speakers summed into babble")
    model_seed: int = Field(default=0, description="Seed of the generating model")
    shape: float = Field(default=1.0, gt=0, description="Per-bin gamma shape of the generating model")


class ManifestEntry(BaseModel):
    """One manifest line."""

    role: Role
    path: Path | None = None
    synthetic: SyntheticSource | None = None
    seed: int = Field(default=0, description="Sampling seed for synthetic sources")
    line: int = Field(default=0, description="Line number in the manifest")

    @model_validator(mode="after")
    def _check_source(self) -> "ManifestEntry":
        if (self.path is None) == (self.synthetic is None):
            raise ValueError("entry needs exactly one of a path or a synthetic source")
        if self.synthetic and self.role.startswith("speech") and self.synthetic.speakers != 1:
            raise ValueError("speech entries must have a single speaker")
        return self

    @property
    def label(self) -> str:
        if self.path is not None:
            return self.path.stem
        return f"synthetic-{self.role}-{self.line}-seed{self.seed}"


class Manifest(BaseModel):
    """Parsed manifest."""

    source: Path | None = Field(default=None, description="File the manifest was read from")
    entries: list[ManifestEntry] = Field(default_factory=list)

    def by_role(self, role: Role) -> list[ManifestEntry]:
        return [e for e in self.entries if e.role == role]


def _parse_synthetic(spec: str, where: str) -> SyntheticSource:
    fields: dict[str, str] = {}
    for item in filter(None, spec.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"{where}: synthetic parameter {item!r} must look like key=value")
        fields[key.strip()] = value.strip()
    try:
        return SyntheticSource.model_validate(fields)
    except ValidationError as e:
        raise InputError(f"{where}: invalid synthetic source: {e}") from e


def parse_manifest(text: str, base_dir: Path | None = None) -> Manifest:
    """
    Parse manifest text.

    Args:
        text: Manifest contents
        base_dir: Directory relative paths are resolved against

    Returns:
        Manifest with entries in file order
    """
    entries: list[ManifestEntry] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"manifest line {number}"
        tokens = line.split()
        if len(tokens) not in (2, 3):
            raise InputError(f"{where}: expected '<role> <source> [seed=N]', got {raw.strip()!r}")
        role, source = tokens[0], tokens[1]
        if role not in ROLES:
            raise InputError(f"{where}: unknown role {role!r} (expected one of {', '.join(ROLES)})")
        seed = 0
        if len(tokens) == 3:
            key, sep, value = tokens[2].partition("=")
            if key != "seed" or not sep:
                raise InputError(f"{where}: third field must be seed=N, got {tokens[2]!r}")
            try:
                seed = int(value)
            except ValueError as e:
                raise InputError(f"{where}: seed must be an integer, got {value!r}") from e

        fields: dict[str, object] = {"role": role, "seed": seed, "line": number}
        if source.startswith(SYNTHETIC_PREFIX):
            fields["synthetic"] = _parse_synthetic(source[len(SYNTHETIC_PREFIX) :], where)
        else:
            path = Path(source)
            fields["path"] = path if path.is_absolute() or base_dir is None else base_dir / path
        try:
            entries.append(ManifestEntry.model_validate(fields))
        except ValidationError as e:
            raise InputError(f"{where}: {e}") from e
    return Manifest(source=None, entries=entries)


def load_manifest(path: Path) -> Manifest:
    """Read and parse a manifest file."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read manifest {path}: {e}") from e
    manifest = parse_manifest(text, base_dir=path.parent)
    logger.info("manifest %s: %d entries", path, len(manifest.entries))
    return manifest.model_copy(update={"source": path})


class LoadedSignal(NamedTuple):
    """A signal with the label it is reported under."""

    label: str
    signal: np.ndarray


def _speaker_streams(entry: ManifestEntry, source: SyntheticSource, frame_cfg: FrameConfig) -> list[np.ndarray]:
    model = synthetic_model(source.states, frame_cfg.n_bins, source.model_seed, shape=source.shape)
    streams = []
    for speaker in range(source.speakers):
        sample = gen_synthetic_speech(
            source.states,
            frame_cfg.n_bins,
            source.frames,
            seed=entry.seed * 1000 + speaker,
            model=model,
            frame_cfg=frame_cfg,
        )
        assert sample.signal is not None
        streams.append(sample.signal)
    return streams


def load_entry(entry: ManifestEntry, frame_cfg: FrameConfig) -> list[LoadedSignal]:
    """
    Materialise one entry.

    WAV entries and synthetic speech give one signal. Synthetic babble gives one mixture of its
    speakers, except for babble-init entries, which give each speaker stream separately.
    """
    if entry.path is not None:
        signal, _ = read_wav(entry.path, expected_rate=frame_cfg.sample_rate)
        return [LoadedSignal(entry.label, signal)]

    assert entry.synthetic is not None
    streams = _speaker_streams(entry, entry.synthetic, frame_cfg)
    if entry.role == "babble-init":
        offsets = [INIT_OFFSETS_DB[m % len(INIT_OFFSETS_DB)] for m in range(len(streams))]
        return [
            LoadedSignal(f"{entry.label}-speaker{m}", 10.0 ** (offset / 20.0) * stream)
            for m, (stream, offset) in enumerate(zip(streams, offsets, strict=True))
        ]
    if entry.role.startswith("babble"):
        spec = MixSpec(speaker_count=len(streams), offsets_db=[0.0] * len(streams), seed=entry.seed)
        return [LoadedSignal(entry.label, synth_babble(streams, spec, frame_cfg).signal)]
    return [LoadedSignal(entry.label, streams[0])]


def load_role(manifest: Manifest, role: Role, frame_cfg: FrameConfig) -> list[LoadedSignal]:
    """All signals of one role, in manifest order."""
    signals: list[LoadedSignal] = []
    for entry in manifest.by_role(role):
        signals.extend(load_entry(entry, frame_cfg))
    return signals
