"""
Model files, diagnostics streams and training logs.

Model files are pretty-printed JSON documents validated by the records in ``models``; loading
re-checks every model invariant.
"""

import csv
import hashlib
import json
import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from babblenhmm.babble import BabbleNhmm
from babblenhmm.errors import InputError, ModelFormatError
from babblenhmm.gamma_hmm import SpeechHmm
from babblenhmm.models import (
    BabbleModelFile,
    BabbleProvenance,
    DiagnosticsHeader,
    FrameDiagnostics,
    SpeechModelFile,
    SpeechProvenance,
)

logger = logging.getLogger(__name__)


def file_sha256(path: Path) -> str:
    """SHA-256 of a file's bytes."""
    return hashlib.sha256(path.read_bytes()).hexdigest()


def corpus_sha256(signals: Sequence[np.ndarray]) -> str:
    """SHA-256 over the float64 samples of every signal, in order."""
    digest = hashlib.sha256()
    for signal in signals:
        x = np.ascontiguousarray(signal, dtype="<f8")
        digest.update(np.int64(x.size).tobytes())
        digest.update(x.tobytes())
    return digest.hexdigest()


def _write_json(document: SpeechModelFile | BabbleModelFile, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(document.model_dump(mode="json"), ensure_ascii=False, indent=2)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def _read_document(path: Path) -> object:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise InputError(f"cannot read model file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path} is not valid JSON: {e}") from e


# -----------------------------------------------------------------------------
# Speech model
# -----------------------------------------------------------------------------


def speech_model_file(model: SpeechHmm, provenance: SpeechProvenance) -> SpeechModelFile:
    """On-disk record of a speech model."""
    return SpeechModelFile(
        n_states=model.n_states,
        n_bins=model.n_bins,
        trans=model.trans.tolist(),
        basis=model.basis.tolist(),
        shape=model.shape.tolist(),
        gain_shape=model.gain_shape,
        provenance=provenance,
    )


def speech_model_from_file(document: SpeechModelFile) -> SpeechHmm:
    """Rebuild a speech model, re-checking its invariants."""
    trans = np.asarray(document.trans, dtype=np.float64)
    basis = np.asarray(document.basis, dtype=np.float64)
    if trans.shape != (document.n_states, document.n_states) or basis.shape != (document.n_bins, document.n_states):
        raise ModelFormatError(
            f"declared N={document.n_states}, K={document.n_bins} do not match "
            f"trans {trans.shape} and basis {basis.shape}"
        )
    try:
        return SpeechHmm(
            trans=trans,
            basis=basis,
            shape=np.asarray(document.shape, dtype=np.float64),
            gain_shape=document.gain_shape,
        )
    except ValidationError as e:
        raise ModelFormatError(f"speech model violates its invariants: {e}") from e


def save_speech_model(model: SpeechHmm, provenance: SpeechProvenance, path: Path) -> Path:
    """
    Write a speech model file.

    Args:
        model: Trained speech model
        provenance: Training metadata
        path: Output file

    Returns:
        Path to the written file
    """
    return _write_json(speech_model_file(model, provenance), path)


def load_speech_model(path: Path) -> tuple[SpeechHmm, SpeechModelFile]:
    """Read a speech model file; raises ModelFormatError on any schema or invariant problem."""
    try:
        document = SpeechModelFile.model_validate(_read_document(path))
    except ValidationError as e:
        raise ModelFormatError(f"{path} is not a speech model file: {e}") from e
    return speech_model_from_file(document), document


# -----------------------------------------------------------------------------
# Babble model
# -----------------------------------------------------------------------------


def babble_model_file(model: BabbleNhmm, provenance: BabbleProvenance, speech_sha256: str) -> BabbleModelFile:
    """On-disk record of a babble model; the speech basis is referenced by hash."""
    return BabbleModelFile(
        speech_model_sha256=speech_sha256,
        n_states=model.n_states,
        n_speech_states=model.speech.n_states,
        n_bins=model.n_bins,
        trans=model.trans.tolist(),
        state_values=model.state_values.tolist(),
        shape=model.shape.tolist(),
        gain_shape=model.gain_shape,
        provenance=provenance,
    )


def save_babble_model(
    model: BabbleNhmm, provenance: BabbleProvenance, speech_sha256: str, path: Path
) -> Path:
    """
    Write a babble model file.

    Args:
        model: Trained babble model
        provenance: Training metadata
        speech_sha256: Hash of the speech model file the babble model was trained against
        path: Output file

    Returns:
        Path to the written file
    """
    return _write_json(babble_model_file(model, provenance, speech_sha256), path)


def load_babble_model(
    path: Path, speech: SpeechHmm, speech_sha256: str | None = None
) -> tuple[BabbleNhmm, BabbleModelFile]:
    """
    Read a babble model file and attach it to a speech model.

    A K or N mismatch with the speech model is an error; a different speech model hash only
    logs a warning.
    """
    try:
        document = BabbleModelFile.model_validate(_read_document(path))
    except ValidationError as e:
        raise ModelFormatError(f"{path} is not a babble model file: {e}") from e
    if document.n_bins != speech.n_bins or document.n_speech_states != speech.n_states:
        raise ModelFormatError(
            f"babble model expects K={document.n_bins}, N={document.n_speech_states}; "
            f"speech model has K={speech.n_bins}, N={speech.n_states}"
        )
    if speech_sha256 is not None and speech_sha256 != document.speech_model_sha256:
        logger.warning("%s was trained against a different speech model file", path)
    try:
        model = BabbleNhmm(
            trans=np.asarray(document.trans, dtype=np.float64),
            state_values=np.asarray(document.state_values, dtype=np.float64),
            shape=np.asarray(document.shape, dtype=np.float64),
            gain_shape=document.gain_shape,
            speech=speech,
        )
    except ValidationError as e:
        raise ModelFormatError(f"babble model violates its invariants: {e}") from e
    if model.n_states != document.n_states:
        raise ModelFormatError(f"declared {document.n_states} babble states, found {model.n_states}")
    return model, document


# -----------------------------------------------------------------------------
# Diagnostics and training logs
# -----------------------------------------------------------------------------


def write_diagnostics(path: Path, header: DiagnosticsHeader, frames: Sequence[FrameDiagnostics]) -> Path:
    """Line-delimited JSON: the header, then one record per frame."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(header.model_dump_json() + "\n")
        for record in frames:
            f.write(record.model_dump_json() + "\n")
    return path


def read_diagnostics(path: Path) -> tuple[DiagnosticsHeader, list[FrameDiagnostics]]:
    """Parse a diagnostics stream written by ``write_diagnostics``."""
    lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not lines:
        raise ModelFormatError(f"{path} is empty")
    try:
        header = DiagnosticsHeader.model_validate_json(lines[0])
        frames = [FrameDiagnostics.model_validate_json(line) for line in lines[1:]]
    except ValidationError as e:
        raise ModelFormatError(f"{path} is not a diagnostics stream: {e}") from e
    if len(frames) != header.n_frames:
        raise ModelFormatError(f"{path}: header announces {header.n_frames} frames, found {len(frames)}")
    return header, frames


def write_training_log(path: Path, loglik_trace: Sequence[float], cccp_iterations: Sequence[int] | None = None) -> Path:
    """CSV with one row per EM iteration: iteration, loglik and optionally CCCP Newton iterations."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        header = ["iteration", "loglik"] + (["cccp_newton_iterations"] if cccp_iterations is not None else [])
        writer.writerow(header)
        for i, value in enumerate(loglik_trace):
            row: list[object] = [i + 1, repr(float(value))]
            if cccp_iterations is not None:
                row.append(cccp_iterations[i])
            writer.writerow(row)
    return path
