"""Command-line interface for babblenhmm."""

import logging
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated

import numpy as np
import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from babblenhmm import __version__
from babblenhmm.audio import read_wav, write_wav
from babblenhmm.babble import BabbleNhmm, train_babble
from babblenhmm.config import RunConfig, load_config, write_snapshot
from babblenhmm.corpus import MixSpec, gen_synthetic_speech, synth_babble, synthetic_model
from babblenhmm.dsp import periodogram, power_spectrogram, stft
from babblenhmm.enhancer import CompositeModel, enhance_signal, enhance_spectrogram
from babblenhmm.errors import InputError, NumericalError
from babblenhmm.exporters import CSVExporter, HTMLExporter, JSONExporter, MarkdownExporter
from babblenhmm.gamma_hmm import SpeechHmm, estimate_gain_scale, nmf_project, train
from babblenhmm.manifest import LoadedSignal, load_manifest, load_role
from babblenhmm.metrics import cross_predict, evaluate_enhancement, shadow_filter_eval
from babblenhmm.models import (
    BabbleProvenance,
    DiagnosticsHeader,
    EvaluationSummary,
    Report,
    SpectrogramImage,
    SpeechProvenance,
)
from babblenhmm.persistence import (
    corpus_sha256,
    file_sha256,
    load_babble_model,
    load_speech_model,
    save_babble_model,
    save_speech_model,
    write_diagnostics,
    write_training_log,
)
from babblenhmm.plots import render_spectrogram

EXIT_INPUT_ERROR = 2
EXIT_NUMERICAL_ERROR = 3

app = typer.Typer(
    name="babblenhmm",
    help="Train speech and babble priors and enhance speech in babble noise.",
    add_completion=False,
    rich_markup_mode="rich",
)
console = Console()

logger = logging.getLogger("babblenhmm")


# Shared option types
ConfigOption = Annotated[
    Path | None,
    typer.Option("--config", "-c", help="Config file (.json or .toml)", exists=True, dir_okay=False),
]
SetOption = Annotated[
    list[str] | None,
    typer.Option("--set", help="Override a config field, e.g. --set enhance.speech_gain_shape=15"),
]
ThreadsOption = Annotated[
    int | None,
    typer.Option("--threads", help="Worker threads (default: all cores; 1 = serial)", min=1),
]
VerboseOption = Annotated[bool, typer.Option("--verbose", "-v", help="Show progress logs")]
OutputDirOption = Annotated[Path, typer.Option("--output", "-o", help="Output directory")]
SpeechModelOption = Annotated[
    Path, typer.Option("--speech-model", help="Speech model file", exists=True, dir_okay=False)
]
BabbleModelOption = Annotated[
    Path, typer.Option("--babble-model", help="Babble model file", exists=True, dir_okay=False)
]


def setup_logging(verbose: bool) -> None:
    """Route package logs through rich; warnings always, progress with --verbose."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


@contextmanager
def handle_errors() -> Iterator[None]:
    """Turn package errors into messages and exit codes."""
    try:
        yield
    except InputError as e:
        console.print(f"[red]✗ Invalid input:[/red] {e}")
        raise typer.Exit(EXIT_INPUT_ERROR) from None
    except NumericalError as e:
        console.print(f"[red]✗ Numerical failure:[/red] {e}")
        raise typer.Exit(EXIT_NUMERICAL_ERROR) from None


def resolve_config(config: Path | None, overrides: list[str] | None, threads: int | None) -> RunConfig:
    """Defaults, then the config file, then --set overrides, then --threads."""
    cfg = load_config(config, overrides or [])
    if threads is not None:
        cfg = cfg.model_copy(update={"threads": threads})
    return cfg


def validate_output_dir(output: Path) -> Path:
    """Validate output directory path."""
    try:
        output = output.resolve()

        if output.exists():
            if not output.is_dir():
                console.print(f"[red]✗ Output path is not a directory:[/red] {output}")
                raise typer.Exit(EXIT_INPUT_ERROR)
        else:
            output.mkdir(parents=True, exist_ok=True)
            console.print(f"[dim]Created output directory: {output}[/dim]")

        return output
    except PermissionError:
        console.print(f"[red]✗ Permission denied:[/red] Cannot create {output}")
        raise typer.Exit(EXIT_INPUT_ERROR) from None
    except OSError as e:
        console.print(f"[red]✗ Invalid path:[/red] {e}")
        raise typer.Exit(EXIT_INPUT_ERROR) from None


def print_banner() -> None:
    """Print babblenhmm banner."""
    banner = Panel(
        "[bold green]babblenhmm[/bold green] — Speech Enhancement in Babble Noise\n"
        f"[dim]Version {__version__}[/dim]",
        border_style="green",
        padding=(0, 2),
    )
    console.print(banner)


def print_session_info(title: str, rows: dict[str, str]) -> None:
    """Print run information as a key/value table."""
    table = Table(show_header=False, box=None, padding=(0, 2))
    table.add_column("Key", style="dim")
    table.add_column("Value")

    for key, value in rows.items():
        table.add_row(key, value)

    console.print(f"\n[bold]{title}:[/bold]")
    console.print(table)


def require_signals(signals: list[LoadedSignal], role: str) -> list[LoadedSignal]:
    if not signals:
        raise InputError(f"manifest has no {role} entries")
    return signals


def load_models(speech_path: Path, babble_path: Path) -> tuple[SpeechHmm, BabbleNhmm]:
    """Load a speech model and the babble model trained against it."""
    speech, _ = load_speech_model(speech_path)
    babble, _ = load_babble_model(babble_path, speech, file_sha256(speech_path))
    return speech, babble


@app.command("train-speech")
def train_speech(
    manifest: Annotated[Path, typer.Argument(help="Corpus manifest with speech-train entries", exists=True)],
    output: OutputDirOption,
    config: ConfigOption = None,
    overrides: SetOption = None,
    threads: ThreadsOption = None,
    verbose: VerboseOption = False,
) -> None:
    """
    Train the gamma-HMM speech model.

    Writes [cyan]speech_model.json[/cyan], [cyan]training_log.csv[/cyan] and [cyan]config.json[/cyan].
    """
    print_banner()
    setup_logging(verbose)
    with handle_errors():
        cfg = resolve_config(config, overrides, threads)
        output = validate_output_dir(output)
        signals = require_signals(load_role(load_manifest(manifest), "speech-train", cfg.frame), "speech-train")
        print_session_info(
            "Training Configuration",
            {
                "Manifest": f"[blue]{manifest}[/blue]",
                "Output": f"[yellow]{output}[/yellow]",
                "Utterances": str(len(signals)),
                "States": str(cfg.speech.n_states),
                "Iterations": str(cfg.speech.n_iters),
            },
        )

        powers = [power_spectrogram(s.signal, cfg.frame) for s in signals]
        result = train(
            powers,
            n_states=cfg.speech.n_states,
            n_iters=cfg.speech.n_iters,
            seed=cfg.speech.seed,
            threads=cfg.threads,
            gain_shape=cfg.speech.initial_gain_shape,
        )
        provenance = SpeechProvenance(
            frame=cfg.frame,
            corpus_sha256=corpus_sha256([s.signal for s in signals]),
            n_iters=cfg.speech.n_iters,
            seed=cfg.speech.seed,
            package_version=__version__,
            loglik_trace=result.loglik_trace,
            gains=result.gains,
        )
        model_path = save_speech_model(result.model, provenance, output / "speech_model.json")
        write_training_log(output / "training_log.csv", result.loglik_trace)
        write_snapshot(cfg, output)

    console.print(f"\n[green]✓[/green] Speech model saved to [cyan]{model_path}[/cyan]")
    if result.loglik_trace:
        console.print(f"  Final log-likelihood: {result.loglik_trace[-1]:.4f}")


@app.command("train-babble")
def train_babble_command(
    manifest: Annotated[Path, typer.Argument(help="Corpus manifest with babble-train entries", exists=True)],
    speech_model: SpeechModelOption,
    output: OutputDirOption,
    config: ConfigOption = None,
    overrides: SetOption = None,
    threads: ThreadsOption = None,
    verbose: VerboseOption = False,
) -> None:
    """
    Train the babble NHMM over a trained speech basis.

    Optional [cyan]babble-init[/cyan] entries supply per-speaker streams for initialisation.
    """
    print_banner()
    setup_logging(verbose)
    with handle_errors():
        cfg = resolve_config(config, overrides, threads)
        output = validate_output_dir(output)
        speech, _ = load_speech_model(speech_model)
        corpus = load_manifest(manifest)
        signals = require_signals(load_role(corpus, "babble-train", cfg.frame), "babble-train")
        init_streams = load_role(corpus, "babble-init", cfg.frame)
        print_session_info(
            "Training Configuration",
            {
                "Manifest": f"[blue]{manifest}[/blue]",
                "Speech model": f"[blue]{speech_model}[/blue]",
                "Output": f"[yellow]{output}[/yellow]",
                "Recordings": str(len(signals)),
                "Init streams": str(len(init_streams)) if init_streams else "self-projection",
                "States": str(cfg.babble.n_states),
                "Iterations": str(cfg.babble.n_iters),
            },
        )

        init_coefficients = None
        if init_streams:
            init_coefficients = []
            for stream in init_streams:
                power = power_spectrogram(stream.signal, cfg.frame)
                init_coefficients.append(nmf_project(speech, estimate_gain_scale(speech, power), power).coefficients)

        powers = [power_spectrogram(s.signal, cfg.frame) for s in signals]
        result = train_babble(
            powers,
            speech,
            n_states=cfg.babble.n_states,
            n_iters=cfg.babble.n_iters,
            seed=cfg.babble.seed,
            cccp_iters=cfg.babble.cccp_iters,
            threads=cfg.threads,
            gain_shape=cfg.babble.initial_gain_shape,
            init_coefficients=init_coefficients,
        )
        provenance = BabbleProvenance(
            frame=cfg.frame,
            corpus_sha256=corpus_sha256([s.signal for s in signals]),
            n_iters=cfg.babble.n_iters,
            seed=cfg.babble.seed,
            package_version=__version__,
            loglik_trace=result.loglik_trace,
            gains=result.gains,
            cccp_iterations=result.cccp_iterations,
            init_source="speaker-streams" if init_streams else "self-projection",
        )
        model_path = save_babble_model(
            result.model, provenance, file_sha256(speech_model), output / "babble_model.json"
        )
        write_training_log(output / "training_log.csv", result.loglik_trace, result.cccp_iterations)
        write_snapshot(cfg, output)

    console.print(f"\n[green]✓[/green] Babble model saved to [cyan]{model_path}[/cyan]")
    if result.loglik_trace:
        console.print(f"  Final log-likelihood: {result.loglik_trace[-1]:.4f}")


@app.command()
def enhance(
    noisy: Annotated[Path, typer.Argument(help="Noisy mono WAV file", exists=True, dir_okay=False)],
    speech_model: SpeechModelOption,
    babble_model: BabbleModelOption,
    output: OutputDirOption,
    speech_level: Annotated[
        float | None, typer.Option("--speech-level", help="Initial speech gain scale", min=0.0)
    ] = None,
    babble_level: Annotated[
        float | None, typer.Option("--babble-level", help="Initial babble gain scale", min=0.0)
    ] = None,
    config: ConfigOption = None,
    overrides: SetOption = None,
    threads: ThreadsOption = None,
    verbose: VerboseOption = False,
) -> None:
    """
    Enhance a noisy recording.

    Writes [cyan]enhanced.wav[/cyan], [cyan]diagnostics.jsonl[/cyan] and [cyan]config.json[/cyan].
    """
    print_banner()
    setup_logging(verbose)
    with handle_errors():
        cfg = resolve_config(config, overrides, threads)
        output = validate_output_dir(output)
        speech, babble = load_models(speech_model, babble_model)
        composite = CompositeModel.from_models(speech, babble)
        signal, rate = read_wav(noisy, expected_rate=cfg.frame.sample_rate)
        print_session_info(
            "Enhancement Configuration",
            {
                "Input": f"[blue]{noisy}[/blue]",
                "Output": f"[yellow]{output}[/yellow]",
                "Composite states": f"{composite.n_speech} x {composite.n_babble} = {composite.n_states}",
                "Duration": f"{signal.size / rate:.2f}s",
            },
        )

        init_levels = None
        if speech_level is not None or babble_level is not None:
            if speech_level is None or babble_level is None or speech_level <= 0 or babble_level <= 0:
                raise InputError("--speech-level and --babble-level must be given together and be positive")
            init_levels = (speech_level, babble_level)

        result = enhance_signal(signal, composite, cfg.frame, cfg.enhance, init_levels)
        enhanced = np.zeros_like(signal)
        enhanced[: result.signal.size] = result.signal[: signal.size]

        wav_path = write_wav(output / "enhanced.wav", enhanced, rate)
        header = DiagnosticsHeader(
            n_frames=len(result.diagnostics),
            n_speech_states=composite.n_speech,
            n_babble_states=composite.n_babble,
            initial_speech_level=result.initial_levels[0],
            initial_babble_level=result.initial_levels[1],
        )
        write_diagnostics(output / "diagnostics.jsonl", header, result.diagnostics)
        write_snapshot(cfg, output)

    flagged = sum(1 for d in result.diagnostics if d.map_unconverged or d.hessian_clamped or d.weights_underflow)
    console.print(f"\n[green]✓[/green] Enhanced audio saved to [cyan]{wav_path}[/cyan]")
    if flagged:
        console.print(f"[yellow]⚠[/yellow] {flagged} frames carry numerical flags, see diagnostics.jsonl")


def render_spectrograms(signals: dict[str, np.ndarray], cfg: RunConfig, output: Path) -> list[SpectrogramImage]:
    """Render one PNG per signal into ``output/spectrograms``."""
    images = []
    for label, signal in signals.items():
        relative = Path("spectrograms") / f"{label}.png"
        render_spectrogram(periodogram(stft(signal, cfg.frame)), output / relative)
        images.append(SpectrogramImage(label=label, path=relative))
    return images


def export_report(report: Report, output: Path) -> list[Path]:
    """Write the report in every format."""
    return [exporter.export(report, output) for exporter in (JSONExporter(), CSVExporter(), MarkdownExporter(), HTMLExporter())]


def print_evaluation(summary: EvaluationSummary) -> None:
    table = Table(title="Objective measures (dB)")
    table.add_column("Signal")
    for column in ("SDR", "SNR", "SegSNR", "SD"):
        table.add_column(column, justify="right")
    for name, m in (("noisy", summary.noisy.metrics), ("enhanced", summary.enhanced.metrics)):
        table.add_row(name, f"{m.sdr_db:.2f}", f"{m.snr_db:.2f}", f"{m.segsnr_db:.2f}", f"{m.sd_db:.2f}")
    d = summary.delta
    table.add_row("change", f"{d.sdr_db:+.2f}", f"{d.snr_db:+.2f}", f"{d.segsnr_db:+.2f}", f"{d.sd_db:+.2f}")
    console.print(table)
    if summary.shadow is not None:
        console.print(
            f"Shadow filtering: speech SegSNR {summary.shadow.speech_segsnr_db:.2f} dB, "
            f"SegNR {summary.shadow.segnr_db:.2f} dB"
        )


@app.command()
def evaluate(
    clean: Annotated[Path, typer.Option("--clean", help="Clean reference WAV", exists=True, dir_okay=False)],
    output: OutputDirOption,
    noisy: Annotated[
        Path | None, typer.Option("--noisy", help="Noisy WAV (default: clean + noise)", exists=True, dir_okay=False)
    ] = None,
    noise: Annotated[
        Path | None, typer.Option("--noise", help="Noise component WAV, enables shadow filtering", exists=True, dir_okay=False)
    ] = None,
    enhanced: Annotated[
        Path | None, typer.Option("--enhanced", help="Enhanced WAV (default: enhance with the models)", exists=True, dir_okay=False)
    ] = None,
    speech_model: Annotated[
        Path | None, typer.Option("--speech-model", help="Speech model file", exists=True, dir_okay=False)
    ] = None,
    babble_model: Annotated[
        Path | None, typer.Option("--babble-model", help="Babble model file", exists=True, dir_okay=False)
    ] = None,
    input_snr: Annotated[float | None, typer.Option("--input-snr", help="Known mixture SNR in dB")] = None,
    title: Annotated[str, typer.Option("--title", help="Report title")] = "Enhancement evaluation",
    config: ConfigOption = None,
    overrides: SetOption = None,
    threads: ThreadsOption = None,
    verbose: VerboseOption = False,
) -> None:
    """
    Score noisy and enhanced speech against the clean reference.

    Writes [cyan]report.json[/cyan], [cyan]report.csv[/cyan], [cyan]report.md[/cyan] and
    [cyan]report.html[/cyan] with absolute and changed measures.
    """
    print_banner()
    setup_logging(verbose)
    with handle_errors():
        cfg = resolve_config(config, overrides, threads)
        output = validate_output_dir(output)
        rate = cfg.frame.sample_rate
        clean_signal, _ = read_wav(clean, rate)
        noise_signal = read_wav(noise, rate)[0] if noise is not None else None

        if noisy is not None:
            noisy_signal, _ = read_wav(noisy, rate)
        elif noise_signal is not None:
            n = min(clean_signal.size, noise_signal.size)
            noisy_signal = clean_signal[:n] + noise_signal[:n]
        else:
            raise InputError("give --noisy or --noise")

        composite = None
        if speech_model is not None and babble_model is not None:
            composite = CompositeModel.from_models(*load_models(speech_model, babble_model))
        elif speech_model is not None or babble_model is not None:
            raise InputError("--speech-model and --babble-model must be given together")

        if enhanced is not None:
            enhanced_signal, _ = read_wav(enhanced, rate)
        elif composite is not None:
            enhanced_signal = enhance_signal(noisy_signal, composite, cfg.frame, cfg.enhance).signal
        else:
            raise InputError("give --enhanced or both model files")

        shadow = None
        if noise_signal is not None and composite is not None:
            model = composite
            n = min(clean_signal.size, noise_signal.size)
            shadow = shadow_filter_eval(
                clean_signal[:n],
                noise_signal[:n],
                lambda spec: enhance_spectrogram(spec, model, cfg.enhance)[1],
                cfg.frame,
                cfg.evaluation,
            )

        summary = evaluate_enhancement(
            clean_signal, noisy_signal, enhanced_signal, cfg.frame, cfg.evaluation, input_snr, shadow
        )
        images = render_spectrograms(
            {"clean": clean_signal, "noisy": noisy_signal, "enhanced": enhanced_signal}, cfg, output
        )
        report = Report(
            kind="evaluation",
            title=title,
            package_version=__version__,
            config=cfg,
            evaluation=summary,
            spectrograms=images,
        )
        paths = export_report(report, output)
        write_snapshot(cfg, output)

    print_evaluation(summary)
    console.print(f"\n[green]✓[/green] Report saved to [cyan]{paths[0].parent}[/cyan]")


@app.command("cross-predict")
def cross_predict_command(
    manifest: Annotated[Path, typer.Argument(help="Manifest with speech-test and babble-test entries", exists=True)],
    speech_model: SpeechModelOption,
    babble_model: BabbleModelOption,
    output: OutputDirOption,
    config: ConfigOption = None,
    overrides: SetOption = None,
    threads: ThreadsOption = None,
    verbose: VerboseOption = False,
) -> None:
    """
    Cross-predictive model-fit test.

    Every held-out signal is reconstructed through both models; each type should be
    reconstructed best by its own model.
    """
    print_banner()
    setup_logging(verbose)
    with handle_errors():
        cfg = resolve_config(config, overrides, threads)
        output = validate_output_dir(output)
        speech, babble = load_models(speech_model, babble_model)
        corpus = load_manifest(manifest)
        speech_test = require_signals(load_role(corpus, "speech-test", cfg.frame), "speech-test")
        babble_test = require_signals(load_role(corpus, "babble-test", cfg.frame), "babble-test")

        result = cross_predict(
            [s.signal for s in speech_test],
            [s.signal for s in babble_test],
            speech,
            babble,
            cfg.frame,
            cfg.evaluation,
            cfg.threads,
        )
        report = Report(
            kind="cross-predict",
            title="Cross-predictive test",
            package_version=__version__,
            config=cfg,
            cross_prediction=result,
        )
        export_report(report, output)
        write_snapshot(cfg, output)

    for matrix in (result.sd, result.segsnr):
        table = Table(title=f"{matrix.metric} ({'lower' if matrix.lower_is_better else 'higher'} is better)")
        table.add_column("Signal \\ Model")
        for column in matrix.columns:
            table.add_column(column, justify="right")
        for row, values in zip(matrix.rows, matrix.values, strict=True):
            table.add_row(row, *(f"{v:.2f}" for v in values))
        console.print(table)

    if result.diagonal_dominant:
        console.print("[bold green]✓ Both matrices are diagonally dominant[/bold green]")
    else:
        console.print("[bold yellow]⚠ Not diagonally dominant[/bold yellow]")


@app.command("synth-babble")
def synth_babble_command(
    sources: Annotated[list[Path], typer.Argument(help="One mono WAV per speaker", exists=True, dir_okay=False)],
    output: Annotated[Path, typer.Option("--output", "-o", help="Output WAV file")],
    offsets: Annotated[
        str | None, typer.Option("--offsets", help="Comma-separated per-speaker level offsets in dB")
    ] = None,
    seed: Annotated[int, typer.Option("--seed", help="Recorded in the mix description")] = 0,
    config: ConfigOption = None,
    overrides: SetOption = None,
    threads: ThreadsOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Mix speakers at equal active-speech level into artificial babble."""
    print_banner()
    setup_logging(verbose)
    with handle_errors():
        cfg = resolve_config(config, overrides, threads)
        signals = [read_wav(path, cfg.frame.sample_rate)[0] for path in sources]
        try:
            offsets_db = [float(v) for v in offsets.split(",")] if offsets else [0.0] * len(signals)
        except ValueError as e:
            raise InputError(f"offsets must be comma-separated numbers: {e}") from e
        try:
            spec = MixSpec(speaker_count=len(signals), offsets_db=offsets_db, seed=seed)
        except ValueError as e:
            raise InputError(str(e)) from e
        mix = synth_babble(signals, spec, cfg.frame)
        path = write_wav(output, mix.signal, cfg.frame.sample_rate)

    console.print(f"\n[green]✓[/green] Babble of {len(signals)} speakers saved to [cyan]{path}[/cyan]")
    console.print(f"  Peak scale: {mix.peak_scale:.6g}")


@app.command("synth-speech")
def synth_speech_command(
    output: OutputDirOption,
    states: Annotated[int, typer.Option("--states", help="States of the generating model", min=1)] = 3,
    frames: Annotated[int, typer.Option("--frames", help="Frames per utterance", min=2)] = 2000,
    count: Annotated[int, typer.Option("--count", help="Number of utterances", min=1)] = 1,
    seed: Annotated[int, typer.Option("--seed", help="Model and sampling seed")] = 0,
    config: ConfigOption = None,
    overrides: SetOption = None,
    verbose: VerboseOption = False,
) -> None:
    """
    Write a synthetic gamma-HMM speech corpus.

    Utterances go to [cyan]utt_NNN.wav[/cyan]; the generating model is saved as
    [cyan]ground_truth.json[/cyan] in the speech model format.
    """
    print_banner()
    setup_logging(verbose)
    with handle_errors():
        cfg = resolve_config(config, overrides, None)
        output = validate_output_dir(output)
        model = synthetic_model(states, cfg.frame.n_bins, seed)
        signals = []
        gains = []
        for index in range(count):
            sample = gen_synthetic_speech(
                states, cfg.frame.n_bins, frames, seed=seed * 1000 + index, model=model, frame_cfg=cfg.frame
            )
            assert sample.signal is not None
            write_wav(output / f"utt_{index:03d}.wav", sample.signal, cfg.frame.sample_rate)
            signals.append(sample.signal)
            gains.append(sample.gain_scale)
        provenance = SpeechProvenance(
            frame=cfg.frame,
            corpus_sha256=corpus_sha256(signals),
            n_iters=0,
            seed=seed,
            package_version=__version__,
            loglik_trace=[],
            gains=gains,
        )
        save_speech_model(model, provenance, output / "ground_truth.json")
        write_snapshot(cfg, output)

    console.print(f"\n[green]✓[/green] {count} synthetic utterances saved to [cyan]{output}[/cyan]")


@app.command()
def version() -> None:
    """Show version and system information."""
    print_banner()

    table = Table(show_header=False, box=None, padding=(0, 2))
    table.add_column("Component", style="dim")
    table.add_column("Version")

    table.add_row("babblenhmm", __version__)
    py_ver = f"{sys.version_info.major}.{sys.version_info.minor}.{sys.version_info.micro}"
    table.add_row("Python", py_ver)

    for label, module_name in (("NumPy", "numpy"), ("SciPy", "scipy"), ("Pydantic", "pydantic")):
        try:
            module = __import__(module_name)
            table.add_row(label, module.__version__)
        except ImportError:
            table.add_row(label, "[red]Not installed[/red]")

    console.print("\n[bold]System Information:[/bold]")
    console.print(table)


@app.command()
def check() -> None:
    """Check if all dependencies are properly installed."""
    print_banner()
    console.print("\n[bold]Checking dependencies...[/bold]\n")

    all_ok = True

    py_version = f"{sys.version_info.major}.{sys.version_info.minor}"
    console.print(f"[green]✓[/green] Python {py_version}")

    packages = [
        ("numpy", "numpy"),
        ("scipy", "scipy"),
        ("soundfile", "soundfile"),
        ("pydantic", "pydantic"),
        ("typer", "typer"),
        ("rich", "rich"),
        ("jinja2", "jinja2"),
        ("PIL", "pillow"),
    ]

    for import_name, package_name in packages:
        try:
            __import__(import_name)
            console.print(f"[green]✓[/green] {package_name}")
        except (ImportError, OSError):
            console.print(f"[red]✗[/red] {package_name} — [dim]pip install {package_name}[/dim]")
            all_ok = False

    console.print()
    if all_ok:
        console.print("[bold green]✓ All checks passed![/bold green]")
    else:
        console.print("[bold yellow]⚠ Some checks failed. See above for details.[/bold yellow]")
        raise typer.Exit(1)


if __name__ == "__main__":
    app()
