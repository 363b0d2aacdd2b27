"""
Online MMSE speech enhancement under the speech and babble priors.

Each frame is explained by every composite state (speech state i, babble state j). For each one
the speech and babble gains are set to their MAP values by EM, the gain-marginal likelihood is
approximated by Laplace's method, and the state-conditional Wiener gains are averaged with the
resulting posterior weights. The gain-prior scales are tracked by recursive EM.

Enhancement uses exponential emissions (unit shapes); models trained with general shapes are
folded into their scales.
"""

import logging
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import gammaln

from babblenhmm.babble import BabbleNhmm
from babblenhmm.config import EnhancerConfig, FrameConfig
from babblenhmm.dsp import Spectrogram, floor_power, istft, periodogram, stft
from babblenhmm.errors import InputError
from babblenhmm.gamma_hmm import SpeechHmm
from babblenhmm.hmm import stationary_distribution
from babblenhmm.models import FrameDiagnostics

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))
LOG_PI = float(np.log(np.pi))
DET_FLOOR = 1e-12
# MAP gains are kept above this fraction of their prior mean
GAIN_FLOOR = 1e-12


class CompositeModel(BaseModel):
    """Speech x babble composite prior in the exponential case."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    speech_scales: np.ndarray = Field(description="Speech mean spectra per unit gain, shape (K, Ns)")
    babble_scales: np.ndarray = Field(description="Babble mean spectra per unit gain, shape (K, Nb)")
    speech_trans: np.ndarray = Field(description="Speech transitions, shape (Ns, Ns)")
    babble_trans: np.ndarray = Field(description="Babble transitions, shape (Nb, Nb)")

    @model_validator(mode="after")
    def _check_shapes(self) -> "CompositeModel":
        if self.speech_scales.shape[0] != self.babble_scales.shape[0]:
            raise ValueError("speech and babble scales must share the number of bins")
        if self.speech_trans.shape != (self.n_speech, self.n_speech):
            raise ValueError("speech transitions do not match the speech scales")
        if self.babble_trans.shape != (self.n_babble, self.n_babble):
            raise ValueError("babble transitions do not match the babble scales")
        if np.any(self.speech_scales <= 0) or np.any(self.babble_scales <= 0):
            raise ValueError("composite scales must be strictly positive")
        return self

    @classmethod
    def from_models(cls, speech: SpeechHmm, babble: BabbleNhmm) -> "CompositeModel":
        """Combine trained models, folding non-unit shapes into the scales."""
        if babble.n_bins != speech.n_bins or babble.speech.n_states != speech.n_states:
            raise InputError(
                f"babble model expects K={babble.n_bins}, N={babble.speech.n_states}; "
                f"speech model has K={speech.n_bins}, N={speech.n_states}"
            )
        if not np.allclose(speech.shape, 1.0):
            logger.warning("speech model has general shapes, enhancing with unit shapes and scaled basis")
        if not np.allclose(babble.shape, 1.0):
            logger.warning("babble model has general shapes, enhancing with unit shapes and scaled states")
        return cls(
            speech_scales=speech.mean_basis,
            babble_scales=babble.shape[:, np.newaxis] * (speech.basis @ babble.state_values.T),
            speech_trans=speech.trans,
            babble_trans=babble.trans,
        )

    @property
    def n_bins(self) -> int:
        return int(self.speech_scales.shape[0])

    @property
    def n_speech(self) -> int:
        return int(self.speech_scales.shape[1])

    @property
    def n_babble(self) -> int:
        return int(self.babble_scales.shape[1])

    @property
    def n_states(self) -> int:
        return self.n_speech * self.n_babble

    def speech_columns(self) -> np.ndarray:
        """Speech scale of every composite state (i, j) at column i * Nb + j; shape (K, N)."""
        return np.repeat(self.speech_scales, self.n_babble, axis=1)

    def babble_columns(self) -> np.ndarray:
        """Babble scale of every composite state; shape (K, N)."""
        return np.tile(self.babble_scales, (1, self.n_speech))

    def initial_forward(self) -> np.ndarray:
        """Product of the two stationary distributions, flattened."""
        return np.outer(
            stationary_distribution(self.speech_trans), stationary_distribution(self.babble_trans)
        ).ravel()

    def predict(self, forward: np.ndarray) -> np.ndarray:
        """One-step prediction through the factorised transitions."""
        f = forward.reshape(self.n_speech, self.n_babble)
        return (self.speech_trans.T @ f @ self.babble_trans).ravel()

    def composite_transitions(self) -> np.ndarray:
        """Explicit (N, N) transition matrix; only used for checks on small models."""
        return np.kron(self.speech_trans, self.babble_trans)


class EnhancerState(BaseModel):
    """Online state of one enhancement stream."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    speech_level: float = Field(gt=0, description="Online speech gain scale")
    babble_level: float = Field(gt=0, description="Online babble gain scale")
    speech_info: float = Field(gt=0, description="Speech information accumulator")
    babble_info: float = Field(gt=0, description="Babble information accumulator")
    forward: np.ndarray = Field(description="Filtered composite state probabilities, shape (N,)")
    smoothed_gain: np.ndarray = Field(description="Smoothed output gain memory, shape (K,)")
    frame_index: int = Field(default=0, ge=0, description="Index of the next frame")

    @model_validator(mode="after")
    def _check_invariants(self) -> "EnhancerState":
        if np.any(self.forward < 0) or abs(float(self.forward.sum()) - 1.0) > 1e-10:
            raise ValueError("forward vector must be a probability vector")
        if np.any(self.smoothed_gain < 0) or np.any(self.smoothed_gain > 1):
            raise ValueError("smoothed gains must lie in [0, 1]")
        return self


def initial_levels(power: np.ndarray, model: CompositeModel, cfg: EnhancerConfig) -> tuple[float, float]:
    """
    Starting gain scales from the leading frames, read as babble at 0 dB.

    Returns:
        Tuple (speech_level, babble_level)
    """
    lead = float(np.mean(power[:, : cfg.init_frames]))
    speech = lead / (cfg.speech_gain_shape * float(np.mean(model.speech_scales)))
    babble = lead / (cfg.babble_gain_shape * float(np.mean(model.babble_scales)))
    return (
        float(np.clip(speech, cfg.level_min, cfg.level_max)),
        float(np.clip(babble, cfg.level_min, cfg.level_max)),
    )


def initial_state(
    model: CompositeModel,
    cfg: EnhancerConfig,
    speech_level: float,
    babble_level: float,
) -> EnhancerState:
    """Fresh stream state: stationary forward vector, unit gain memory, floor-valued accumulators."""
    return EnhancerState(
        speech_level=speech_level,
        babble_level=babble_level,
        speech_info=cfg.speech_info_floor,
        babble_info=cfg.babble_info_floor,
        forward=model.initial_forward(),
        smoothed_gain=np.ones(model.n_bins),
    )


def map_gain_update(c_stat: np.ndarray, n_bins: int, level: float, gain_shape: float) -> np.ndarray:
    """
    Nonnegative root of g^2 + level*(K - gain_shape + 1)*g - level*c_stat = 0.

    The closed-form M-step for a gain given the expected normalised component power ``c_stat``.
    """
    c = np.asarray(c_stat, dtype=np.float64)
    a = level * (n_bins - (gain_shape - 1.0))
    disc = np.sqrt(a * a + 4.0 * level * c)
    if a > 0:
        return 2.0 * level * c / (a + disc)
    return (-a + disc) / 2.0


def wiener_moments(
    power: np.ndarray, speech_var: np.ndarray, babble_var: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Per-bin Wiener gain and posterior second moments of the speech and babble components.

    Returns:
        Tuple (gain, E|X|^2, E|V|^2), each shaped like ``speech_var``
    """
    total = speech_var + babble_var
    gain = speech_var / total
    residual = speech_var * babble_var / total
    y = power if power.ndim == speech_var.ndim else power[:, np.newaxis]
    return gain, gain**2 * y + residual, (1.0 - gain) ** 2 * y + residual


class MapGains(NamedTuple):
    """MAP gains per composite state."""

    speech: np.ndarray
    babble: np.ndarray
    converged: np.ndarray
    iterations: int


def _map_em(
    power: np.ndarray,
    speech_cols: np.ndarray,
    babble_cols: np.ndarray,
    speech_gain: np.ndarray,
    babble_gain: np.ndarray,
    levels: tuple[float, float],
    shapes: tuple[float, float],
    tolerance: float,
    max_iters: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    n_bins = power.shape[0]
    g, h = speech_gain.copy(), babble_gain.copy()
    g_floor = GAIN_FLOOR * shapes[0] * levels[0]
    h_floor = GAIN_FLOOR * shapes[1] * levels[1]
    active = np.ones(g.shape, dtype=bool)
    iters = 0
    for iters in range(1, max_iters + 1):
        idx = np.flatnonzero(active)
        cs, cb = speech_cols[:, idx], babble_cols[:, idx]
        _, ex, ev = wiener_moments(power, g[idx] * cs, h[idx] * cb)
        g_new = np.maximum(map_gain_update((ex / cs).sum(axis=0), n_bins, levels[0], shapes[0]), g_floor)
        h_new = np.maximum(map_gain_update((ev / cb).sum(axis=0), n_bins, levels[1], shapes[1]), h_floor)
        change = np.abs(g_new - g[idx]) / g_new + np.abs(h_new - h[idx]) / h_new
        g[idx], h[idx] = g_new, h_new
        active[idx[change < tolerance]] = False
        if not active.any():
            break
    return g, h, ~active, iters


def map_gains(
    power: np.ndarray,
    speech_cols: np.ndarray,
    babble_cols: np.ndarray,
    speech_level: float,
    babble_level: float,
    speech_gain_shape: float,
    babble_gain_shape: float,
    tolerance: float = 1e-6,
    max_iters: int = 50,
) -> MapGains:
    """
    MAP speech and babble gains of one frame for every composite state.

    EM with the complex speech and babble components as hidden data, started at the prior means.
    States that do not converge restart once from 1.5 times the prior means.

    Args:
        power: Floored periodogram of the frame, shape (K,)
        speech_cols: Speech scale per state, shape (K, N)
        babble_cols: Babble scale per state, shape (K, N)
        speech_level: Speech gain scale
        babble_level: Babble gain scale
        speech_gain_shape: Speech gain prior shape
        babble_gain_shape: Babble gain prior shape
        tolerance: Stop when |dg|/g + |dh|/h falls below this
        max_iters: Iteration cap per attempt

    Returns:
        MapGains with per-state gains and convergence flags
    """
    n = speech_cols.shape[1]
    levels = (speech_level, babble_level)
    shapes = (speech_gain_shape, babble_gain_shape)
    g0 = np.full(n, speech_gain_shape * speech_level)
    h0 = np.full(n, babble_gain_shape * babble_level)
    g, h, converged, iters = _map_em(power, speech_cols, babble_cols, g0, h0, levels, shapes, tolerance, max_iters)

    retry = np.flatnonzero(~converged)
    if retry.size:
        g2, h2, ok, more = _map_em(
            power,
            speech_cols[:, retry],
            babble_cols[:, retry],
            1.5 * g0[retry],
            1.5 * h0[retry],
            levels,
            shapes,
            tolerance,
            max_iters,
        )
        g[retry], h[retry] = g2, h2
        converged[retry] = ok
        iters += more
    return MapGains(speech=g, babble=h, converged=converged, iterations=iters)


def _log_gamma_pdf(x: np.ndarray, shape: float, scale: float) -> np.ndarray:
    return (shape - 1.0) * np.log(x) - x / scale - shape * np.log(scale) - gammaln(shape)


def map_objective(
    power: np.ndarray,
    speech_cols: np.ndarray,
    babble_cols: np.ndarray,
    speech_gain: np.ndarray,
    babble_gain: np.ndarray,
    speech_level: float,
    babble_level: float,
    speech_gain_shape: float,
    babble_gain_shape: float,
) -> np.ndarray:
    """log f(y | g, h, state) + log f(g) + log f(h) per state; y is complex Gaussian per bin."""
    var = speech_gain * speech_cols + babble_gain * babble_cols
    y = power[:, np.newaxis]
    log_lik = -np.sum(LOG_PI + np.log(var) + y / var, axis=0)
    return (
        log_lik
        + _log_gamma_pdf(speech_gain, speech_gain_shape, speech_level)
        + _log_gamma_pdf(babble_gain, babble_gain_shape, babble_level)
    )


def neg_log_hessian(
    power: np.ndarray,
    speech_cols: np.ndarray,
    babble_cols: np.ndarray,
    speech_gain: np.ndarray,
    babble_gain: np.ndarray,
    speech_gain_shape: float,
    babble_gain_shape: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Entries of the negative Hessian of ln f(y, g, h | state) with respect to (g, h).

    Returns:
        Tuple (a_gg, a_gh, a_hh), each shape (N,)
    """
    var = speech_gain * speech_cols + babble_gain * babble_cols
    factor = (1.0 - 2.0 * power[:, np.newaxis] / var) / var**2
    a_gg = (speech_gain_shape - 1.0) / speech_gain**2 - np.sum(speech_cols**2 * factor, axis=0)
    a_gh = -np.sum(speech_cols * babble_cols * factor, axis=0)
    a_hh = (babble_gain_shape - 1.0) / babble_gain**2 - np.sum(babble_cols**2 * factor, axis=0)
    return a_gg, a_gh, a_hh


def laplace_correction(
    a_gg: np.ndarray | float, a_gh: np.ndarray | float, a_hh: np.ndarray | float
) -> tuple[np.ndarray, np.ndarray]:
    """
    log(2 pi) - 0.5 log det A for 2x2 negative Hessians A.

    Non-positive determinants are clamped to 1e-12 and flagged.

    Returns:
        Tuple (correction, clamped)
    """
    det = np.asarray(a_gg) * np.asarray(a_hh) - np.asarray(a_gh) ** 2
    clamped = ~(det > 0)
    det = np.where(clamped, DET_FLOOR, det)
    return LOG_2PI - 0.5 * np.log(det), clamped


class LaplaceWeight(NamedTuple):
    """Approximate log f(y | state) per composite state."""

    log_weight: np.ndarray
    clamped: np.ndarray


def laplace_weight(
    power: np.ndarray,
    speech_cols: np.ndarray,
    babble_cols: np.ndarray,
    speech_gain: np.ndarray,
    babble_gain: np.ndarray,
    speech_level: float,
    babble_level: float,
    speech_gain_shape: float,
    babble_gain_shape: float,
) -> LaplaceWeight:
    """Laplace approximation of the gain-marginal likelihood around the MAP gains."""
    peak = map_objective(
        power,
        speech_cols,
        babble_cols,
        speech_gain,
        babble_gain,
        speech_level,
        babble_level,
        speech_gain_shape,
        babble_gain_shape,
    )
    hessian = neg_log_hessian(
        power, speech_cols, babble_cols, speech_gain, babble_gain, speech_gain_shape, babble_gain_shape
    )
    correction, clamped = laplace_correction(*hessian)
    return LaplaceWeight(log_weight=peak + correction, clamped=clamped)


class LevelUpdate(NamedTuple):
    """Recursive-EM output for both gain scales."""

    speech_level: float
    babble_level: float
    speech_info: float
    babble_info: float


def _track_level(
    level: float,
    info: float,
    weights: np.ndarray,
    gains: np.ndarray,
    gain_shape: float,
    forgetting: float,
    info_floor: float,
    bounds: tuple[float, float],
) -> tuple[float, float]:
    score = float(weights @ (-gain_shape / level + gains / level**2))
    curvature = float(weights @ (-gain_shape / level**2 + 2.0 * gains / level**3))
    new_info = forgetting * info + max(info_floor, curvature)
    new_level = float(np.clip(level + score / new_info, bounds[0], bounds[1]))
    return new_level, new_info


def recursive_update(
    state: EnhancerState,
    weights: np.ndarray,
    speech_gains: np.ndarray,
    babble_gains: np.ndarray,
    cfg: EnhancerConfig,
) -> LevelUpdate:
    """
    One recursive-EM step for the speech and babble gain scales.

    Args:
        state: State before the frame
        weights: Posterior composite-state weights of the frame, summing to 1
        speech_gains: MAP speech gain per state
        babble_gains: MAP babble gain per state
        cfg: Forgetting factors, information floors and level bounds

    Returns:
        LevelUpdate
    """
    bounds = (cfg.level_min, cfg.level_max)
    speech_level, speech_info = _track_level(
        state.speech_level,
        state.speech_info,
        weights,
        speech_gains,
        cfg.speech_gain_shape,
        cfg.speech_forgetting,
        cfg.speech_info_floor,
        bounds,
    )
    babble_level, babble_info = _track_level(
        state.babble_level,
        state.babble_info,
        weights,
        babble_gains,
        cfg.babble_gain_shape,
        cfg.babble_forgetting,
        cfg.babble_info_floor,
        bounds,
    )
    return LevelUpdate(speech_level, babble_level, speech_info, babble_info)


class FrameOutput(NamedTuple):
    """Result of enhancing one frame."""

    estimate: np.ndarray
    gain: np.ndarray
    state: EnhancerState
    diagnostics: FrameDiagnostics


def enhance_frame(
    frame: np.ndarray,
    model: CompositeModel,
    state: EnhancerState,
    cfg: EnhancerConfig,
) -> FrameOutput:
    """
    MMSE estimate of one frame's clean speech DFT coefficients.

    Args:
        frame: Noisy DFT coefficients, shape (K,)
        model: Composite prior
        state: Stream state before this frame
        cfg: Enhancer constants

    Returns:
        FrameOutput with the estimate, the smoothed gain and the updated state
    """
    y = np.asarray(frame)
    if y.shape != (model.n_bins,):
        raise InputError(f"frame must have {model.n_bins} bins, got shape {y.shape}")
    power = floor_power((y.real**2 + y.imag**2)[:, np.newaxis])[:, 0]
    speech_cols, babble_cols = model.speech_columns(), model.babble_columns()

    prior = model.predict(state.forward)
    gains = map_gains(
        power,
        speech_cols,
        babble_cols,
        state.speech_level,
        state.babble_level,
        cfg.speech_gain_shape,
        cfg.babble_gain_shape,
        tolerance=cfg.map_tolerance,
        max_iters=cfg.map_max_iters,
    )
    if not gains.converged.all():
        logger.warning(
            "frame %d: MAP gains did not converge for %d states",
            state.frame_index,
            int((~gains.converged).sum()),
        )
    evidence = laplace_weight(
        power,
        speech_cols,
        babble_cols,
        gains.speech,
        gains.babble,
        state.speech_level,
        state.babble_level,
        cfg.speech_gain_shape,
        cfg.babble_gain_shape,
    )
    if evidence.clamped.any():
        logger.warning(
            "frame %d: Hessian determinant clamped for %d states",
            state.frame_index,
            int(evidence.clamped.sum()),
        )

    with np.errstate(divide="ignore"):
        log_post = np.log(prior) + evidence.log_weight
    top = np.max(log_post)
    underflow = not np.isfinite(top)
    if underflow:
        logger.warning("frame %d: all state weights underflowed, using uniform weights", state.frame_index)
        weights = np.full(model.n_states, 1.0 / model.n_states)
    else:
        weights = np.exp(log_post - top)
        weights /= weights.sum()

    wiener, _, _ = wiener_moments(power, gains.speech * speech_cols, gains.babble * babble_cols)
    gain = np.clip(wiener @ weights, 0.0, 1.0)
    smoothed = np.clip(cfg.smoothing_memory * state.smoothed_gain + cfg.smoothing_update * gain, 0.0, 1.0)

    levels = recursive_update(state, weights, gains.speech, gains.babble, cfg)
    new_state = EnhancerState(
        speech_level=levels.speech_level,
        babble_level=levels.babble_level,
        speech_info=levels.speech_info,
        babble_info=levels.babble_info,
        forward=weights,
        smoothed_gain=smoothed,
        frame_index=state.frame_index + 1,
    )
    best = int(np.argmax(weights))
    diagnostics = FrameDiagnostics(
        frame=state.frame_index,
        speech_level=levels.speech_level,
        babble_level=levels.babble_level,
        speech_state=best // model.n_babble,
        babble_state=best % model.n_babble,
        top_weight=float(weights[best]),
        mean_gain=float(np.mean(smoothed)),
        map_unconverged=int((~gains.converged).sum()),
        hessian_clamped=int(evidence.clamped.sum()),
        weights_underflow=underflow,
    )
    return FrameOutput(estimate=smoothed * y, gain=smoothed, state=new_state, diagnostics=diagnostics)


class EnhancementResult(NamedTuple):
    """Enhanced signal with per-frame gains and diagnostics."""

    signal: np.ndarray
    gains: np.ndarray
    diagnostics: list[FrameDiagnostics]
    initial_levels: tuple[float, float]


def enhance_spectrogram(
    spec: Spectrogram,
    model: CompositeModel,
    cfg: EnhancerConfig,
    init_levels: tuple[float, float] | None = None,
) -> tuple[Spectrogram, np.ndarray, list[FrameDiagnostics], tuple[float, float]]:
    """Run the online enhancer over every frame in time order."""
    if spec.n_bins != model.n_bins:
        raise InputError(f"spectrogram has {spec.n_bins} bins, models have {model.n_bins}")
    if init_levels is None:
        init_levels = initial_levels(floor_power(periodogram(spec)), model, cfg)
    state = initial_state(model, cfg, *init_levels)

    estimate = np.empty_like(spec.frames)
    gains = np.empty(spec.frames.shape)
    diagnostics: list[FrameDiagnostics] = []
    for t in range(spec.n_frames):
        out = enhance_frame(spec.frames[:, t], model, state, cfg)
        estimate[:, t], gains[:, t] = out.estimate, out.gain
        diagnostics.append(out.diagnostics)
        state = out.state
    return Spectrogram(frames=estimate, config=spec.config), gains, diagnostics, init_levels


def enhance_signal(
    noisy: np.ndarray,
    model: CompositeModel,
    frame_cfg: FrameConfig,
    cfg: EnhancerConfig,
    init_levels: tuple[float, float] | None = None,
) -> EnhancementResult:
    """
    Enhance a noisy signal: STFT, per-frame enhancement, overlap-add.

    Args:
        noisy: Mono signal
        model: Composite prior
        frame_cfg: Frame grid
        cfg: Enhancer constants
        init_levels: (speech_level, babble_level) before the first frame; estimated from the
            leading frames when omitted

    Returns:
        EnhancementResult; the signal has length (T - 1) * hop + frame_len
    """
    spec = stft(noisy, frame_cfg)
    enhanced, gains, diagnostics, levels = enhance_spectrogram(spec, model, cfg, init_levels)
    logger.info(
        "enhanced %d frames, final levels speech %.3e babble %.3e",
        spec.n_frames,
        diagnostics[-1].speech_level,
        diagnostics[-1].babble_level,
    )
    return EnhancementResult(signal=istft(enhanced), gains=gains, diagnostics=diagnostics, initial_levels=levels)
