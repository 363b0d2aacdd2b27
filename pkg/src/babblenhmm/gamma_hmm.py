"""
Ergodic gamma-HMM of speech power spectra with a gamma-distributed stochastic gain.

Given state i and gain g, each periodogram bin is gamma distributed with shape ``shape[k]`` and
scale ``g * basis[k, i]``; the gain is gamma distributed with shape ``gain_shape`` and a scale
that is constant over an utterance. The gain integrates out in closed form through Bessel K.
"""

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import gammaln

from babblenhmm.dsp import floor_power
from babblenhmm.errors import InputError, NumericalError
from babblenhmm.gig import GigMoments, GigParams, gig_moments_array, log_bessel_k
from babblenhmm.hmm import (
    ROW_SUM_TOLERANCE,
    forward_backward,
    kmeans_centroids,
    stationary_distribution,
    update_transitions,
)
from babblenhmm.shapes import solve_shape_equation, solve_shape_equations

logger = logging.getLogger(__name__)

EMPTY_STATE_OCCUPANCY = 1e-8
LN2 = float(np.log(2.0))


class SpeechHmm(BaseModel):
    """Trained speech prior; immutable and safe to share between threads."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    trans: np.ndarray = Field(description="Row-stochastic transitions, shape (N, N)")
    basis: np.ndarray = Field(description="Positive gamma scale parameters, shape (K, N)")
    shape: np.ndarray = Field(description="Positive per-bin gamma shapes, shape (K,)")
    gain_shape: float = Field(gt=0, description="Shape of the gamma gain prior")

    @model_validator(mode="after")
    def _check_invariants(self) -> "SpeechHmm":
        n = self.trans.shape[0]
        if self.trans.shape != (n, n):
            raise ValueError(f"trans must be square, got {self.trans.shape}")
        if np.any(self.trans < 0) or np.max(np.abs(self.trans.sum(axis=1) - 1.0)) > ROW_SUM_TOLERANCE:
            raise ValueError("trans must be nonnegative with rows summing to 1")
        if self.basis.ndim != 2 or self.basis.shape[1] != n:
            raise ValueError(f"basis must have shape (K, {n}), got {self.basis.shape}")
        if not np.all(np.isfinite(self.basis)) or np.any(self.basis <= 0):
            raise ValueError("basis entries must be finite and strictly positive")
        if self.shape.shape != (self.basis.shape[0],):
            raise ValueError(f"shape must have length {self.basis.shape[0]}, got {self.shape.shape}")
        if not np.all(np.isfinite(self.shape)) or np.any(self.shape <= 0):
            raise ValueError("shape entries must be finite and strictly positive")
        return self

    @property
    def n_states(self) -> int:
        return int(self.trans.shape[0])

    @property
    def n_bins(self) -> int:
        return int(self.basis.shape[0])

    @property
    def mean_basis(self) -> np.ndarray:
        """Conditional mean spectra per unit gain, shape * basis (the NMF basis)."""
        return self.shape[:, np.newaxis] * self.basis


def check_power(power: np.ndarray, n_bins: int) -> np.ndarray:
    """Validate a positive (K, T) power matrix; a 1-D frame becomes a single column."""
    p = np.asarray(power, dtype=np.float64)
    if p.ndim == 1:
        p = p[:, np.newaxis]
    if p.ndim != 2 or p.shape[0] != n_bins:
        raise InputError(f"power must have {n_bins} bins, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise InputError("power must be finite and strictly positive (floor it first)")
    return p


def gain_marginal_loglik(
    power: np.ndarray,
    scales: np.ndarray,
    shape: np.ndarray,
    gain_shape: float,
    gain_scale: float,
) -> np.ndarray:
    """
    Log-density of each power frame under each scale column with the gain integrated out.

    Args:
        power: Positive periodogram, shape (K, T)
        scales: Positive per-state scale columns, shape (K, N)
        shape: Per-bin gamma shapes, shape (K,)
        gain_shape: Gain prior shape
        gain_scale: Gain prior scale

    Returns:
        Log-likelihoods, shape (T, N)
    """
    p = check_power(power, scales.shape[0])
    order = gain_shape - float(shape.sum())
    rate = 1.0 / gain_scale
    mass = p.T @ (1.0 / scales)
    log_p = np.log(p)

    ll = (
        LN2
        + 0.5 * order * (np.log(mass) - np.log(rate))
        + log_bessel_k(order, 2.0 * np.sqrt(rate * mass))
        - gain_shape * np.log(gain_scale)
        - gammaln(gain_shape)
    )
    ll += ((shape - 1.0) @ log_p)[:, np.newaxis]
    ll -= (shape @ np.log(scales))[np.newaxis, :]
    ll -= float(np.sum(gammaln(shape)))

    bad = ~np.isfinite(ll)
    if np.any(bad):
        frame, state = np.argwhere(bad)[0]
        raise NumericalError(f"non-finite log-likelihood for state {state} at frame {frame}")
    return ll


def state_loglik(model: SpeechHmm, gain_scale: float, obs: np.ndarray) -> np.ndarray:
    """log f(obs | state i) for every state, gain integrated out; shape (N,)."""
    return gain_marginal_loglik(obs, model.basis, model.shape, model.gain_shape, gain_scale)[0]


def gain_posterior(model: SpeechHmm, gain_scale: float, obs: np.ndarray, state: int) -> GigParams:
    """GIG posterior of the gain given one power frame and a state."""
    o = np.asarray(obs, dtype=np.float64)
    return GigParams(
        order=model.gain_shape - float(model.shape.sum()),
        rate=1.0 / gain_scale,
        mass=float(np.sum(o / model.basis[:, state])),
    )


def gain_moments(
    power: np.ndarray,
    scales: np.ndarray,
    shape: np.ndarray,
    gain_shape: float,
    gain_scale: float,
) -> GigMoments:
    """GIG gain-posterior moments for every (frame, state), each of shape (T, N)."""
    mass = power.T @ (1.0 / scales)
    return gig_moments_array(gain_shape - float(shape.sum()), 1.0 / gain_scale, mass)


class SequenceStats(NamedTuple):
    """E-step statistics of one power spectrogram."""

    loglik: float
    occupancy: np.ndarray
    weighted_obs: np.ndarray
    log_obs_sum: np.ndarray
    log_gain_total: float
    gain_mean: float
    n_frames: int
    transition_counts: np.ndarray
    first_posterior: np.ndarray
    posteriors: np.ndarray
    moments: GigMoments


def sequence_stats(
    power: np.ndarray,
    trans: np.ndarray,
    scales: np.ndarray,
    shape: np.ndarray,
    gain_shape: float,
    gain_scale: float,
) -> SequenceStats:
    """
    Run the E-step for one sequence.

    Shared by the speech and babble models, which differ only in the scale columns.
    """
    ll = gain_marginal_loglik(power, scales, shape, gain_shape, gain_scale)
    fb = forward_backward(trans, ll, initial=stationary_distribution(trans))
    omega = fb.posteriors
    moments = gain_moments(power, scales, shape, gain_shape, gain_scale)
    return SequenceStats(
        loglik=fb.loglik,
        occupancy=omega.sum(axis=0),
        weighted_obs=power @ (omega * moments.inverse_mean),
        log_obs_sum=np.log(power).sum(axis=1),
        log_gain_total=float(np.sum(omega * moments.log_mean)),
        gain_mean=float(np.mean(np.sum(omega * moments.mean, axis=1))),
        n_frames=int(power.shape[1]),
        transition_counts=fb.transition_counts,
        first_posterior=omega[0],
        posteriors=omega,
        moments=moments,
    )


def collect_stats(
    corpus: Sequence[np.ndarray],
    trans: np.ndarray,
    scales: np.ndarray,
    shape: np.ndarray,
    gain_shape: float,
    gain_scales: Sequence[float],
    threads: int | None,
) -> list[SequenceStats]:
    """E-step over a corpus; results come back in corpus order."""
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(
            pool.map(
                lambda item: sequence_stats(item[0], trans, scales, shape, gain_shape, item[1]),
                zip(corpus, gain_scales, strict=True),
            )
        )


def update_gain_prior(stats: Sequence[SequenceStats]) -> tuple[float, list[float]]:
    """
    Joint update of the shared gain shape and the per-sequence gain scales.

    Returns:
        Tuple (gain_shape, gain_scales)
    """
    total_frames = sum(s.n_frames for s in stats)
    c = sum(s.log_gain_total - s.n_frames * np.log(s.gain_mean) for s in stats) / total_frames
    gain_shape = solve_shape_equation(float(c))
    return gain_shape, [s.gain_mean / gain_shape for s in stats]


def validate_corpus(corpus: Sequence[np.ndarray], min_frames: int = 2) -> list[np.ndarray]:
    """Check a training corpus of power spectrograms and floor every frame."""
    if len(corpus) == 0:
        raise InputError("training corpus is empty")
    out = []
    n_bins = None
    for idx, power in enumerate(corpus):
        p = np.asarray(power, dtype=np.float64)
        if p.ndim != 2:
            raise InputError(f"sequence {idx}: power must be 2-D (bins, frames), got {p.shape}")
        if p.shape[1] < min_frames:
            raise InputError(f"sequence {idx}: needs at least {min_frames} frames, got {p.shape[1]}")
        if n_bins is None:
            n_bins = p.shape[0]
        elif p.shape[0] != n_bins:
            raise InputError(f"sequence {idx}: {p.shape[0]} bins, expected {n_bins}")
        out.append(floor_power(p))
    return out


class SpeechTrainingResult(BaseModel):
    """Trained speech model plus per-utterance gains and the likelihood trace."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    model: SpeechHmm = Field(description="Trained model (basis normalised to unit mean)")
    gains: list[float] = Field(description="Per-utterance gain scales")
    loglik_trace: list[float] = Field(description="Total log-likelihood at each E-step")


def initial_gain_scale(power: np.ndarray, mean_scale: float, gain_shape: float) -> float:
    """Gain scale that matches a sequence's mean power under a model's mean scale."""
    return float(np.mean(power) / (gain_shape * mean_scale))


def train(
    corpus: Sequence[np.ndarray],
    n_states: int,
    n_iters: int,
    seed: int,
    threads: int | None = None,
    gain_shape: float = 15.0,
) -> SpeechTrainingResult:
    """
    Baum-Welch training of a gamma-HMM on power spectrograms.

    Args:
        corpus: Power spectrograms, each shape (K, T) with T >= 2
        n_states: Number of states
        n_iters: EM iterations
        seed: K-means seed for the initial basis
        threads: E-step worker threads (None = all cores)
        gain_shape: Initial gain prior shape

    Returns:
        SpeechTrainingResult
    """
    powers = validate_corpus(corpus)
    n_bins = powers[0].shape[0]

    log_frames = np.concatenate([np.log(p).T for p in powers], axis=0)
    basis = np.exp(kmeans_centroids(log_frames, n_states, seed)).T
    shape = np.ones(n_bins)
    trans = np.full((n_states, n_states), 1.0 / n_states)
    mean_scale = float(np.mean(shape[:, np.newaxis] * basis))
    gains = [initial_gain_scale(p, mean_scale, gain_shape) for p in powers]

    trace: list[float] = []
    for iteration in range(n_iters):
        stats = collect_stats(powers, trans, basis, shape, gain_shape, gains, threads)
        total = float(sum(s.loglik for s in stats))
        trace.append(total)
        logger.info("speech EM iteration %d/%d: loglik %.6f", iteration + 1, n_iters, total)

        occupancy = sum(s.occupancy for s in stats)
        weighted_obs = sum(s.weighted_obs for s in stats)
        total_frames = sum(s.n_frames for s in stats)
        active = occupancy >= EMPTY_STATE_OCCUPANCY
        if not np.all(active):
            logger.warning(
                "states %s have no occupancy, their basis columns are kept",
                np.flatnonzero(~active).tolist(),
            )

        # Per-state mean of obs * E(1/G); inactive states fall back to their current mean
        mu = np.where(
            active[np.newaxis, :],
            weighted_obs / np.where(active, occupancy, 1.0)[np.newaxis, :],
            shape[:, np.newaxis] * basis,
        )
        c = (
            sum(s.log_obs_sum for s in stats)
            - np.log(mu) @ occupancy
            - sum(s.log_gain_total for s in stats)
        ) / total_frames
        shape = solve_shape_equations(c)
        basis = np.where(active[np.newaxis, :], mu / shape[:, np.newaxis], basis)

        gain_shape, gains = update_gain_prior(stats)
        trans = update_transitions(
            trans,
            sum(s.transition_counts for s in stats),
            sum(s.first_posterior for s in stats),
        )

    # Fix the basis/gain scale ambiguity: unit mean of shape * basis
    norm = float(np.mean(shape[:, np.newaxis] * basis))
    basis = basis / norm
    gains = [g * norm for g in gains]

    model = SpeechHmm(trans=trans, basis=basis, shape=shape, gain_shape=gain_shape)
    return SpeechTrainingResult(model=model, gains=gains, loglik_trace=trace)


def estimate_gain_scale(
    model: SpeechHmm,
    power: np.ndarray,
    n_iters: int = 10,
    initial: float | None = None,
) -> float:
    """
    Gain scale of an unseen sequence with all other parameters frozen.

    Fixed-point EM on the single scale: scale = mean posterior gain / gain_shape.
    """
    p = check_power(floor_power(power), model.n_bins)
    if initial is None:
        scale = initial_gain_scale(p, float(np.mean(model.mean_basis)), model.gain_shape)
    else:
        scale = initial
    for _ in range(n_iters):
        s = sequence_stats(p, model.trans, model.basis, model.shape, model.gain_shape, scale)
        scale = s.gain_mean / model.gain_shape
    return float(scale)


class NmfProjection(NamedTuple):
    """Coefficients, basis and approximation of an HMM-as-NMF projection."""

    coefficients: np.ndarray
    basis: np.ndarray
    approximation: np.ndarray


def nmf_project(model: SpeechHmm, gain_scale: float, power: np.ndarray) -> NmfProjection:
    """
    Probabilistic NMF view of the speech model.

    Coefficients are posterior state probabilities times posterior mean gains; the basis is
    shape * basis, so ``basis @ coefficients`` is the posterior-mean power.

    Returns:
        NmfProjection with coefficients (N, T), basis (K, N) and approximation (K, T)
    """
    p = check_power(floor_power(power), model.n_bins)
    s = sequence_stats(p, model.trans, model.basis, model.shape, model.gain_shape, gain_scale)
    coefficients = (s.posteriors * s.moments.mean).T
    basis = model.mean_basis
    return NmfProjection(coefficients=coefficients, basis=basis, approximation=basis @ coefficients)
