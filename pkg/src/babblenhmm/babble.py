"""
Gamma nonnegative HMM (NHMM) of babble noise.

Babble states are nonnegative weight vectors over the speech basis instead of indicator
vectors: state j has per-bin scales ``speech.basis @ state_values[j]``. Everything else mirrors
the speech model, with its own shapes, gain prior and transitions. State vectors are fitted by
the concave-convex procedure (CCCP) inside EM.
"""

import logging
from collections.abc import Sequence
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from babblenhmm.dsp import floor_power
from babblenhmm.errors import InputError, NumericalError
from babblenhmm.gamma_hmm import (
    EMPTY_STATE_OCCUPANCY,
    NmfProjection,
    SequenceStats,
    SpeechHmm,
    check_power,
    collect_stats,
    estimate_gain_scale as estimate_speech_gain_scale,
    gain_marginal_loglik,
    initial_gain_scale,
    nmf_project as speech_nmf_project,
    sequence_stats,
    update_gain_prior,
    validate_corpus,
)
from babblenhmm.hmm import ROW_SUM_TOLERANCE, kmeans_centroids, update_transitions
from babblenhmm.shapes import inverse_digamma_array

logger = logging.getLogger(__name__)

NEWTON_MAX_ITERS = 50
ARMIJO_SLOPE = 1e-4
MAX_HALVINGS = 40
ACTIVE_SET_EPS = 1e-12
OBJECTIVE_TOLERANCE = 1e-10


class BabbleNhmm(BaseModel):
    """Trained babble prior, linked to the speech model whose basis it reuses."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    trans: np.ndarray = Field(description="Row-stochastic transitions, shape (M, M)")
    state_values: np.ndarray = Field(description="Nonnegative weights over speech states, shape (M, N)")
    shape: np.ndarray = Field(description="Positive per-bin gamma shapes, shape (K,)")
    gain_shape: float = Field(gt=0, description="Shape of the gamma gain prior")
    speech: SpeechHmm = Field(description="Speech model providing the basis")

    @model_validator(mode="after")
    def _check_invariants(self) -> "BabbleNhmm":
        m = self.trans.shape[0]
        if self.trans.shape != (m, m):
            raise ValueError(f"trans must be square, got {self.trans.shape}")
        if np.any(self.trans < 0) or np.max(np.abs(self.trans.sum(axis=1) - 1.0)) > ROW_SUM_TOLERANCE:
            raise ValueError("trans must be nonnegative with rows summing to 1")
        if self.state_values.shape != (m, self.speech.n_states):
            raise ValueError(
                f"state_values must have shape ({m}, {self.speech.n_states}), got {self.state_values.shape}"
            )
        if not np.all(np.isfinite(self.state_values)) or np.any(self.state_values < 0):
            raise ValueError("state_values must be finite and nonnegative")
        if self.shape.shape != (self.speech.n_bins,):
            raise ValueError(f"shape must have length {self.speech.n_bins}, got {self.shape.shape}")
        if not np.all(np.isfinite(self.shape)) or np.any(self.shape <= 0):
            raise ValueError("shape entries must be finite and strictly positive")
        if np.any(self.scales <= 0):
            raise ValueError("every babble state needs a strictly positive scale in every bin")
        return self

    @property
    def n_states(self) -> int:
        return int(self.trans.shape[0])

    @property
    def n_bins(self) -> int:
        return self.speech.n_bins

    @property
    def scales(self) -> np.ndarray:
        """Per-state gamma scales, shape (K, M)."""
        return self.speech.basis @ self.state_values.T


def babble_state_loglik(model: BabbleNhmm, gain_scale: float, obs: np.ndarray) -> np.ndarray:
    """log f(obs | babble state j) for every state, gain integrated out; shape (M,)."""
    scales = model.scales
    if np.any(scales <= 0):
        raise InputError("babble state scales must be strictly positive")
    return gain_marginal_loglik(obs, scales, model.shape, model.gain_shape, gain_scale)[0]


def update_beta(mean_log_ratio: np.ndarray) -> np.ndarray:
    """
    Per-bin shape update: solve digamma(beta_k) = mean_log_ratio[k].

    Args:
        mean_log_ratio: Occupancy-weighted mean of ln(obs) - ln(scale) - E(ln H) per bin

    Returns:
        New shapes, shape (K,)
    """
    c = np.asarray(mean_log_ratio, dtype=np.float64)
    if not np.all(np.isfinite(c)):
        raise NumericalError("babble shape update has a non-finite right-hand side")
    return inverse_digamma_array(c)


class CccpStats(NamedTuple):
    """Sufficient statistics of one babble state for the CCCP subproblem."""

    weighted_obs: np.ndarray
    occupancy: float


class CccpResult(NamedTuple):
    """Updated state vector and the number of Newton iterations used."""

    state_value: np.ndarray
    newton_iters: int


def neg_expected_loglik(x: np.ndarray, stats: CccpStats, basis: np.ndarray, shape: np.ndarray) -> float:
    """The part of -Q that depends on one state vector: sum D/(b x) + W sum beta ln(b x)."""
    bx = basis @ x
    return float(np.sum(stats.weighted_obs / bx) + stats.occupancy * np.sum(shape * np.log(bx)))


def concave_gradient(anchor: np.ndarray, stats: CccpStats, basis: np.ndarray, shape: np.ndarray) -> np.ndarray:
    """Gradient of the concave part W sum beta ln(b x) at ``anchor``."""
    return stats.occupancy * (basis.T @ (shape / (basis @ anchor)))


def cccp_surrogate(
    x: np.ndarray,
    linear: np.ndarray,
    stats: CccpStats,
    basis: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray]:
    """
    Convex CCCP surrogate sum D/(b x) + x . linear with its gradient and Hessian.

    Returns:
        Tuple (value, gradient (N,), hessian (N, N))
    """
    bx = basis @ x
    d = stats.weighted_obs
    value = float(np.sum(d / bx) + x @ linear)
    gradient = linear - basis.T @ (d / bx**2)
    hessian = basis.T @ ((2.0 * d / bx**3)[:, np.newaxis] * basis)
    return value, gradient, hessian


def _surrogate_value(x: np.ndarray, linear: np.ndarray, stats: CccpStats, basis: np.ndarray) -> float:
    bx = basis @ x
    if np.any(bx <= 0):
        return np.inf
    return float(np.sum(stats.weighted_obs / bx) + x @ linear)


def cccp_step(
    state_value: np.ndarray,
    stats: CccpStats,
    basis: np.ndarray,
    shape: np.ndarray,
) -> CccpResult:
    """
    One CCCP round for a babble state vector.

    Linearises the concave part at ``state_value`` and minimises the convex remainder over
    x >= 0 by projected Newton with Armijo backtracking. Variables at the bound with a positive
    gradient are held fixed; a singular reduced Hessian falls back to a projected-gradient step.
    The result never increases the state's -Q.

    Args:
        state_value: Current nonnegative state vector, shape (N,)
        stats: Weighted observations D (K,) and occupancy W
        basis: Speech basis, shape (K, N)
        shape: Babble per-bin shapes, shape (K,)

    Returns:
        CccpResult
    """
    x = np.asarray(state_value, dtype=np.float64).copy()
    if np.any(x < 0) or np.any(basis @ x <= 0):
        raise InputError("CCCP needs a nonnegative state vector with positive scales in every bin")
    if stats.occupancy < EMPTY_STATE_OCCUPANCY:
        return CccpResult(state_value=x, newton_iters=0)

    linear = concave_gradient(x, stats, basis, shape)
    value, gradient, hessian = cccp_surrogate(x, linear, stats, basis)
    iters = 0
    for iters in range(1, NEWTON_MAX_ITERS + 1):
        fixed = (x <= ACTIVE_SET_EPS) & (gradient > 0)
        free = ~fixed
        projected = np.where(fixed, 0.0, gradient)
        if np.max(np.abs(projected)) <= 1e-12 * max(1.0, abs(value)):
            break

        direction = np.zeros_like(x)
        try:
            factor = cho_factor(hessian[np.ix_(free, free)])
            direction[free] = -cho_solve(factor, gradient[free])
        except LinAlgError:
            direction[free] = -gradient[free]

        accepted = False
        for candidate_dir in (direction, -projected):
            step = 1.0
            for _ in range(MAX_HALVINGS):
                candidate = np.maximum(x + step * candidate_dir, 0.0)
                cand_value = _surrogate_value(candidate, linear, stats, basis)
                if cand_value <= value + ARMIJO_SLOPE * (gradient @ (candidate - x)):
                    accepted = True
                    break
                step *= 0.5
            if accepted:
                break
        if not accepted:
            break

        improvement = value - cand_value
        x = candidate
        value, gradient, hessian = cccp_surrogate(x, linear, stats, basis)
        if improvement <= OBJECTIVE_TOLERANCE * max(1.0, abs(value)):
            break

    before = neg_expected_loglik(np.asarray(state_value, dtype=np.float64), stats, basis, shape)
    if neg_expected_loglik(x, stats, basis, shape) > before + OBJECTIVE_TOLERANCE:
        return CccpResult(state_value=np.asarray(state_value, dtype=np.float64).copy(), newton_iters=iters)
    return CccpResult(state_value=x, newton_iters=iters)


def init_states(per_speaker_coeffs: Sequence[np.ndarray], n_states: int, seed: int) -> np.ndarray:
    """
    Initial babble state vectors from per-speaker NMF coefficients.

    Coefficient matrices are cropped to the shortest, summed across speakers, and the columns
    are clustered into ``n_states`` groups.

    Args:
        per_speaker_coeffs: Coefficient matrices, each shape (N, T_m)
        n_states: Number of babble states
        seed: K-means seed

    Returns:
        Cluster means, shape (n_states, N), ordered by decreasing total weight
    """
    if len(per_speaker_coeffs) == 0:
        raise InputError("need at least one coefficient matrix")
    n_frames = min(u.shape[1] for u in per_speaker_coeffs)
    summed = sum(np.asarray(u, dtype=np.float64)[:, :n_frames] for u in per_speaker_coeffs)
    columns = np.asarray(summed).T
    if n_frames < n_states:
        raise InputError(f"{n_frames} coefficient frames cannot form {n_states} babble states")
    distinct = np.unique(columns, axis=0)
    if len(distinct) < n_states:
        raise InputError(f"only {len(distinct)} distinct coefficient frames for {n_states} babble states")
    if len(distinct) == n_states:
        centroids = np.maximum(distinct, 0.0)
    else:
        centroids = np.maximum(kmeans_centroids(columns, n_states, seed), 0.0)
    order = np.argsort(-centroids.sum(axis=1), kind="stable")
    return centroids[order]


class BabbleTrainingResult(BaseModel):
    """Trained babble model plus per-recording gains, likelihood trace and CCCP work."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    model: BabbleNhmm = Field(description="Trained model")
    gains: list[float] = Field(description="Per-recording gain scales")
    loglik_trace: list[float] = Field(description="Total log-likelihood at each E-step")
    cccp_iterations: list[int] = Field(description="Newton iterations spent in CCCP per EM iteration")


def _normalise_scale(state_values: np.ndarray, gains: list[float]) -> tuple[np.ndarray, list[float]]:
    """Divide the mean state l1 norm out of the state vectors and into the gains."""
    c = float(np.mean(state_values.sum(axis=1)))
    return state_values / c, [g * c for g in gains]


def _fallback_coefficients(powers: Sequence[np.ndarray], speech: SpeechHmm) -> list[np.ndarray]:
    """Project the babble recordings themselves through the speech model."""
    logger.info("no initialisation streams given, clustering the babble recordings' own projections")
    coeffs = []
    for p in powers:
        scale = estimate_speech_gain_scale(speech, p)
        coeffs.append(speech_nmf_project(speech, scale, p).coefficients)
    return [np.concatenate(coeffs, axis=1)]


def train_babble(
    corpus: Sequence[np.ndarray],
    speech_model: SpeechHmm,
    n_states: int,
    n_iters: int,
    seed: int,
    cccp_iters: int = 3,
    threads: int | None = None,
    gain_shape: float = 15.0,
    init_coefficients: Sequence[np.ndarray] | None = None,
) -> BabbleTrainingResult:
    """
    EM training of the babble NHMM against a fixed speech basis.

    Args:
        corpus: Babble power spectrograms, each shape (K, T)
        speech_model: Trained speech model
        n_states: Number of babble states
        n_iters: EM iterations
        seed: K-means seed
        cccp_iters: CCCP rounds per state per M-step
        threads: E-step worker threads (None = all cores)
        gain_shape: Initial gain prior shape
        init_coefficients: Per-speaker NMF coefficient streams for initialisation; the babble
            recordings' own projections are clustered when omitted

    Returns:
        BabbleTrainingResult
    """
    powers = validate_corpus(corpus)
    if powers[0].shape[0] != speech_model.n_bins:
        raise InputError(f"babble corpus has {powers[0].shape[0]} bins, speech model has {speech_model.n_bins}")
    basis = speech_model.basis

    coeffs = init_coefficients if init_coefficients is not None else _fallback_coefficients(powers, speech_model)
    state_values = init_states(coeffs, n_states, seed)
    empty = state_values.sum(axis=1) <= 0
    if np.any(empty):
        state_values[empty] = np.mean(np.concatenate(coeffs, axis=1), axis=1)

    shape = np.ones(speech_model.n_bins)
    trans = np.full((n_states, n_states), 1.0 / n_states)
    scales = basis @ state_values.T
    gains = [initial_gain_scale(p, float(np.mean(shape[:, np.newaxis] * scales)), gain_shape) for p in powers]
    state_values, gains = _normalise_scale(state_values, gains)

    trace: list[float] = []
    cccp_counts: list[int] = []
    for iteration in range(n_iters):
        scales = basis @ state_values.T
        stats: list[SequenceStats] = collect_stats(powers, trans, scales, shape, gain_shape, gains, threads)
        total = float(sum(s.loglik for s in stats))
        trace.append(total)
        logger.info("babble EM iteration %d/%d: loglik %.6f", iteration + 1, n_iters, total)

        occupancy = sum(s.occupancy for s in stats)
        weighted_obs = sum(s.weighted_obs for s in stats)
        total_frames = sum(s.n_frames for s in stats)

        trans = update_transitions(
            trans,
            sum(s.transition_counts for s in stats),
            sum(s.first_posterior for s in stats),
        )
        c = (
            sum(s.log_obs_sum for s in stats)
            - np.log(scales) @ occupancy
            - sum(s.log_gain_total for s in stats)
        ) / total_frames
        shape = update_beta(c)
        gain_shape, gains = update_gain_prior(stats)

        newton = 0
        new_values = state_values.copy()
        for j in range(n_states):
            state_stats = CccpStats(weighted_obs=weighted_obs[:, j], occupancy=float(occupancy[j]))
            x = state_values[j]
            for _ in range(cccp_iters):
                result = cccp_step(x, state_stats, basis, shape)
                x = result.state_value
                newton += result.newton_iters
            new_values[j] = x
        cccp_counts.append(newton)
        state_values, gains = _normalise_scale(new_values, gains)

    model = BabbleNhmm(
        trans=trans, state_values=state_values, shape=shape, gain_shape=gain_shape, speech=speech_model
    )
    return BabbleTrainingResult(model=model, gains=gains, loglik_trace=trace, cccp_iterations=cccp_counts)


def estimate_gain_scale(
    model: BabbleNhmm,
    power: np.ndarray,
    n_iters: int = 10,
    initial: float | None = None,
) -> float:
    """Gain scale of an unseen babble recording with all other parameters frozen."""
    p = check_power(floor_power(power), model.n_bins)
    scales = model.scales
    if initial is None:
        scale = initial_gain_scale(p, float(np.mean(model.shape[:, np.newaxis] * scales)), model.gain_shape)
    else:
        scale = initial
    for _ in range(n_iters):
        s = sequence_stats(p, model.trans, scales, model.shape, model.gain_shape, scale)
        scale = s.gain_mean / model.gain_shape
    return float(scale)


def nmf_project(model: BabbleNhmm, gain_scale: float, power: np.ndarray) -> NmfProjection:
    """
    Babble analogue of the NMF projection.

    Coefficients over the speech states are posterior-weighted state vectors times posterior mean
    gains; the basis is shape * speech basis.

    Returns:
        NmfProjection with coefficients (N, T), basis (K, N) and approximation (K, T)
    """
    p = check_power(floor_power(power), model.n_bins)
    s = sequence_stats(p, model.trans, model.scales, model.shape, model.gain_shape, gain_scale)
    coefficients = model.state_values.T @ (s.posteriors * s.moments.mean).T
    basis = model.shape[:, np.newaxis] * model.speech.basis
    return NmfProjection(coefficients=coefficients, basis=basis, approximation=basis @ coefficients)
