"""Shared discrete-state HMM machinery: scaled forward-backward, transitions, clustering."""

import logging
from typing import NamedTuple

import numpy as np
from scipy.cluster.vq import kmeans2

from babblenhmm.errors import InputError, NumericalError

logger = logging.getLogger(__name__)

ROW_SUM_TOLERANCE = 1e-12
SCALE_FLOOR = 1e-300
STATIONARY_TOLERANCE = 1e-12
STATIONARY_MAX_ITERS = 200


def check_transitions(trans: np.ndarray) -> None:
    """Raise InputError unless ``trans`` is a square, nonnegative, row-stochastic matrix."""
    a = np.asarray(trans)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"transition matrix must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)) or np.any(a < 0):
        raise InputError("transition matrix must be finite and nonnegative")
    worst = float(np.max(np.abs(a.sum(axis=1) - 1.0)))
    if worst > ROW_SUM_TOLERANCE:
        raise InputError(f"transition rows must sum to 1 (worst deviation {worst:.3e})")


def stationary_distribution(trans: np.ndarray) -> np.ndarray:
    """
    Stationary vector p = p @ trans by power iteration on (trans + I) / 2.

    The lazy chain has the same stationary vector and converges for periodic chains too.
    The operator is squared after every step, so slowly mixing chains need few iterations.
    """
    a = np.asarray(trans, dtype=np.float64)
    n = a.shape[0]
    power = 0.5 * (a + np.eye(n))
    p = np.full(n, 1.0 / n)
    for _ in range(STATIONARY_MAX_ITERS):
        nxt = p @ power
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - p)) < STATIONARY_TOLERANCE:
            return nxt
        p = nxt
        power = power @ power
        power /= power.sum(axis=1, keepdims=True)
    logger.warning("stationary distribution did not converge to %.0e", STATIONARY_TOLERANCE)
    return p


class ForwardBackwardResult(NamedTuple):
    """Smoothed posteriors, expected transition counts and the exact log-likelihood."""

    posteriors: np.ndarray
    transition_counts: np.ndarray
    loglik: float


def forward_backward(
    trans: np.ndarray,
    loglik: np.ndarray,
    initial: np.ndarray | None = None,
) -> ForwardBackwardResult:
    """
    Scaled forward-backward recursion.

    Each frame's likelihoods are shifted by their maximum before exponentiation; the shifts and
    the per-frame scaling factors add up to the exact total log-likelihood.

    Args:
        trans: Row-stochastic transition matrix, shape (N, N)
        loglik: Per-frame state log-likelihoods, shape (T, N)
        initial: Initial state distribution; the stationary vector of ``trans`` when omitted

    Returns:
        ForwardBackwardResult with posteriors (T, N), summed pairwise posteriors (N, N)
        and total log-likelihood
    """
    check_transitions(trans)
    ll = np.asarray(loglik, dtype=np.float64)
    if ll.ndim != 2 or ll.shape[1] != trans.shape[0]:
        raise InputError(f"loglik must have shape (T, {trans.shape[0]}), got {ll.shape}")
    if not np.all(np.isfinite(ll)):
        raise NumericalError("state log-likelihoods contain non-finite values")
    n_frames, n_states = ll.shape
    p0 = stationary_distribution(trans) if initial is None else np.asarray(initial, dtype=np.float64)

    shift = ll.max(axis=1)
    emission = np.exp(ll - shift[:, np.newaxis])

    alpha = np.empty((n_frames, n_states))
    scale = np.empty(n_frames)
    predicted = p0
    for t in range(n_frames):
        joint = predicted * emission[t]
        scale[t] = max(joint.sum(), SCALE_FLOOR)
        alpha[t] = joint / scale[t]
        predicted = alpha[t] @ trans

    beta = np.empty((n_frames, n_states))
    beta[-1] = 1.0
    counts = np.zeros((n_states, n_states))
    for t in range(n_frames - 2, -1, -1):
        weighted = emission[t + 1] * beta[t + 1] / scale[t + 1]
        counts += trans * np.outer(alpha[t], weighted)
        beta[t] = trans @ weighted

    posteriors = alpha * beta
    posteriors /= posteriors.sum(axis=1, keepdims=True)
    total = float(np.sum(np.log(scale)) + np.sum(shift))
    return ForwardBackwardResult(posteriors=posteriors, transition_counts=counts, loglik=total)


def _transition_objective(
    trans: np.ndarray, counts: np.ndarray, first_posteriors: np.ndarray
) -> float:
    """Expected complete-data log-likelihood of the transitions plus the stationary initial term."""
    with np.errstate(divide="ignore"):
        log_a = np.log(trans)
        log_p = np.log(stationary_distribution(trans))
    value = np.sum(np.where(counts > 0, counts * log_a, 0.0))
    value += np.sum(np.where(first_posteriors > 0, first_posteriors * log_p, 0.0))
    return float(value)


def update_transitions(
    trans: np.ndarray,
    counts: np.ndarray,
    first_posteriors: np.ndarray,
) -> np.ndarray:
    """
    Baum-Welch transition update for a chain started in its stationary distribution.

    The ratio update ignores the initial-state term, so the step towards it is halved until the
    full expected log-likelihood does not drop. Rows with no expected transitions are kept.

    Args:
        trans: Current transitions, shape (N, N)
        counts: Summed pairwise posteriors over all sequences, shape (N, N)
        first_posteriors: Summed first-frame posteriors over all sequences, shape (N,)

    Returns:
        New row-stochastic transition matrix
    """
    row_totals = counts.sum(axis=1, keepdims=True)
    proposal = np.where(row_totals > 0, counts / np.where(row_totals > 0, row_totals, 1.0), trans)
    proposal /= proposal.sum(axis=1, keepdims=True)

    baseline = _transition_objective(trans, counts, first_posteriors)
    step = 1.0
    for _ in range(30):
        candidate = trans + step * (proposal - trans)
        candidate /= candidate.sum(axis=1, keepdims=True)
        if _transition_objective(candidate, counts, first_posteriors) >= baseline:
            return candidate
        step *= 0.5
    return np.array(trans, dtype=np.float64)


def kmeans_centroids(data: np.ndarray, n_clusters: int, seed: int) -> np.ndarray:
    """
    Seeded k-means++ clustering of the rows of ``data``.

    Returns:
        Centroids, shape (n_clusters, D)
    """
    x = np.asarray(data, dtype=np.float64)
    if x.shape[0] < n_clusters:
        raise InputError(f"need at least {n_clusters} vectors to form {n_clusters} clusters, got {x.shape[0]}")
    centroids, _ = kmeans2(x, n_clusters, iter=50, minit="++", missing="warn", seed=np.random.default_rng(seed))
    return np.asarray(centroids, dtype=np.float64)
