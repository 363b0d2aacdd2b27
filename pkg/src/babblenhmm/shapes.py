"""Scalar solvers for gamma shape parameters."""

import logging
from collections.abc import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.special import digamma

from babblenhmm.errors import NumericalError

logger = logging.getLogger(__name__)

# Search interval in ln(u)
LOG_SHAPE_MIN = -20.0
LOG_SHAPE_MAX = float(np.log(1e4))
_XTOL = 1e-14


def _solve_in_log_domain(residual: Callable[[float], float], target: float, label: str) -> float:
    """Root of an increasing ``residual`` in z = ln(u), pinned to the interval ends."""
    if residual(LOG_SHAPE_MIN) >= 0:
        logger.warning("%s: no root above u=exp(%g) for %g, pinned at lower bound", label, LOG_SHAPE_MIN, target)
        return float(np.exp(LOG_SHAPE_MIN))
    if residual(LOG_SHAPE_MAX) <= 0:
        logger.warning("%s: no root below u=1e4 for %g, pinned at upper bound", label, target)
        return float(np.exp(LOG_SHAPE_MAX))
    z = brentq(residual, LOG_SHAPE_MIN, LOG_SHAPE_MAX, xtol=_XTOL, rtol=4 * np.finfo(float).eps)
    return float(np.exp(z))


def solve_shape_equation(c: float) -> float:
    """
    Solve digamma(u) - ln(u) = c for u > 0.

    The left side increases from -inf towards 0, so there is a root only for c < 0;
    c >= 0 pins u at 1e4 with a warning.
    """
    if not np.isfinite(c):
        raise NumericalError(f"shape equation right-hand side is not finite: {c}")
    if c >= 0:
        logger.warning("shape equation: c=%g >= 0 has no root, pinned at upper bound", c)
        return float(np.exp(LOG_SHAPE_MAX))
    return _solve_in_log_domain(
        lambda z: float(digamma(np.exp(z)) - z - c), c, "shape equation"
    )


def inverse_digamma(y: float) -> float:
    """Solve digamma(u) = y for u > 0."""
    if not np.isfinite(y):
        raise NumericalError(f"digamma inversion target is not finite: {y}")
    return _solve_in_log_domain(lambda z: float(digamma(np.exp(z)) - y), y, "digamma inversion")


def solve_shape_equations(c: np.ndarray) -> np.ndarray:
    """Elementwise ``solve_shape_equation``."""
    return np.array([solve_shape_equation(float(v)) for v in np.ravel(c)]).reshape(np.shape(c))


def inverse_digamma_array(y: np.ndarray) -> np.ndarray:
    """Elementwise ``inverse_digamma``."""
    return np.array([inverse_digamma(float(v)) for v in np.ravel(y)]).reshape(np.shape(y))
