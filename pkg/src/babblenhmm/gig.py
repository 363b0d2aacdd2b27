"""
Modified Bessel functions of the second kind and the generalized inverse Gaussian (GIG).

The GIG with parameters (order, rate, mass) has density proportional to
``g**(order - 1) * exp(-rate * g - mass / g)``. It is the exact posterior of a gamma-distributed
gain under gamma-distributed power observations, so its moments drive both E-steps and the
NMF projection.
"""

from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import digamma, kve

from babblenhmm.errors import GigDomainError, NumericalError

GAMMA_LIMIT_ARGUMENT = 1e-12


def _log_bessel_k_recurrence(order: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Continue log K upward from fractional orders with the ratio form of the recurrence."""
    base = np.floor(order)
    frac = order - base
    steps = base.astype(np.int64)
    with np.errstate(all="ignore"):
        k_frac = kve(frac, x)
        log_k = np.log(k_frac) - x
        ratio = kve(frac + 1.0, x) / k_frac
    for m in range(int(steps.max(initial=0))):
        active = m < steps
        log_k = np.where(active, log_k + np.log(ratio), log_k)
        ratio = np.where(active, 1.0 / ratio + 2.0 * (frac + m + 1.0) / x, ratio)
    return log_k


def log_bessel_k(order: np.ndarray | float, x: np.ndarray | float) -> np.ndarray:
    """
    Log of K_order(x), broadcasting over both arguments.

    Uses the exponentially scaled ``kve``; where that overflows (large order, small argument)
    the value is continued by upward recurrence.

    Args:
        order: Real order; K is even in the order
        x: Argument, strictly positive

    Returns:
        log K_order(x) (0-d array for scalar input)
    """
    v, z = np.broadcast_arrays(
        np.abs(np.asarray(order, dtype=np.float64)), np.asarray(x, dtype=np.float64)
    )
    if np.any(~(z > 0)) or np.any(~np.isfinite(z)):
        raise GigDomainError("Bessel K needs a finite, strictly positive argument")
    if np.any(~np.isfinite(v)):
        raise GigDomainError("Bessel K needs a finite order")
    with np.errstate(all="ignore"):
        out = np.log(kve(v, z)) - z
    bad = ~np.isfinite(out)
    if np.any(bad):
        out[bad] = _log_bessel_k_recurrence(v[bad], z[bad])
        if not np.all(np.isfinite(out)):
            raise NumericalError("log Bessel K is not finite even after recurrence")
    return out


def bessel_k(order: np.ndarray | float, x: np.ndarray | float) -> np.ndarray:
    """K_order(x); may overflow to inf where ``log_bessel_k`` does not."""
    with np.errstate(over="ignore"):
        return np.exp(log_bessel_k(order, x))


def log_bessel_k_order_derivative(order: np.ndarray | float, x: np.ndarray | float) -> np.ndarray:
    """
    d/dv log K_v(x) at v = order.

    Central difference with step 1e-5 * max(1, |order|), Richardson-extrapolated once.
    """
    v = np.asarray(order, dtype=np.float64)
    h = 1e-5 * np.maximum(1.0, np.abs(v))

    def central(step: np.ndarray) -> np.ndarray:
        return (log_bessel_k(v + step, x) - log_bessel_k(v - step, x)) / (2.0 * step)

    return (4.0 * central(h / 2.0) - central(h)) / 3.0


def gig_order_derivative(order: np.ndarray | float, x: np.ndarray | float) -> np.ndarray:
    """dK_v(x)/dv at v = order (odd in the order, zero at order 0)."""
    with np.errstate(over="ignore"):
        return np.exp(log_bessel_k(order, x)) * log_bessel_k_order_derivative(order, x)


class GigParams(BaseModel):
    """Parameters of a GIG gain posterior."""

    model_config = ConfigDict(frozen=True)

    order: float = Field(description="Order (may be negative)")
    rate: float = Field(gt=0, description="Coefficient of g in the exponent")
    mass: float = Field(ge=0, description="Coefficient of 1/g in the exponent")

    @model_validator(mode="after")
    def _check_gamma_limit(self) -> "GigParams":
        if self.mass == 0 and self.order <= 0:
            raise ValueError("mass = 0 needs a positive order (gamma limit)")
        return self


class GigMoments(NamedTuple):
    """E(G), E(1/G) and E(ln G); arrays when computed elementwise."""

    mean: np.ndarray
    inverse_mean: np.ndarray
    log_mean: np.ndarray


def gig_moments_array(
    order: np.ndarray | float,
    rate: np.ndarray | float,
    mass: np.ndarray | float,
) -> GigMoments:
    """
    Elementwise GIG moments, broadcasting over all three parameters.

    The gamma limit is used where mass == 0, or where 2*sqrt(rate*mass) < 1e-12 and order > 1.

    Args:
        order: GIG order
        rate: Strictly positive rate
        mass: Nonnegative mass

    Returns:
        GigMoments with arrays of the broadcast shape
    """
    nu, rho, tau = np.broadcast_arrays(
        np.asarray(order, dtype=np.float64),
        np.asarray(rate, dtype=np.float64),
        np.asarray(mass, dtype=np.float64),
    )
    if np.any(~(rho > 0)) or np.any(~np.isfinite(rho)):
        raise GigDomainError("GIG rate must be finite and strictly positive")
    if np.any(~(tau >= 0)) or np.any(~np.isfinite(tau)):
        raise GigDomainError("GIG mass must be finite and nonnegative")

    x = 2.0 * np.sqrt(rho * tau)
    gamma_limit = (tau == 0) | ((x < GAMMA_LIMIT_ARGUMENT) & (nu > 1))
    if np.any(gamma_limit & (nu <= 1)):
        raise GigDomainError("gamma-limit E(1/G) needs order > 1")

    mean = np.empty(nu.shape)
    inverse_mean = np.empty(nu.shape)
    log_mean = np.empty(nu.shape)

    g = gamma_limit
    mean[g] = nu[g] / rho[g]
    inverse_mean[g] = rho[g] / (nu[g] - 1.0)
    log_mean[g] = digamma(nu[g]) - np.log(rho[g])

    b = ~gamma_limit
    if np.any(b):
        nb, xb = nu[b], x[b]
        half_log_ratio = 0.5 * (np.log(tau[b]) - np.log(rho[b]))
        log_k = log_bessel_k(nb, xb)
        mean[b] = np.exp(log_bessel_k(nb + 1.0, xb) - log_k + half_log_ratio)
        inverse_mean[b] = np.exp(log_bessel_k(nb - 1.0, xb) - log_k - half_log_ratio)
        log_mean[b] = log_bessel_k_order_derivative(nb, xb) + half_log_ratio

    return GigMoments(mean=mean, inverse_mean=inverse_mean, log_mean=log_mean)


def gig_moments(params: GigParams) -> GigMoments:
    """Moments of a single GIG as 0-d arrays."""
    m = gig_moments_array(params.order, params.rate, params.mass)
    return GigMoments(mean=m.mean[()], inverse_mean=m.inverse_mean[()], log_mean=m.log_mean[()])
