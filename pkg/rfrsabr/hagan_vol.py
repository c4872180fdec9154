"""Black implied volatility approximation for the SABR model."""

import math

from .black76 import black_price
from .errors import DomainError
from .model_core import SabrParams

RHO_LIMIT = 1.0 - 1e-10
Z_SERIES_THRESHOLD = 1e-6


def _z_over_chi(z: float, rho: float) -> float:
    """z / chi(z), with chi(z) = log((sqrt(1 - 2 rho z + z^2) + z - rho) / (1 - rho))."""
    if abs(z) < Z_SERIES_THRESHOLD:
        return 1.0 - 0.5 * rho * z + (2.0 - 3.0 * rho * rho) * z * z / 12.0
    root = math.sqrt(1.0 - 2.0 * rho * z + z * z)
    # log1p form keeps chi accurate for small z
    chi = math.log1p((z + (z * z - 2.0 * rho * z) / (root + 1.0)) / (1.0 - rho))
    return z / chi


def hagan_implied_vol(expiry: float, strike: float, forward: float, params: SabrParams) -> float:
    """Hagan's Black implied volatility for SABR parameters.

    Strike and forward are quoted unshifted; params.shift is added to both.

    Args:
        expiry: Time to exercise in years
        strike: Strike rate
        forward: Forward rate R(0)
        params: SABR parameters

    Returns:
        Approximate Black implied volatility
    """
    if not expiry > 0:
        raise DomainError(f"expiry must be > 0, got {expiry!r}")
    problems = params.violations()
    if problems:
        raise DomainError("invalid SABR parameters: " + "; ".join(problems))
    if abs(params.rho) > RHO_LIMIT:
        raise DomainError(f"|rho| must be <= {RHO_LIMIT!r}, got {params.rho!r}")
    f = forward + params.shift
    k = strike + params.shift
    if not (f > 0 and k > 0):
        raise DomainError(f"shifted forward {f!r} and strike {k!r} must be > 0")

    alpha, beta, rho, nu = params.alpha, params.beta, params.rho, params.nu
    one_minus_beta = 1.0 - beta
    x = math.log(f / k)
    fk_half = (f * k) ** (0.5 * one_minus_beta)

    log_moneyness_sq = (one_minus_beta * x) ** 2
    denominator = fk_half * (1.0 + log_moneyness_sq / 24.0 + log_moneyness_sq ** 2 / 1920.0)

    z = (nu / alpha) * fk_half * x
    correction = (
        one_minus_beta ** 2 * alpha ** 2 / (24.0 * fk_half ** 2)
        + 0.25 * rho * beta * nu * alpha / fk_half
        + (2.0 - 3.0 * rho ** 2) * nu ** 2 / 24.0
    )
    return alpha / denominator * _z_over_chi(z, rho) * (1.0 + correction * expiry)


def sabr_caplet_price(expiry: float, strike: float, forward: float, params: SabrParams, discount: float) -> float:
    """Discounted Black value at the Hagan implied volatility."""
    if not 0 < discount <= 1:
        raise DomainError(f"discount must lie in (0,1], got {discount!r}")
    vol = hagan_implied_vol(expiry, strike, forward, params)
    return discount * black_price(expiry, strike + params.shift, forward + params.shift, vol)
