"""Black-76 caplet formula and implied volatility inversion.

All prices are undiscounted; discounting happens in the pricer.
"""

import math
from dataclasses import dataclass

from scipy.optimize import brentq
from scipy.special import ndtr

from .errors import DomainError, PriceBoundsError

VOL_LOWER = 1e-8
VOL_UPPER = 10.0
VOL_CEILING = 1e3


@dataclass(frozen=True)
class BlackQuote:
    """Inputs of the Black formula, all post-shift."""

    expiry: float
    strike: float
    forward: float
    vol: float

    def price(self) -> float:
        return black_price(self.expiry, self.strike, self.forward, self.vol)


def _check_inputs(expiry: float, strike: float, forward: float) -> None:
    if not expiry > 0:
        raise DomainError(f"expiry must be > 0, got {expiry!r}")
    if not strike > 0:
        raise DomainError(f"strike must be > 0, got {strike!r}")
    if not forward > 0:
        raise DomainError(f"forward must be > 0, got {forward!r}")


def _d_plus_minus(expiry: float, strike: float, forward: float, vol: float):
    total_vol = vol * math.sqrt(expiry)
    x = math.log(forward / strike)
    return x / total_vol + 0.5 * total_vol, x / total_vol - 0.5 * total_vol


def black_price(expiry: float, strike: float, forward: float, vol: float) -> float:
    """Undiscounted Black-76 call value R*N(d+) - K*N(d-)."""
    _check_inputs(expiry, strike, forward)
    if not vol > 0:
        raise DomainError(f"vol must be > 0, got {vol!r}")
    d_plus, d_minus = _d_plus_minus(expiry, strike, forward, vol)
    return forward * ndtr(d_plus) - strike * ndtr(d_minus)


def black_floorlet_price(expiry: float, strike: float, forward: float, vol: float) -> float:
    """Undiscounted Black-76 put value K*N(-d-) - R*N(-d+)."""
    _check_inputs(expiry, strike, forward)
    if not vol > 0:
        raise DomainError(f"vol must be > 0, got {vol!r}")
    d_plus, d_minus = _d_plus_minus(expiry, strike, forward, vol)
    return strike * ndtr(-d_minus) - forward * ndtr(-d_plus)


def black_vega(expiry: float, strike: float, forward: float, vol: float) -> float:
    """Derivative of the Black value with respect to vol."""
    _check_inputs(expiry, strike, forward)
    d_plus, _ = _d_plus_minus(expiry, strike, forward, vol)
    return forward * math.sqrt(expiry) * math.exp(-0.5 * d_plus * d_plus) / math.sqrt(2.0 * math.pi)


def implied_vol(expiry: float, strike: float, forward: float, price: float) -> float:
    """Invert the Black formula for the call value.

    The root is searched on the out-of-the-money side: for strike < forward the
    call value is converted to the floorlet value through parity.

    Args:
        expiry: Time to exercise in years
        strike: Post-shift strike
        forward: Post-shift forward
        price: Undiscounted call value

    Returns:
        Black implied volatility

    Raises:
        PriceBoundsError: if price is not strictly inside (max(R-K, 0), R)
    """
    _check_inputs(expiry, strike, forward)
    lower = max(forward - strike, 0.0)
    if not lower < price < forward:
        raise PriceBoundsError(price, lower, forward)

    if strike < forward:
        target = price - (forward - strike)
        otm_price = black_floorlet_price
    else:
        target = price
        otm_price = black_price
    if not target > 0:
        raise PriceBoundsError(price, lower, forward, "time value underflows at this price")

    def objective(vol):
        return otm_price(expiry, strike, forward, vol) - target

    hi = VOL_UPPER
    while objective(hi) < 0:
        hi *= 2.0
        if hi > VOL_CEILING:
            raise PriceBoundsError(price, lower, forward, "price above the value at the volatility ceiling")
    if objective(VOL_LOWER) > 0:
        raise PriceBoundsError(price, lower, forward, "price below the value at the volatility floor")
    return brentq(objective, VOL_LOWER, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
