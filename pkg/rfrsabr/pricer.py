"""Present values and implied volatilities of forward- and backward-looking caplets."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .black76 import black_price
from .effective_sabr import EffectiveSabrParams, effective_params, rescale_time_to_exercise
from .errors import DomainError
from .hagan_vol import hagan_implied_vol
from .model_core import CapletSpec, CapletStyle, QLike, SabrParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CapletResult:
    """Present value of one caplet and the volatility it was priced at.

    implied_vol is None when the payoff is already known (intrinsic value).
    """

    present_value: float
    implied_vol: Optional[float]
    time_to_exercise_quoted: float
    style: CapletStyle
    effective_params_used: Optional[EffectiveSabrParams] = None


def _check(spec: CapletSpec, params: SabrParams, style: CapletStyle, allow_zero_length: bool = False) -> None:
    if CapletStyle(spec.style) is not style:
        raise DomainError(f"expected a {style.value} caplet, got {CapletStyle(spec.style).value}")
    problems = params.violations() + spec.violations(params.shift, allow_zero_length)
    if problems:
        raise DomainError("invalid model inputs: " + "; ".join(problems))


def _intrinsic(spec: CapletSpec) -> float:
    return spec.discount * max(spec.forward_rate - spec.strike, 0.0)


def price_forward_caplet(spec: CapletSpec, params: SabrParams) -> CapletResult:
    """Forward-looking caplet, exercised at the fixing date tau0.

    Once tau0 <= 0 the rate has fixed; spec.forward_rate then holds R(tau0) and
    the caplet is worth its discounted intrinsic value.

    Args:
        spec: Caplet with style forward
        params: SABR parameters

    Returns:
        Present value and the Hagan implied volatility at tau0
    """
    _check(spec, params, CapletStyle.FORWARD)
    period = spec.period
    if period.tau0 <= 0:
        return CapletResult(_intrinsic(spec), None, 0.0, CapletStyle.FORWARD)

    vol = hagan_implied_vol(period.tau0, spec.strike, spec.forward_rate, params)
    pv = spec.discount * black_price(period.tau0, spec.strike + params.shift, spec.forward_rate + params.shift, vol)
    return CapletResult(pv, vol, period.tau0, CapletStyle.FORWARD)


def price_backward_caplet(
    spec: CapletSpec,
    params: SabrParams,
    q: QLike,
    effective: Optional[EffectiveSabrParams] = None,
    include_second_order: bool = True,
) -> CapletResult:
    """Backward-looking caplet, exercised at the end of the accrual period tau1.

    Priced with Hagan's formula at the effective parameters; tau0 may have
    either sign. A zero-length period (tau0 == tau1) is standard SABR.

    Args:
        spec: Caplet with style backward
        params: Original SABR parameters (beta and shift are always taken from here)
        q: Decay exponent
        effective: Effective triple to use instead of the closed form
        include_second_order: Keep the exponential correction in alpha_hat

    Returns:
        Present value, Hagan implied volatility at tau1 and the triple used
    """
    _check(spec, params, CapletStyle.BACKWARD, allow_zero_length=True)
    period = spec.period
    if effective is None:
        effective = effective_params(params, period, q, include_second_order)
    elif effective.time_to_exercise != period.tau1 and not effective.degenerate:
        effective = rescale_time_to_exercise(effective, period.tau1)

    if effective.degenerate or effective.alpha_hat == 0:
        logger.info("no volatility left in the accrual period; pricing at intrinsic value")
        return CapletResult(_intrinsic(spec), None, period.tau1, CapletStyle.BACKWARD, effective)

    sabr = effective.as_sabr(params.beta, params.shift)
    vol = hagan_implied_vol(period.tau1, spec.strike, spec.forward_rate, sabr)
    pv = spec.discount * black_price(period.tau1, spec.strike + params.shift, spec.forward_rate + params.shift, vol)
    return CapletResult(pv, vol, period.tau1, CapletStyle.BACKWARD, effective)


def price_caplet(spec: CapletSpec, params: SabrParams, q: Optional[QLike] = None) -> CapletResult:
    """Price spec according to its style; q is required for backward caplets."""
    if CapletStyle(spec.style) is CapletStyle.FORWARD:
        return price_forward_caplet(spec, params)
    if q is None:
        raise DomainError("a decay exponent q is required for backward-looking caplets")
    return price_backward_caplet(spec, params, q)


def jensen_gap(
    spec: CapletSpec, params: SabrParams, q: QLike, effective: Optional[EffectiveSabrParams] = None
) -> float:
    """Backward minus forward present value for the same strike and period.

    The exact prices satisfy gap >= 0 before the accrual period starts; the
    Hagan approximation does not guarantee it, so a negative gap is logged.

    Args:
        spec: Caplet, any style; both styles are priced
        params: SABR parameters
        q: Decay exponent
        effective: Optional override of the effective triple

    Returns:
        Present value difference
    """
    if spec.period.tau0 < 0:
        raise DomainError(f"the ordering only holds before the accrual period, got tau0={spec.period.tau0!r}")
    backward = price_backward_caplet(spec.with_style(CapletStyle.BACKWARD), params, q, effective)
    forward = price_forward_caplet(spec.with_style(CapletStyle.FORWARD), params)
    gap = backward.present_value - forward.present_value
    if gap < 0:
        logger.warning(f"negative Jensen gap {gap:.3e} at strike {spec.strike}")
    return gap


def strike_profile_violations(strikes: Sequence[float], prices: Sequence[float], tol: float = 1e-12) -> List[str]:
    """Report where call prices fail to be nonincreasing and convex in strike.

    Args:
        strikes: Strictly increasing strikes
        prices: Call present values at those strikes
        tol: Slack allowed before a violation is reported

    Returns:
        One message per violation, empty for a clean profile
    """
    k = np.asarray(strikes, dtype=float)
    p = np.asarray(prices, dtype=float)
    if k.shape != p.shape or k.ndim != 1:
        raise DomainError("strikes and prices must be 1-d sequences of equal length")
    if np.any(np.diff(k) <= 0):
        raise DomainError("strikes must be strictly increasing")

    problems = []
    slopes = np.diff(p) / np.diff(k)
    for i in np.flatnonzero(np.diff(p) > tol):
        problems.append(f"price increases between strikes {k[i]:.6g} and {k[i + 1]:.6g}")
    for i in np.flatnonzero(np.diff(slopes) * (k[2:] - k[:-2]) < -tol):
        problems.append(f"convexity violated around strike {k[i + 1]:.6g}")
    if problems:
        logger.warning(f"{len(problems)} strike profile violation(s)")
    return problems
