"""Effective SABR parameters for backward-looking caplets.

The volatility decay inside the accrual period is folded into constant
parameters (alpha_hat, rho_hat, nu_hat) quoted against time-to-exercise tau1,
so that the standard Hagan approximation prices the backward-looking caplet.
Two closed forms apply depending on whether the accrual period has started
(tau0 <= 0, seasoned) or not (tau0 >= 0, forward). Both agree at tau0 = 0.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

from scipy.optimize import brentq

from .errors import DomainError
from .model_core import AccrualPeriod, QLike, SabrParams, decay_speed

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EffectiveSabrParams:
    """Effective (alpha_hat, rho_hat, nu_hat) and the time-to-exercise they quote against.

    degenerate marks the all-zero triple of the q -> infinity limit once the
    accrual period has started; no volatility is left to price with.
    """

    alpha_hat: float
    rho_hat: float
    nu_hat: float
    time_to_exercise: float
    degenerate: bool = False

    def as_sabr(self, beta: float, shift: float = 0.0) -> SabrParams:
        return SabrParams(alpha=self.alpha_hat, beta=beta, rho=self.rho_hat, nu=self.nu_hat, shift=shift)

    def triple(self) -> Tuple[float, float, float]:
        return self.alpha_hat, self.rho_hat, self.nu_hat


@dataclass(frozen=True)
class ForwardIntermediates:
    """Intermediate quantities of the forward (tau0 >= 0) closed form.

    zeta is the seasoned-case analogue, reported for comparison.
    """

    tau: float
    H: float
    gamma: float
    zeta: float


def _check_sabr(params: SabrParams) -> None:
    problems = params.violations()
    if problems:
        raise DomainError("invalid SABR parameters: " + "; ".join(problems))


def _zeta(rho: float, q: float) -> float:
    return 3.0 / (4.0 * q + 3.0) * (1.0 / (2.0 * q + 1.0) + rho * rho * 2.0 * q / (3.0 * q + 2.0) ** 2)


def _gamma(rho: float, period: AccrualPeriod, q: float) -> float:
    t0, t1 = period.tau0, period.tau1
    tau = 2.0 * q * t0 + t1
    first = tau * (2.0 * tau ** 3 + t1 ** 3 + (4.0 * q * q - 2.0 * q) * t0 ** 3 + 6.0 * q * t0 ** 2 * t1) / (
        (4.0 * q + 3.0) * (2.0 * q + 1.0)
    )
    second = 3.0 * q * rho * rho * (t1 - t0) ** 2 * (3.0 * tau ** 2 - t1 ** 2 + 5.0 * q * t0 ** 2 + 4.0 * t0 * t1) / (
        (4.0 * q + 3.0) * (3.0 * q + 2.0) ** 2
    )
    return first + second


def _seasoned_rho_hat(rho: float, q: float) -> float:
    return 2.0 * rho / (math.sqrt(_zeta(rho, q)) * (3.0 * q + 2.0))


def _forward_rho_hat(rho: float, period: AccrualPeriod, q: float) -> float:
    t0, t1 = period.tau0, period.tau1
    tau = 2.0 * q * t0 + t1
    numerator = 3.0 * tau ** 2 + 2.0 * q * t0 ** 2 + t1 ** 2
    return rho * numerator / (math.sqrt(_gamma(rho, period, q)) * (6.0 * q + 4.0))


def _forward_h_coefficient(period: AccrualPeriod, q: float) -> float:
    """nu^2 multiplier of H, i.e. (tau^2 + 2q tau0^2 + tau1^2) / (2 tau1 tau (q+1))."""
    t0, t1 = period.tau0, period.tau1
    tau = 2.0 * q * t0 + t1
    return (tau ** 2 + 2.0 * q * t0 ** 2 + t1 ** 2) / (2.0 * t1 * tau * (q + 1.0))


def effective_params_seasoned(
    params: SabrParams, period: AccrualPeriod, q: QLike, include_second_order: bool = True
) -> EffectiveSabrParams:
    """Effective parameters once the accrual period has started (tau0 <= 0 < tau1).

    Args:
        params: Original SABR parameters
        period: Accrual period with tau0 <= 0
        q: Decay exponent
        include_second_order: Keep the exponential correction in alpha_hat

    Returns:
        Effective parameters quoted against tau1
    """
    q = decay_speed(q)
    _check_sabr(params)
    if period.tau0 > 0:
        raise DomainError(f"seasoned closed form needs tau0 <= 0, got {period.tau0!r}")
    if not period.tau1 > 0:
        raise DomainError(f"tau1 must be > 0, got {period.tau1!r}")

    zeta = _zeta(params.rho, q)
    rho_hat = _seasoned_rho_hat(params.rho, q)
    nu_hat_sq = params.nu ** 2 * zeta * (2.0 * q + 1.0)
    alpha_hat_sq = params.alpha ** 2 / (2.0 * q + 1.0) * (period.tau1 / period.length) ** (2.0 * q)
    if include_second_order:
        alpha_hat_sq *= math.exp(0.5 * (params.nu ** 2 / (q + 1.0) - nu_hat_sq) * period.tau1)
    return EffectiveSabrParams(
        alpha_hat=math.sqrt(alpha_hat_sq),
        rho_hat=rho_hat,
        nu_hat=math.sqrt(nu_hat_sq),
        time_to_exercise=period.tau1,
    )


def forward_intermediates(params: SabrParams, period: AccrualPeriod, q: QLike) -> ForwardIntermediates:
    """Intermediates tau, H, gamma of the forward closed form, plus zeta."""
    q = decay_speed(q)
    gamma = _gamma(params.rho, period, q)
    tau = 2.0 * q * period.tau0 + period.tau1
    nu_hat_sq = params.nu ** 2 * gamma * (2.0 * q + 1.0) / (tau ** 3 * period.tau1)
    h = params.nu ** 2 * _forward_h_coefficient(period, q) - nu_hat_sq
    return ForwardIntermediates(tau=tau, H=h, gamma=gamma, zeta=_zeta(params.rho, q))


def effective_params_forward(
    params: SabrParams, period: AccrualPeriod, q: QLike, include_second_order: bool = True
) -> EffectiveSabrParams:
    """Effective parameters before the accrual period starts (0 <= tau0 < tau1).

    A zero-length period (tau0 == tau1 > 0) is standard SABR and returns the
    original parameters unchanged.

    Args:
        params: Original SABR parameters
        period: Accrual period with tau0 >= 0
        q: Decay exponent
        include_second_order: Keep the exponential correction in alpha_hat

    Returns:
        Effective parameters quoted against tau1
    """
    q = decay_speed(q)
    _check_sabr(params)
    if period.tau0 < 0:
        raise DomainError(f"forward closed form needs tau0 >= 0, got {period.tau0!r}")
    if not period.tau1 > 0 or period.tau0 > period.tau1:
        raise DomainError(f"invalid accrual period {period}")
    if period.tau0 == period.tau1:
        return EffectiveSabrParams(params.alpha, params.rho, params.nu, period.tau1)

    mid = forward_intermediates(params, period, q)
    t0, t1 = period.tau0, period.tau1
    rho_hat = _forward_rho_hat(params.rho, period, q)
    nu_hat_sq = params.nu ** 2 * mid.gamma * (2.0 * q + 1.0) / (mid.tau ** 3 * t1)
    alpha_hat_sq = params.alpha ** 2 / (2.0 * q + 1.0) * mid.tau / t1
    if include_second_order:
        alpha_hat_sq *= math.exp(0.5 * mid.H * t1)
    return EffectiveSabrParams(
        alpha_hat=math.sqrt(alpha_hat_sq),
        rho_hat=rho_hat,
        nu_hat=math.sqrt(nu_hat_sq),
        time_to_exercise=t1,
    )


def effective_params(
    params: SabrParams, period: AccrualPeriod, q: QLike, include_second_order: bool = True
) -> EffectiveSabrParams:
    """Dispatch on the sign of tau0; tau0 == 0 uses the forward closed form."""
    if not period.tau1 > 0:
        raise DomainError(f"tau1 must be > 0, got {period.tau1!r}")
    if period.tau0 < 0:
        return effective_params_seasoned(params, period, q, include_second_order)
    return effective_params_forward(params, period, q, include_second_order)


def rescale_time_to_exercise(effective: EffectiveSabrParams, new_expiry: float) -> EffectiveSabrParams:
    """Requote effective parameters against another time-to-exercise.

    alpha_hat and nu_hat scale with sqrt(old / new); Hagan prices are unchanged.
    """
    if not new_expiry > 0:
        raise DomainError(f"time to exercise must be > 0, got {new_expiry!r}")
    factor = math.sqrt(effective.time_to_exercise / new_expiry)
    return EffectiveSabrParams(
        alpha_hat=effective.alpha_hat * factor,
        rho_hat=effective.rho_hat,
        nu_hat=effective.nu_hat * factor,
        time_to_exercise=new_expiry,
        degenerate=effective.degenerate,
    )


def limit_q_to_infinity(params: SabrParams, period: AccrualPeriod) -> EffectiveSabrParams:
    """Effective parameters when volatility vanishes as soon as the period starts."""
    _check_sabr(params)
    if not period.tau1 > 0:
        raise DomainError(f"tau1 must be > 0, got {period.tau1!r}")
    if period.tau0 <= 0:
        logger.info("q -> infinity with tau0 <= 0 leaves no volatility; returning the zero triple")
        return EffectiveSabrParams(0.0, 0.0, 0.0, period.tau1, degenerate=True)
    ratio = math.sqrt(period.tau0 / period.tau1)
    return EffectiveSabrParams(params.alpha * ratio, params.rho, params.nu * ratio, period.tau1)


def limit_q_to_zero(params: SabrParams, period: AccrualPeriod) -> EffectiveSabrParams:
    """Effective parameters when the decay is infinitely slow: the originals."""
    _check_sabr(params)
    if not period.tau1 > 0:
        raise DomainError(f"tau1 must be > 0, got {period.tau1!r}")
    return EffectiveSabrParams(params.alpha, params.rho, params.nu, period.tau1)


def scaling_reparameterization(params: SabrParams, period: AccrualPeriod, q: QLike) -> SabrParams:
    """Parameters that price the same seasoned caplet on the canonical period [0, 1]."""
    q = decay_speed(q)
    if period.tau0 > 0:
        raise DomainError(f"scaling property needs tau0 <= 0, got {period.tau0!r}")
    if not period.tau1 > 0:
        raise DomainError(f"tau1 must be > 0, got {period.tau1!r}")
    root = math.sqrt(period.tau1)
    return params.with_values(
        alpha=params.alpha * root * (period.tau1 / period.length) ** q,
        nu=params.nu * root,
    )


def piterbarg_alpha(alpha: float, period: AccrualPeriod) -> float:
    """Piterbarg's adjusted initial volatility, quoted against tau0 > 0."""
    if not period.tau0 > 0:
        raise DomainError(f"adjustment needs tau0 > 0, got {period.tau0!r}")
    if period.tau1 < period.tau0:
        raise DomainError(f"invalid accrual period {period}")
    return alpha * math.sqrt(1.0 + period.length / (3.0 * period.tau0))


def effective_rho_bound(period: AccrualPeriod, q: QLike) -> float:
    """Largest |rho_hat| attainable for the period and q (reached at |rho| = 1)."""
    q = decay_speed(q)
    if period.tau0 < 0:
        return abs(_seasoned_rho_hat(1.0, q))
    return abs(_forward_rho_hat(1.0, period, q))


def original_params(
    effective: EffectiveSabrParams,
    beta: float,
    period: AccrualPeriod,
    q: QLike,
    shift: float = 0.0,
    include_second_order: bool = True,
) -> SabrParams:
    """Recover the original (alpha, rho, nu) from effective parameters.

    rho_hat is strictly increasing in rho, so rho is found by a bracketed root
    search; nu and alpha then follow in closed form.

    Args:
        effective: Effective parameters, any time-to-exercise
        beta: CEV exponent shared by both parameter sets
        period: Accrual period they refer to
        q: Decay exponent
        shift: Displacement
        include_second_order: Whether effective carries the exponential correction

    Returns:
        Original SABR parameters
    """
    q = decay_speed(q)
    if effective.degenerate:
        raise DomainError("degenerate effective parameters cannot be inverted")
    if not period.tau1 > 0:
        raise DomainError(f"tau1 must be > 0, got {period.tau1!r}")
    at_tau1 = rescale_time_to_exercise(effective, period.tau1)
    seasoned = period.tau0 < 0

    def rho_hat_of(rho):
        if seasoned:
            return _seasoned_rho_hat(rho, q)
        return _forward_rho_hat(rho, period, q)

    bound = effective_rho_bound(period, q)
    if abs(at_tau1.rho_hat) > bound:
        raise DomainError(f"|rho_hat|={abs(at_tau1.rho_hat):.6g} exceeds attainable bound {bound:.6g}")
    if at_tau1.rho_hat == 0.0:
        rho = 0.0
    else:
        rho = brentq(lambda r: rho_hat_of(r) - at_tau1.rho_hat, -1.0, 1.0, xtol=1e-15, rtol=1e-15)

    nu_hat_sq = at_tau1.nu_hat ** 2
    t1 = period.tau1
    if seasoned:
        nu_sq = nu_hat_sq / (_zeta(rho, q) * (2.0 * q + 1.0))
        alpha_sq = at_tau1.alpha_hat ** 2 * (2.0 * q + 1.0) * (period.length / t1) ** (2.0 * q)
        if include_second_order:
            alpha_sq *= math.exp(-0.5 * (nu_sq / (q + 1.0) - nu_hat_sq) * t1)
    else:
        tau = 2.0 * q * period.tau0 + t1
        nu_sq = nu_hat_sq * tau ** 3 * t1 / (_gamma(rho, period, q) * (2.0 * q + 1.0))
        alpha_sq = at_tau1.alpha_hat ** 2 * (2.0 * q + 1.0) * t1 / tau
        if include_second_order:
            h = nu_sq * _forward_h_coefficient(period, q) - nu_hat_sq
            alpha_sq *= math.exp(-0.5 * h * t1)
    return SabrParams(alpha=math.sqrt(alpha_sq), beta=beta, rho=rho, nu=math.sqrt(nu_sq), shift=shift)
