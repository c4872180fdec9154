"""Brute-force effective parameters by quadrature.

Independent check of the closed forms in effective_sabr: the effective-medium
constants Delta^2, b, c and G are integrated numerically for the time-dependent
volatility scaling phi(t) = alpha * psi(t), with expiry T = tau1.

Internally everything is computed for alpha = nu = 1 and rescaled, so
nu = 0 poses no division problem and the tolerances act on O(1) integrals.
"""

import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import Callable, Optional, Sequence

import numpy as np

from utils.quadrature import AdaptiveGaussLegendre, ToleranceNotReached

from .effective_sabr import EffectiveSabrParams
from .errors import DomainError, QuadratureError
from .model_core import AccrualPeriod, QLike, SabrParams, decay_speed, psi

logger = logging.getLogger(__name__)

ABS_TOL = 1e-12
REL_TOL = 1e-13


@dataclass(frozen=True)
class EffectiveMediumIntegrals:
    """Effective-medium constants for one expiry.

    v_of_T is the integrated variance of phi; delta_sq = v_of_T / T.
    """

    v_of_T: float
    b: float
    c: float
    delta_sq: float
    G: float
    expiry: float
    error_estimate: float = 0.0


@dataclass(frozen=True)
class _UnitIntegrals:
    """Constants for alpha = nu = 1; b scales with nu/alpha, c with (nu/alpha)^2."""

    variance: float
    b: float
    c: float
    drift_term: float
    error: float


def _unit_decay(period: AccrualPeriod, q: float) -> Callable:
    if period.tau0 >= period.tau1:
        return np.ones_like
    return lambda t: psi(t, period, q)


def _check_horizon(u: float, period: AccrualPeriod) -> None:
    if not period.tau1 > 0:
        raise DomainError(f"tau1 must be > 0, got {period.tau1!r}")
    if not 0 <= u <= period.tau1:
        raise DomainError(f"u must lie in [0, tau1={period.tau1!r}], got {u!r}")


def _breakpoints(period: AccrualPeriod) -> Sequence[float]:
    return (period.tau0,) if 0 < period.tau0 < period.tau1 else ()


def _integrator(abs_tol: float = ABS_TOL) -> AdaptiveGaussLegendre:
    return AdaptiveGaussLegendre(order=10, abs_tol=abs_tol, rel_tol=REL_TOL)


def _closed_unit(u, period: AccrualPeriod, q: float, power: float):
    """int_0^u psi(s)^(power - 1) ds for power in {q + 1, 2q + 1}, vectorized."""
    u = np.asarray(u, dtype=float)
    if period.tau0 >= period.tau1:
        return u
    start = max(period.tau0, 0.0)
    length = period.length
    scale = power * length ** (power - 1.0)
    tail = ((period.tau1 - start) ** power - np.maximum(period.tau1 - u, 0.0) ** power) / scale
    return np.where(u <= period.tau0, u, start + tail)


def v_closed_form(u: float, params: SabrParams, period: AccrualPeriod, q: QLike) -> float:
    """Piecewise closed form of v(u) = int_0^u phi(s)^2 ds."""
    q = decay_speed(q)
    _check_horizon(u, period)
    return params.alpha ** 2 * float(_closed_unit(u, period, q, 2.0 * q + 1.0))


def w_closed_form(u: float, params: SabrParams, period: AccrualPeriod, q: QLike) -> float:
    """Piecewise closed form of w(u) = rho nu int_0^u phi(s) ds."""
    q = decay_speed(q)
    _check_horizon(u, period)
    return params.rho * params.nu * params.alpha * float(_closed_unit(u, period, q, q + 1.0))


def v(u: float, params: SabrParams, period: AccrualPeriod, q: QLike) -> float:
    """v(u) = int_0^u phi(s)^2 ds by adaptive quadrature."""
    q = decay_speed(q)
    _check_horizon(u, period)
    decay = _unit_decay(period, q)
    value = _integrate(lambda s: decay(s) ** 2, 0.0, u, _breakpoints(period))
    return params.alpha ** 2 * value


def w(u: float, params: SabrParams, period: AccrualPeriod, q: QLike) -> float:
    """w(u) = rho nu int_0^u phi(s) ds by adaptive quadrature."""
    q = decay_speed(q)
    _check_horizon(u, period)
    decay = _unit_decay(period, q)
    value = _integrate(decay, 0.0, u, _breakpoints(period))
    return params.rho * params.nu * params.alpha * value


def _integrate(fun: Callable, lo: float, hi: float, breakpoints: Sequence[float], abs_tol: float = ABS_TOL) -> float:
    try:
        return _integrator(abs_tol).integrate(fun, lo, hi, breakpoints)
    except ToleranceNotReached as e:
        raise QuadratureError(f"quadrature on [{e.lo!r}, {e.hi!r}] did not converge", e.achieved) from e


def unit_integrals(
    decay: Callable,
    expiry: float,
    rho: float,
    breakpoints: Sequence[float] = (),
    variance: Optional[Callable] = None,
    drift: Optional[Callable] = None,
    abs_tol: float = ABS_TOL,
) -> _UnitIntegrals:
    """Effective-medium integrals for a generic decay function with alpha = nu = 1.

    Args:
        decay: Vectorized psi(t) on [0, expiry]
        expiry: Option expiry T
        rho: Correlation
        breakpoints: Points where decay is not smooth
        variance: Closed form of int_0^u psi^2; integrated numerically if None
        drift: Closed form of int_0^u psi; integrated numerically if None
        abs_tol: Absolute tolerance of every quadrature

    Returns:
        Unit-scaled constants
    """
    integrator = _integrator(abs_tol)

    def nested(integrand):
        def cumulative(u):
            u = np.atleast_1d(np.asarray(u, dtype=float))
            return np.array([integrator.integrate(integrand, 0.0, x, breakpoints) for x in u])

        return cumulative

    if variance is None:
        variance = nested(lambda s: decay(s) ** 2)
    if drift is None:
        drift = nested(decay)

    try:
        v_total, err_v = integrator.integrate_with_error(lambda s: decay(s) ** 2, 0.0, expiry, breakpoints)

        def remaining(s):
            return v_total - variance(s)

        i_b, err_b = integrator.integrate_with_error(lambda s: remaining(s) * decay(s), 0.0, expiry, breakpoints)
        i_sq, err_sq = integrator.integrate_with_error(lambda s: remaining(s) ** 2, 0.0, expiry, breakpoints)
        i_w, err_w = integrator.integrate_with_error(
            lambda s: (drift(s) * decay(s)) ** 2, 0.0, expiry, breakpoints
        )
        i_lin, err_lin = integrator.integrate_with_error(remaining, 0.0, expiry, breakpoints)
    except ToleranceNotReached as e:
        raise QuadratureError(f"quadrature on [{e.lo!r}, {e.hi!r}] did not converge", e.achieved) from e

    b = 2.0 * rho / v_total ** 2 * i_b
    c = 3.0 / v_total ** 3 * i_sq + 9.0 * rho * rho / v_total ** 3 * i_w - 3.0 * b * b
    logger.debug(f"unit integrals: v={v_total:.15g} b={b:.15g} c={c:.15g} evaluations={integrator.evaluations}")
    return _UnitIntegrals(
        variance=v_total,
        b=b,
        c=c,
        drift_term=2.0 / v_total ** 2 * i_lin,
        error=max(err_v, err_b, err_sq, err_w, err_lin),
    )


def _unit_for_period(period: AccrualPeriod, q: float, rho: float, full_double_quadrature: bool) -> _UnitIntegrals:
    if not period.tau1 > 0:
        raise DomainError(f"tau1 must be > 0, got {period.tau1!r}")
    variance = drift = None
    if not full_double_quadrature:
        variance = partial(_closed_unit, period=period, q=q, power=2.0 * q + 1.0)
        drift = partial(_closed_unit, period=period, q=q, power=q + 1.0)
    return unit_integrals(
        _unit_decay(period, q),
        period.tau1,
        rho,
        breakpoints=_breakpoints(period),
        variance=variance,
        drift=drift,
    )


def effective_medium_integrals(
    params: SabrParams, period: AccrualPeriod, q: QLike, full_double_quadrature: bool = False
) -> EffectiveMediumIntegrals:
    """Delta^2, b, c and G for phi = alpha * psi and T = tau1."""
    q = decay_speed(q)
    unit = _unit_for_period(period, q, params.rho, full_double_quadrature)
    ratio = params.nu / params.alpha
    c = ratio ** 2 * unit.c
    v_total = params.alpha ** 2 * unit.variance
    return EffectiveMediumIntegrals(
        v_of_T=v_total,
        b=ratio * unit.b,
        c=c,
        delta_sq=v_total / period.tau1,
        G=ratio ** 2 * unit.drift_term - c,
        expiry=period.tau1,
        error_estimate=unit.error,
    )


def effective_params_quadrature(
    params: SabrParams, period: AccrualPeriod, q: QLike, full_double_quadrature: bool = False
) -> EffectiveSabrParams:
    """Effective parameters from numerically integrated effective-medium constants.

    Works for tau0 of either sign; tau0 >= tau1 is treated as constant phi.

    Args:
        params: Original SABR parameters
        period: Accrual period
        q: Decay exponent
        full_double_quadrature: Integrate v and w numerically inside the outer integrals

    Returns:
        Effective parameters quoted against tau1
    """
    q = decay_speed(q)
    problems = params.violations()
    if problems:
        raise DomainError("invalid SABR parameters: " + "; ".join(problems))
    unit = _unit_for_period(period, q, params.rho, full_double_quadrature)
    if not (unit.variance > 0 and unit.c > 0):
        raise QuadratureError("non-positive integrated variance or c", unit.error)

    expiry = period.tau1
    delta_sq = params.alpha ** 2 * unit.variance / expiry
    # Delta^2 * G with alpha cancelled
    delta_sq_g = unit.variance / expiry * params.nu ** 2 * (unit.drift_term - unit.c)
    alpha_hat = math.sqrt(delta_sq) * math.exp(0.25 * delta_sq_g * expiry)
    rho_hat = unit.b / math.sqrt(unit.c)
    nu_hat = params.nu * math.sqrt(unit.variance / expiry * unit.c)
    return EffectiveSabrParams(alpha_hat=alpha_hat, rho_hat=rho_hat, nu_hat=nu_hat, time_to_exercise=expiry)
