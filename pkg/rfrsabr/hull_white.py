"""Volatility decay of the term rate implied by a Hull-White short rate.

Under dr = (theta(t) - kappa r) dt + xi dB the compounded rate of an accrual
period follows dR = (1/(tau1 - tau0) + R) psi_tilde(t) sigma_tilde(t) dB, with
psi_tilde playing the part of the power decay psi and kappa that of q - 1.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError
from .model_core import AccrualPeriod, psi

logger = logging.getLogger(__name__)

KAPPA_SERIES_THRESHOLD = 1e-8
CURVATURE_TOL = 1e-12


@dataclass(frozen=True)
class HullWhiteDecaySpec:
    """Mean-reversion speed kappa (any sign), accrual period and constant short-rate vol xi."""

    kappa: float
    period: AccrualPeriod
    xi: float = 0.0

    def violations(self) -> List[str]:
        problems = list(self.period.violations())
        if not self.xi >= 0:
            problems.append("xi must be >= 0")
        if not np.isfinite(self.kappa):
            problems.append("kappa must be finite")
        return problems


def _check(spec: HullWhiteDecaySpec, t) -> np.ndarray:
    problems = spec.violations()
    if problems:
        raise DomainError("invalid Hull-White spec: " + "; ".join(problems))
    times = np.asarray(t, dtype=float)
    if np.any(times > spec.period.tau1):
        raise DomainError(f"defined for t <= tau1={spec.period.tau1}")
    return times


def _scalar_or_array(values: np.ndarray):
    return float(values) if values.ndim == 0 else values


def bond_vol_factor(t, maturity: float, kappa: float):
    """D(t, T) = (1 - exp(-kappa (T - t))) / kappa, the bond's short-rate sensitivity."""
    horizon = maturity - np.asarray(t, dtype=float)
    if abs(kappa) < KAPPA_SERIES_THRESHOLD:
        return _scalar_or_array(horizon * (1.0 - 0.5 * kappa * horizon))
    return _scalar_or_array(-np.expm1(-kappa * horizon) / kappa)


def psi_tilde(t, spec: HullWhiteDecaySpec):
    """min(1, (exp(-kappa t) - exp(-kappa tau1)) / (exp(-kappa tau0) - exp(-kappa tau1))).

    Uses the linear limit (tau1 - t)/(tau1 - tau0) for |kappa| < 1e-8.
    """
    times = _check(spec, t)
    period = spec.period
    remaining = period.tau1 - times
    if abs(spec.kappa) < KAPPA_SERIES_THRESHOLD:
        ratio = remaining / period.length
    else:
        ratio = np.expm1(spec.kappa * remaining) / np.expm1(spec.kappa * period.length)
    return _scalar_or_array(np.minimum(1.0, ratio))


def sigma_tilde(t, spec: HullWhiteDecaySpec):
    """(exp(-kappa (tau0 - t)) - exp(-kappa (tau1 - t))) / kappa * xi; (tau1 - tau0) xi as kappa -> 0."""
    times = _check(spec, t)
    period = spec.period
    if abs(spec.kappa) < KAPPA_SERIES_THRESHOLD:
        values = np.full_like(times, period.length * spec.xi)
    else:
        values = np.exp(-spec.kappa * (period.tau0 - times)) * -np.expm1(-spec.kappa * period.length) / spec.kappa * spec.xi
    return _scalar_or_array(values)


def term_rate_volatility(t, spec: HullWhiteDecaySpec):
    """Normal volatility of 1/(tau1 - tau0) + R(t): psi_tilde(t) * sigma_tilde(t)."""
    return _scalar_or_array(np.asarray(psi_tilde(t, spec)) * np.asarray(sigma_tilde(t, spec)))


def curvature_class(times, values, tol: float = CURVATURE_TOL) -> str:
    """Classify a sampled curve as linear, convex, concave or mixed from divided second differences."""
    x = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.size < 3:
        raise DomainError("curvature needs at least three points")
    slopes = np.diff(y) / np.diff(x)
    second = np.diff(slopes)
    if np.all(np.abs(second) <= tol):
        return "linear"
    if np.all(second >= -tol):
        return "convex"
    if np.all(second <= tol):
        return "concave"
    return "mixed"


@dataclass
class DecayShapeReport:
    """psi against psi_tilde on a grid inside the accrual period."""

    kappa: float
    q: float
    times: np.ndarray
    psi: np.ndarray
    psi_tilde: np.ndarray
    gap: np.ndarray

    @property
    def max_abs_gap(self) -> float:
        return float(np.max(np.abs(self.gap)))

    @property
    def psi_curvature(self) -> str:
        return curvature_class(self.times, self.psi)

    @property
    def psi_tilde_curvature(self) -> str:
        return curvature_class(self.times, self.psi_tilde)

    @property
    def shapes_agree(self) -> bool:
        return self.psi_curvature == self.psi_tilde_curvature


def decay_grid(period: AccrualPeriod, n_points: int = 101) -> np.ndarray:
    if n_points < 3:
        raise DomainError(f"n_points must be >= 3, got {n_points}")
    return np.linspace(period.tau0, period.tau1, n_points)


def decay_shape_report(
    kappa: float, q: float, period: AccrualPeriod, grid: Optional[np.ndarray] = None
) -> DecayShapeReport:
    """Tabulate psi(t; q) and psi_tilde(t; kappa) on a grid in [tau0, tau1].

    Args:
        kappa: Mean-reversion speed
        q: Decay exponent
        period: Accrual period
        grid: Times in [tau0, tau1]; 101 equally spaced points if None

    Returns:
        Pointwise table with the gap psi - psi_tilde
    """
    times = decay_grid(period) if grid is None else np.asarray(grid, dtype=float)
    if np.any(times < period.tau0) or np.any(times > period.tau1):
        raise DomainError("grid must lie inside [tau0, tau1]")
    spec = HullWhiteDecaySpec(kappa=kappa, period=period)
    ours = np.asarray(psi(times, period, q))
    theirs = np.asarray(psi_tilde(times, spec))
    report = DecayShapeReport(kappa=kappa, q=q, times=times, psi=ours, psi_tilde=theirs, gap=ours - theirs)
    logger.info(
        f"kappa={kappa} q={q}: max gap {report.max_abs_gap:.3e}, "
        f"{report.psi_curvature} vs {report.psi_tilde_curvature}"
    )
    return report


def fit_decay_exponent(kappa: float, period: AccrualPeriod, n_points: int = 201) -> float:
    """Least-squares q matching psi to psi_tilde on [tau0, tau1].

    A diagnostic only: the correspondence between q and kappa is qualitative
    and this fit is one arbitrary way of making it numeric.
    """
    times = decay_grid(period, n_points)
    target = np.asarray(psi_tilde(times, HullWhiteDecaySpec(kappa=kappa, period=period)))

    def loss(log_q):
        return float(np.sum((np.asarray(psi(times, period, np.exp(log_q))) - target) ** 2))

    result = minimize_scalar(loss, bounds=(np.log(1e-3), np.log(1e3)), method="bounded", options={"xatol": 1e-10})
    q = float(np.exp(result.x))
    logger.debug(f"fitted q={q:.6g} for kappa={kappa} (loss {result.fun:.3e})")
    return q
