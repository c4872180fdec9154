"""Parameter types, the volatility decay function and input validation."""

import enum
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Union

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class SabrParams:
    """SABR volatility state (alpha, beta, rho, nu) with an optional displacement."""

    alpha: float
    beta: float
    rho: float
    nu: float
    shift: float = 0.0

    def violations(self) -> List[str]:
        """List every violated parameter bound."""
        problems = []
        if not self.alpha > 0:
            problems.append("alpha must be > 0")
        if not self.nu >= 0:
            problems.append("nu must be >= 0")
        if not 0 <= self.beta <= 1:
            problems.append("beta out of [0,1]")
        if not -1 <= self.rho <= 1:
            problems.append("rho out of [-1,1]")
        if not self.shift >= 0:
            problems.append("shift must be >= 0")
        return problems

    def with_values(self, **changes) -> "SabrParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class AccrualPeriod:
    """Accrual period [tau0, tau1] in year fractions from pricing time 0."""

    tau0: float
    tau1: float

    @property
    def length(self) -> float:
        return self.tau1 - self.tau0

    @property
    def seasoned(self) -> bool:
        """True once the accrual period has started (tau0 < 0)."""
        return self.tau0 < 0

    def violations(self, allow_zero_length: bool = False) -> List[str]:
        problems = []
        if not self.tau1 > 0:
            problems.append("tau1 must be > 0")
        if allow_zero_length:
            if not self.tau0 <= self.tau1:
                problems.append("tau0 must be <= tau1")
        elif not self.tau0 < self.tau1:
            problems.append("tau0 must be < tau1")
        return problems


@dataclass(frozen=True)
class DecayExponent:
    """Speed q > 0 of the volatility decay inside the accrual period."""

    q: float

    def __post_init__(self):
        if not (math.isfinite(self.q) and self.q > 0):
            raise DomainError(f"decay exponent q must be finite and > 0, got {self.q!r}")


QLike = Union[float, DecayExponent]


def decay_speed(q: QLike) -> float:
    """Return q as a validated float."""
    if isinstance(q, DecayExponent):
        return q.q
    return DecayExponent(float(q)).q


class CapletStyle(str, enum.Enum):
    BACKWARD = "backward"
    FORWARD = "forward"


@dataclass(frozen=True)
class CapletSpec:
    """A single caplet on the compounded rate of one accrual period.

    forward_rate is R(0); for a forward-looking caplet whose period has already
    started it is the realized fixing R(tau0).
    """

    strike: float
    style: CapletStyle
    period: AccrualPeriod
    discount: float
    forward_rate: float

    def violations(self, shift: float = 0.0, allow_zero_length: bool = False) -> List[str]:
        problems = list(self.period.violations(allow_zero_length))
        if not 0 < self.discount <= 1:
            problems.append("discount out of (0,1]")
        if not self.forward_rate + shift > 0:
            problems.append("forward_rate + shift <= 0")
        if not self.strike + shift > 0:
            problems.append("strike + shift <= 0")
        return problems

    def with_style(self, style: CapletStyle) -> "CapletSpec":
        return replace(self, style=CapletStyle(style))

    def with_strike(self, strike: float) -> "CapletSpec":
        return replace(self, strike=strike)


def psi(t, period: AccrualPeriod, q: QLike):
    """Volatility decay factor psi(t) = min(1, (tau1 - t)/(tau1 - tau0))^q.

    Args:
        t: Time in years, scalar or array, not beyond tau1
        period: Accrual period
        q: Decay exponent

    Returns:
        psi(t), a float for scalar input and an ndarray otherwise
    """
    q = decay_speed(q)
    if not period.tau0 < period.tau1:
        raise DomainError(f"psi needs tau0 < tau1, got {period}")
    times = np.asarray(t, dtype=float)
    if np.any(times > period.tau1):
        raise DomainError(f"psi is defined for t <= tau1={period.tau1}")
    ratio = np.minimum(1.0, (period.tau1 - times) / period.length)
    values = ratio ** q
    if values.ndim == 0:
        return float(values)
    return values


def validate(params: SabrParams, spec: Optional[CapletSpec] = None) -> List[str]:
    """Report every violated invariant of the model inputs.

    Args:
        params: SABR parameters
        spec: Optional caplet description checked against params.shift

    Returns:
        List of violation messages, empty when the inputs are valid
    """
    problems = params.violations()
    if spec is not None:
        problems.extend(spec.violations(shift=params.shift))
    return problems


def ensure_valid(params: SabrParams, spec: Optional[CapletSpec] = None) -> None:
    """Raise DomainError listing all violations, if any."""
    problems = validate(params, spec)
    if problems:
        raise DomainError("invalid model inputs: " + "; ".join(problems))
