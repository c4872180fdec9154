"""Marking SABR parameters and the decay exponent to caplet quotes.

Two uses: fit (alpha, rho, nu) to a strip of caplet quotes with beta fixed,
and fit q so that the at-the-money backward-looking caplet is repriced given
forward-marked (alpha, rho, nu).
"""

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, least_squares, minimize

from .black76 import black_price, implied_vol
from .effective_sabr import EffectiveSabrParams, effective_params, limit_q_to_infinity
from .errors import BracketError, CalibrationError, DomainError, PriceBoundsError, QuoteFileError
from .hagan_vol import hagan_implied_vol
from .model_core import AccrualPeriod, CapletSpec, CapletStyle, SabrParams
from .pricer import price_backward_caplet

logger = logging.getLogger(__name__)

RHO_CAP = 0.999
NU_FLOOR = 1e-4
START_RHO_LIMIT = 0.99
OBJECTIVE_TOL = 1e-10
MAX_ITERATIONS = 2000
Q_BOUNDS = (1e-3, 1e3)
PRICE_TOL = 1e-10
FREE_PARAMETERS = ("alpha", "rho", "nu")
PENALTY = 1e10


class QuoteKind(str, enum.Enum):
    IMPLIED_VOL = "implied_vol"
    PV = "pv"


class ResidualKind(str, enum.Enum):
    IMPLIED_VOL = "implied_vol"
    PV = "pv"


@dataclass(frozen=True)
class QuoteEntry:
    strike: float
    style: CapletStyle
    quote_kind: QuoteKind
    value: float
    weight: float = 1.0


@dataclass
class QuoteSet:
    """Caplet quotes on one accrual period.

    Every entry is converted once to both a Black implied volatility (at tau0
    for forward caplets, tau1 for backward ones) and a present value.
    Infeasible quotes raise QuoteFileError naming the 1-based entry numbers.
    """

    entries: List[QuoteEntry]
    period: AccrualPeriod
    forward_rate: float
    discount: float = 1.0
    shift: float = 0.0
    implied_vols: np.ndarray = field(init=False)
    present_values: np.ndarray = field(init=False)

    def __post_init__(self):
        self.entries = [
            QuoteEntry(e.strike, CapletStyle(e.style), QuoteKind(e.quote_kind), float(e.value), float(e.weight))
            for e in self.entries
        ]
        messages, rows = [], []
        problems = self.period.violations()
        if not 0 < self.discount <= 1:
            problems.append("discount out of (0,1]")
        if not self.forward_rate + self.shift > 0:
            problems.append("forward_rate + shift <= 0")
        if problems:
            raise QuoteFileError(problems)
        if not self.entries:
            raise QuoteFileError(["quote set is empty"])

        vols, pvs = [], []
        for row, entry in enumerate(self.entries, start=1):
            try:
                vol, pv = self._convert(entry)
            except (DomainError, PriceBoundsError) as e:
                messages.append(f"entry {row}: {e}")
                rows.append(row)
                vol = pv = float("nan")
            vols.append(vol)
            pvs.append(pv)
        weights = np.array([e.weight for e in self.entries])
        if np.any(weights < 0):
            bad = [i + 1 for i in np.flatnonzero(weights < 0)]
            messages.append(f"negative weights in entries {bad}")
            rows.extend(bad)
        elif not np.any(weights > 0):
            messages.append("all weights are zero")
        if messages:
            raise QuoteFileError(messages, sorted(set(rows)))
        self.implied_vols = np.asarray(vols)
        self.present_values = np.asarray(pvs)

    def expiry(self, style: CapletStyle) -> float:
        return self.period.tau1 if CapletStyle(style) is CapletStyle.BACKWARD else self.period.tau0

    def _convert(self, entry: QuoteEntry) -> Tuple[float, float]:
        expiry = self.expiry(entry.style)
        if not expiry > 0:
            raise DomainError(f"{entry.style.value} quote has no time to exercise (expiry {expiry!r})")
        k, f = entry.strike + self.shift, self.forward_rate + self.shift
        if not k > 0:
            raise DomainError("strike + shift <= 0")
        if entry.quote_kind is QuoteKind.PV:
            return implied_vol(expiry, k, f, entry.value / self.discount), entry.value
        if not entry.value > 0:
            raise DomainError(f"implied volatility must be > 0, got {entry.value!r}")
        return entry.value, self.discount * black_price(expiry, k, f, entry.value)

    def indices(self, style: CapletStyle) -> List[int]:
        return [i for i, e in enumerate(self.entries) if e.style is CapletStyle(style)]

    def atm_index(self, style: CapletStyle = CapletStyle.BACKWARD) -> int:
        """Index of the entry of the given style whose strike is closest to the forward."""
        candidates = self.indices(style)
        if not candidates:
            raise CalibrationError(f"no {CapletStyle(style).value} quotes")
        return min(candidates, key=lambda i: abs(self.entries[i].strike - self.forward_rate))


@dataclass
class CalibrationResult:
    """Outcome of a fit; residuals are model minus quote, unweighted."""

    params: SabrParams
    objective: float
    initial_objective: float
    iterations: int
    converged: bool
    residuals: np.ndarray
    q: Optional[float] = None
    capped: bool = False
    message: str = ""
    effective: Optional[EffectiveSabrParams] = None


def _to_unconstrained(params: SabrParams) -> np.ndarray:
    rho = float(np.clip(params.rho / RHO_CAP, -START_RHO_LIMIT, START_RHO_LIMIT))
    if rho != params.rho / RHO_CAP:
        logger.debug(f"initial rho {params.rho} moved to {rho * RHO_CAP:.6f} to start inside the search domain")
    return np.array([math.log(params.alpha), math.atanh(rho), math.log(max(params.nu, NU_FLOOR))])


def _from_unconstrained(x: np.ndarray, template: SabrParams) -> SabrParams:
    return template.with_values(alpha=math.exp(x[0]), rho=RHO_CAP * math.tanh(x[1]), nu=math.exp(x[2]))


def _fit(
    quotes: QuoteSet,
    indices: Sequence[int],
    model_vols: Callable[[SabrParams, Sequence[int]], np.ndarray],
    initial: SabrParams,
    residual: ResidualKind,
    fixed: Sequence[str],
) -> CalibrationResult:
    residual = ResidualKind(residual)
    free = [i for i, name in enumerate(FREE_PARAMETERS) if name not in fixed]
    unknown = set(fixed) - set(FREE_PARAMETERS)
    if unknown:
        raise CalibrationError(f"unknown fixed parameters {sorted(unknown)}")
    if not free:
        raise CalibrationError("nothing to calibrate: every parameter is fixed")
    active = [i for i in indices if quotes.entries[i].weight > 0]
    if len(active) < len(free):
        raise CalibrationError(f"{len(active)} weighted quote(s) for {len(free)} free parameter(s)")
    problems = initial.violations()
    if problems:
        raise CalibrationError("invalid initial parameters: " + "; ".join(problems))

    sqrt_w = np.sqrt([quotes.entries[i].weight for i in active])
    expiries = np.array([quotes.expiry(quotes.entries[i].style) for i in active])
    strikes = np.array([quotes.entries[i].strike for i in active]) + quotes.shift
    forward = quotes.forward_rate + quotes.shift
    start = _to_unconstrained(initial)

    def params_of(y):
        x = start.copy()
        x[free] = y
        moved = _from_unconstrained(x, initial)
        return initial.with_values(**{FREE_PARAMETERS[i]: getattr(moved, FREE_PARAMETERS[i]) for i in free})

    def raw_residuals(params):
        vols = model_vols(params, active)
        if residual is ResidualKind.IMPLIED_VOL:
            return vols - quotes.implied_vols[active]
        model = [quotes.discount * black_price(t, k, forward, v) for t, k, v in zip(expiries, strikes, vols)]
        return np.asarray(model) - quotes.present_values[active]

    def weighted(y):
        try:
            return sqrt_w * raw_residuals(params_of(y))
        except (DomainError, FloatingPointError, OverflowError):
            return np.full(len(active), PENALTY)

    def objective(y):
        r = weighted(y)
        return float(np.dot(r, r))

    y0 = start[free]
    initial_objective = objective(y0)
    simplex = minimize(
        objective,
        y0,
        method="Nelder-Mead",
        options={"xatol": 1e-12, "fatol": OBJECTIVE_TOL * 1e-3, "maxiter": MAX_ITERATIONS, "maxfev": 4 * MAX_ITERATIONS},
    )
    polish = least_squares(weighted, simplex.x, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=MAX_ITERATIONS)

    candidates = [(initial_objective, y0), (float(simplex.fun), simplex.x), (objective(polish.x), polish.x)]
    best_objective, best_y = min(candidates, key=lambda c: c[0])
    params = params_of(best_y)
    converged = bool(simplex.success or polish.success)
    message = f"simplex: {simplex.message}; polish: {polish.message}"
    if not converged:
        logger.warning(f"calibration did not converge: {message}")
    logger.info(f"calibrated {params} objective {best_objective:.3e} after {simplex.nit} simplex iterations")
    return CalibrationResult(
        params=params,
        objective=best_objective,
        initial_objective=initial_objective,
        iterations=int(simplex.nit) + int(polish.nfev),
        converged=converged,
        residuals=raw_residuals(params),
        message=message,
    )


def calibrate_forward_smile(
    quotes: QuoteSet,
    beta: float,
    initial: SabrParams,
    residual: ResidualKind = ResidualKind.IMPLIED_VOL,
    fixed: Sequence[str] = (),
) -> CalibrationResult:
    """Fit (alpha, rho, nu) to the forward-looking quotes through Hagan's formula at tau0.

    Args:
        quotes: Quote set; only forward-looking entries are used
        beta: CEV exponent, held fixed
        initial: Starting point (its beta is replaced)
        residual: Fit implied volatilities or present values
        fixed: Names among alpha, rho, nu held at their initial values

    Returns:
        Best point found, flagged converged when the tolerance was met
    """
    if not quotes.period.tau0 > 0:
        raise CalibrationError(f"forward-looking quotes need tau0 > 0, got {quotes.period.tau0!r}")
    indices = quotes.indices(CapletStyle.FORWARD)
    if not indices:
        raise CalibrationError("no forward-looking quotes")
    tau0 = quotes.period.tau0

    def model_vols(params, active):
        return np.array(
            [hagan_implied_vol(tau0, quotes.entries[i].strike, quotes.forward_rate, params) for i in active]
        )

    start = initial.with_values(beta=beta, shift=quotes.shift)
    return _fit(quotes, indices, model_vols, start, residual, fixed)


def calibrate_backward_smile(
    quotes: QuoteSet,
    beta: float,
    initial: SabrParams,
    q: float,
    residual: ResidualKind = ResidualKind.IMPLIED_VOL,
    fixed: Sequence[str] = (),
) -> CalibrationResult:
    """Fit the original (alpha, rho, nu) to backward-looking quotes with q given.

    Model volatilities are Hagan's formula at tau1 with the effective parameters.
    """
    indices = quotes.indices(CapletStyle.BACKWARD)
    if not indices:
        raise CalibrationError("no backward-looking quotes")
    period = quotes.period
    tau1 = period.tau1

    def model_vols(params, active):
        sabr = effective_params(params, period, q).as_sabr(params.beta, params.shift)
        return np.array([hagan_implied_vol(tau1, quotes.entries[i].strike, quotes.forward_rate, sabr) for i in active])

    start = initial.with_values(beta=beta, shift=quotes.shift)
    result = _fit(quotes, indices, model_vols, start, residual, fixed)
    result.q = float(q)
    result.effective = effective_params(result.params, period, q)
    return result


def _q_price_function(params: SabrParams, period: AccrualPeriod, forward_rate: float, strike: float, discount: float):
    spec = CapletSpec(strike, CapletStyle.BACKWARD, period, discount, forward_rate)

    def price(q):
        return price_backward_caplet(spec, params, q).present_value

    def limit_price():
        return price_backward_caplet(spec, params, 1.0, effective=limit_q_to_infinity(params, period)).present_value

    return price, limit_price


def calibrate_q_to_atm_backward(
    quote: float,
    params: SabrParams,
    period: AccrualPeriod,
    forward_rate: float,
    discount: float = 1.0,
    strike: Optional[float] = None,
    q_bounds: Tuple[float, float] = Q_BOUNDS,
) -> CalibrationResult:
    """Find q such that the backward-looking caplet reprices a present value quote.

    The price is nonincreasing in q; this is checked on the bracket first. A
    quote between the q -> infinity price and the price at q_max returns q_max
    flagged as capped.

    Args:
        quote: Present value of the backward-looking caplet
        params: Forward-marked SABR parameters
        period: Accrual period
        forward_rate: R(0)
        discount: P(0, tau1)
        strike: Caplet strike, at the money by default
        q_bounds: Search bracket [q_min, q_max]

    Returns:
        Result carrying q and the price residual

    Raises:
        BracketError: if the quote is outside the attainable price range
    """
    strike = forward_rate if strike is None else strike
    q_min, q_max = q_bounds
    if not 0 < q_min < q_max:
        raise CalibrationError(f"invalid q bracket {q_bounds}")
    lower = discount * max(forward_rate - strike, 0.0)
    upper = discount * (forward_rate + params.shift)
    if not lower < quote < upper:
        raise PriceBoundsError(quote, lower, upper)

    price, limit_price = _q_price_function(params, period, forward_rate, strike, discount)
    grid = np.geomspace(q_min, q_max, 25)
    prices = np.array([price(q) for q in grid])
    rises = np.flatnonzero(np.diff(prices) > PRICE_TOL * 1e-2)
    if rises.size:
        raise CalibrationError(f"backward price increases in q near q={grid[rises[0]]:.6g}; cannot root-find")

    high, low_at_cap = prices[0], prices[-1]
    floor = limit_price()
    if quote > high + PRICE_TOL:
        raise BracketError(quote, floor, high)
    if quote < floor - PRICE_TOL:
        raise BracketError(quote, floor, high)

    if quote <= low_at_cap:
        message = f"quote at or below the price at q_max={q_max:g}; capped"
        logger.warning(message)
        return CalibrationResult(
            params=params,
            objective=(low_at_cap - quote) ** 2,
            initial_objective=(high - quote) ** 2,
            iterations=len(grid),
            converged=True,
            residuals=np.array([low_at_cap - quote]),
            q=q_max,
            capped=True,
            message=message,
        )
    if quote >= high:
        q_fit, iterations = q_min, 0
    else:
        log_q, info = brentq(
            lambda x: price(math.exp(x)) - quote,
            math.log(q_min),
            math.log(q_max),
            xtol=1e-14,
            rtol=1e-14,
            maxiter=500,
            full_output=True,
        )
        q_fit, iterations = math.exp(log_q), info.iterations
    residual = price(q_fit) - quote
    logger.info(f"q={q_fit:.10g} reprices quote {quote:.10g} (residual {residual:.2e})")
    return CalibrationResult(
        params=params,
        objective=residual ** 2,
        initial_objective=(high - quote) ** 2,
        iterations=iterations,
        converged=abs(residual) <= PRICE_TOL,
        residuals=np.array([residual]),
        q=q_fit,
        effective=effective_params(params, period, q_fit),
    )


def calibrate_q_from_quotes(
    quotes: QuoteSet, params: SabrParams, q_bounds: Tuple[float, float] = Q_BOUNDS
) -> CalibrationResult:
    """calibrate_q_to_atm_backward on the backward quote closest to the money."""
    index = quotes.atm_index(CapletStyle.BACKWARD)
    entry = quotes.entries[index]
    return calibrate_q_to_atm_backward(
        float(quotes.present_values[index]),
        params.with_values(shift=quotes.shift),
        quotes.period,
        quotes.forward_rate,
        discount=quotes.discount,
        strike=entry.strike,
        q_bounds=q_bounds,
    )
