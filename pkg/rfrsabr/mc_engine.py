"""Monte-Carlo simulation of the backward-looking SABR dynamics.

    dR(t) = psi(t) sigma(t) (R(t) + shift)^beta dB(t)
    dsigma(t) = nu sigma(t) dW(t),  d<B, W> = rho dt

sigma is stepped exactly in log space. R is stepped log-Euler for beta = 1
and Euler with full truncation otherwise. Paths are split into chunks, each
drawing from its own Philox stream spawned from one SeedSequence, so results
depend only on the seed and the chunk size, not on the number of workers.
"""

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .black76 import black_vega, implied_vol
from .errors import ConfigError, DomainError, PriceBoundsError
from .model_core import AccrualPeriod, CapletStyle, QLike, SabrParams, decay_speed, psi

logger = logging.getLogger(__name__)

GRID_TOL = 1e-12
AGREEMENT_BAND = 0.003
AGREEMENT_SE = 3.0


class McScheme(str, enum.Enum):
    LOG_EULER_BETA1 = "log_euler_beta1"
    EULER_FULL_TRUNCATION = "euler_full_truncation"


@dataclass(frozen=True)
class McConfig:
    """Simulation settings.

    record_paths keeps the first N trajectories of R and sigma on the full grid.
    """

    n_paths: int = 200000
    dt: float = 1.0 / 512.0
    seed: int = 20200501
    scheme: McScheme = McScheme.LOG_EULER_BETA1
    antithetic: bool = False
    psi_midpoint: bool = False
    chunk_size: int = 50000
    record_paths: int = 0
    workers: int = 1

    @classmethod
    def from_settings(cls, **overrides) -> "McConfig":
        """Defaults from the process settings, then explicit overrides."""
        from .config import load_config

        settings = load_config()
        values = dict(
            n_paths=int(settings.get("mc_paths")),
            dt=float(settings.get("mc_dt")),
            seed=int(settings.get("mc_seed")),
            chunk_size=int(settings.get("mc_chunk")),
            workers=int(settings.get("mc_workers")),
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        if "scheme" in values:
            values["scheme"] = McScheme(values["scheme"])
        return cls(**values)

    def violations(self, period: Optional[AccrualPeriod] = None, beta: Optional[float] = None) -> List[str]:
        problems = []
        if not self.n_paths >= 1:
            problems.append("n_paths must be >= 1")
        if not self.chunk_size >= 1:
            problems.append("chunk_size must be >= 1")
        if not self.dt > 0:
            problems.append("dt must be > 0")
        if period is not None and not self.dt <= period.tau1:
            problems.append("dt must be <= tau1")
        if self.antithetic and (self.n_paths % 2 or self.chunk_size % 2):
            problems.append("antithetic sampling needs even n_paths and chunk_size")
        if not self.record_paths >= 0:
            problems.append("record_paths must be >= 0")
        if not self.workers >= 1:
            problems.append("workers must be >= 1")
        if beta is not None and McScheme(self.scheme) is McScheme.LOG_EULER_BETA1 and beta != 1:
            problems.append("scheme log_euler_beta1 requires beta = 1")
        return problems


@dataclass
class McPaths:
    """Simulated samples of R(tau1) and R(tau0), unshifted.

    at_fixing holds R(max(tau0, 0)); for tau0 <= 0 that is R(0) on every path.
    """

    times: np.ndarray
    terminal: np.ndarray
    at_fixing: np.ndarray
    absorbed: int
    config: McConfig
    forward_rate: float
    recorded_rates: Optional[np.ndarray] = None
    recorded_vols: Optional[np.ndarray] = None

    @property
    def n_paths(self) -> int:
        return int(self.terminal.shape[0])


@dataclass
class McSmile:
    """Monte-Carlo present values and implied volatilities per strike.

    Missing implied volatilities (price outside the invertible bracket) are NaN.
    """

    strikes: np.ndarray
    prices: np.ndarray
    std_errors: np.ndarray
    implied_vols: np.ndarray
    vol_std_errors: np.ndarray
    style: CapletStyle
    expiry: float

    @property
    def missing_vol(self) -> np.ndarray:
        return np.isnan(self.implied_vols)


@dataclass
class McJensenGap:
    """Per-strike backward minus forward present value from common random numbers."""

    strikes: np.ndarray
    gaps: np.ndarray
    std_errors: np.ndarray

    def violations(self, n_se: float = AGREEMENT_SE) -> List[float]:
        """Strikes where the gap is negative beyond n_se standard errors."""
        mask = self.gaps < -n_se * self.std_errors
        return [float(k) for k in self.strikes[mask]]


@dataclass
class SmileAgreement:
    """Monte-Carlo against analytic volatilities with the acceptance band."""

    strikes: np.ndarray
    mc_vols: np.ndarray
    analytic_vols: np.ndarray
    gaps: np.ndarray
    tolerances: np.ndarray
    within: np.ndarray
    skipped: List[float] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "PASS" if bool(np.all(self.within)) else "FAIL"


def time_grid(period: AccrualPeriod, dt: float) -> np.ndarray:
    """Uniform grid with step dt from 0, tau0 inserted, ending at tau1 with a short final step."""
    n = max(int(math.ceil(period.tau1 / dt - GRID_TOL)), 1)
    nodes = list(dt * np.arange(n))
    if 0 < period.tau0 < period.tau1:
        nodes.append(period.tau0)
    nodes.append(period.tau1)
    nodes = np.unique(np.asarray(nodes, dtype=float))
    keep = np.concatenate(([True], np.diff(nodes) > GRID_TOL))
    grid = nodes[keep]
    grid[-1] = period.tau1
    return grid


def _normals(rng: np.random.Generator, n: int, antithetic: bool) -> np.ndarray:
    if not antithetic:
        return rng.standard_normal(n)
    half = rng.standard_normal(n // 2)
    out = np.empty(n)
    out[0::2] = half
    out[1::2] = -half
    return out


@dataclass(frozen=True)
class _ChunkInputs:
    alpha: float
    beta: float
    rho: float
    nu: float
    shift: float
    forward_rate_shifted: float


def _simulate_chunk(params: _ChunkInputs, period, q, cfg, times, fixing_index, n, seed_seq, record):
    rng = np.random.Generator(np.random.Philox(seed_seq))
    shift = params.shift
    x = np.full(n, params.forward_rate_shifted)
    sigma = np.full(n, params.alpha)
    alive = np.ones(n, dtype=bool)
    log_euler = McScheme(cfg.scheme) is McScheme.LOG_EULER_BETA1
    rho_perp = math.sqrt(max(1.0 - params.rho ** 2, 0.0))
    flat = period.tau0 >= period.tau1

    rates = vols = None
    if record:
        rates = np.empty((record, len(times)))
        vols = np.empty((record, len(times)))
        rates[:, 0] = x[:record] - shift
        vols[:, 0] = sigma[:record]

    fixing = x.copy() if fixing_index == 0 else None
    for k in range(len(times) - 1):
        t, t_next = times[k], times[k + 1]
        h = t_next - t
        decay = 1.0 if flat else psi(0.5 * (t + t_next) if cfg.psi_midpoint else t, period, q)
        z_w = _normals(rng, n, cfg.antithetic)
        z_b = params.rho * z_w + rho_perp * _normals(rng, n, cfg.antithetic)
        local_vol = decay * sigma
        if log_euler:
            x = x * np.exp(-0.5 * local_vol ** 2 * h + local_vol * math.sqrt(h) * z_b)
        else:
            x = x + local_vol * np.maximum(x, 0.0) ** params.beta * math.sqrt(h) * z_b
            hit = alive & (x <= 0)
            alive &= ~hit
            x = np.where(alive, x, 0.0)
        sigma = sigma * np.exp(-0.5 * params.nu ** 2 * h + params.nu * math.sqrt(h) * z_w)
        if record:
            rates[:, k + 1] = x[:record] - shift
            vols[:, k + 1] = sigma[:record]
        if k + 1 == fixing_index:
            fixing = x.copy()
    return x - shift, fixing - shift, int(n - alive.sum()), rates, vols


def simulate_paths(
    params: SabrParams, period: AccrualPeriod, q: QLike, cfg: McConfig, forward_rate: float
) -> McPaths:
    """Simulate R up to tau1.

    Args:
        params: SABR parameters
        period: Accrual period; tau0 may be negative
        q: Decay exponent
        cfg: Simulation settings
        forward_rate: R(0)

    Returns:
        Terminal and fixing-date samples, absorbed-path count and recorded trajectories
    """
    q = decay_speed(q)
    problems = params.violations() + period.violations(allow_zero_length=True) + cfg.violations(period, params.beta)
    if not forward_rate + params.shift > 0:
        problems.append("forward_rate + shift <= 0")
    if problems:
        raise ConfigError(problems)

    times = time_grid(period, cfg.dt)
    fixing_index = 0
    if period.tau0 > 0:
        fixing_index = int(np.argmin(np.abs(times - period.tau0)))
    inputs = _ChunkInputs(params.alpha, params.beta, params.rho, params.nu, params.shift, forward_rate + params.shift)

    sizes = [cfg.chunk_size] * (cfg.n_paths // cfg.chunk_size)
    if cfg.n_paths % cfg.chunk_size:
        sizes.append(cfg.n_paths % cfg.chunk_size)
    streams = np.random.SeedSequence(cfg.seed).spawn(len(sizes))
    records = []
    remaining = cfg.record_paths
    for size in sizes:
        records.append(min(remaining, size))
        remaining -= records[-1]

    logger.info(f"simulating {cfg.n_paths} paths on {len(times) - 1} steps in {len(sizes)} chunk(s)")

    def run(i):
        return _simulate_chunk(inputs, period, q, cfg, times, fixing_index, sizes[i], streams[i], records[i])

    if cfg.workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run, range(len(sizes))))
    else:
        results = [run(i) for i in range(len(sizes))]

    terminal = np.concatenate([r[0] for r in results])
    fixing = np.concatenate([r[1] for r in results])
    absorbed = sum(r[2] for r in results)
    if absorbed:
        logger.warning(f"{absorbed} of {cfg.n_paths} paths absorbed at zero")
    recorded = [r for r in results if r[3] is not None]
    return McPaths(
        times=times,
        terminal=terminal,
        at_fixing=fixing,
        absorbed=absorbed,
        config=cfg,
        forward_rate=forward_rate,
        recorded_rates=np.concatenate([r[3] for r in recorded]) if recorded else None,
        recorded_vols=np.concatenate([r[4] for r in recorded]) if recorded else None,
    )


def _mean_and_error(samples: np.ndarray, antithetic: bool):
    if antithetic:
        samples = samples.reshape(-1, 2).mean(axis=1)
    n = samples.shape[0]
    error = float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return float(samples.mean()), error


def _payoff(underlying: np.ndarray, strike: float, forward_rate: float) -> np.ndarray:
    """Call payoff less its known parity part: the put side below the forward."""
    if strike < forward_rate:
        return np.maximum(strike - underlying, 0.0)
    return np.maximum(underlying - strike, 0.0)


def default_strike_grid(forward_rate: float, n: int = 11, low: float = 0.5, high: float = 2.0, shift: float = 0.0) -> np.ndarray:
    """Geometric strike grid over [low, high] times the (shifted) forward."""
    if not (n >= 1 and 0 < low <= high):
        raise DomainError(f"invalid strike grid n={n} low={low} high={high}")
    base = forward_rate + shift
    if not base > 0:
        raise DomainError("forward_rate + shift must be > 0")
    return np.geomspace(low * base, high * base, n) - shift


def mc_caplet_smile(
    params: SabrParams,
    period: AccrualPeriod,
    q: QLike,
    strikes: Sequence[float],
    cfg: McConfig,
    style: CapletStyle = CapletStyle.BACKWARD,
    forward_rate: Optional[float] = None,
    discount: float = 1.0,
    paths: Optional[McPaths] = None,
) -> McSmile:
    """Price caplets on simulated paths and invert their Black volatilities.

    Backward caplets pay on R(tau1) and are quoted at tau1; forward caplets pay
    on R(tau0) from the same paths and are quoted at tau0.

    Args:
        params: SABR parameters
        period: Accrual period
        q: Decay exponent
        strikes: Strikes, unshifted
        cfg: Simulation settings
        style: Caplet style
        forward_rate: R(0); taken from paths when they are given
        discount: P(0, tau1)
        paths: Reuse previously simulated paths

    Returns:
        The Monte-Carlo smile
    """
    style = CapletStyle(style)
    if not 0 < discount <= 1:
        raise DomainError(f"discount must lie in (0,1], got {discount!r}")
    if paths is None:
        if forward_rate is None:
            raise DomainError("forward_rate is required when no paths are given")
        paths = simulate_paths(params, period, q, cfg, forward_rate)
    forward_rate = paths.forward_rate
    strikes = np.asarray(strikes, dtype=float)
    if np.any(strikes + params.shift <= 0):
        raise DomainError("strikes must be positive after the shift")

    if style is CapletStyle.BACKWARD:
        underlying, expiry = paths.terminal, period.tau1
    else:
        underlying, expiry = paths.at_fixing, max(period.tau0, 0.0)

    prices, errors, vols, vol_errors = [], [], [], []
    for strike in strikes:
        mean, error = _mean_and_error(_payoff(underlying, strike, forward_rate), paths.config.antithetic)
        if strike < forward_rate:
            mean += forward_rate - strike
        prices.append(discount * mean)
        errors.append(discount * error)
        vol, vol_error = float("nan"), float("nan")
        if expiry > 0:
            f, k = forward_rate + params.shift, strike + params.shift
            try:
                vol = implied_vol(expiry, k, f, mean)
                vol_error = error / black_vega(expiry, k, f, vol)
            except PriceBoundsError as e:
                logger.info(f"no implied volatility at strike {strike:.6g}: {e}")
        vols.append(vol)
        vol_errors.append(vol_error)

    return McSmile(
        strikes=strikes,
        prices=np.asarray(prices),
        std_errors=np.asarray(errors),
        implied_vols=np.asarray(vols),
        vol_std_errors=np.asarray(vol_errors),
        style=style,
        expiry=expiry,
    )


def mc_jensen_gap(
    params: SabrParams,
    period: AccrualPeriod,
    q: QLike,
    strikes: Sequence[float],
    cfg: McConfig,
    forward_rate: Optional[float] = None,
    discount: float = 1.0,
    paths: Optional[McPaths] = None,
) -> McJensenGap:
    """Backward minus forward caplet value per strike on common paths."""
    if paths is None:
        if forward_rate is None:
            raise DomainError("forward_rate is required when no paths are given")
        paths = simulate_paths(params, period, q, cfg, forward_rate)
    strikes = np.asarray(strikes, dtype=float)
    gaps, errors = [], []
    for strike in strikes:
        diff = _payoff(paths.terminal, strike, paths.forward_rate) - _payoff(paths.at_fixing, strike, paths.forward_rate)
        mean, error = _mean_and_error(diff, paths.config.antithetic)
        gaps.append(discount * mean)
        errors.append(discount * error)
    return McJensenGap(strikes=strikes, gaps=np.asarray(gaps), std_errors=np.asarray(errors))


def smile_agreement(
    smile: McSmile, analytic_vols: Sequence[float], n_se: float = AGREEMENT_SE, band: float = AGREEMENT_BAND
) -> SmileAgreement:
    """Compare Monte-Carlo and analytic volatilities within n_se * SE + band.

    Strikes without a Monte-Carlo volatility are skipped and listed.
    """
    analytic = np.asarray(analytic_vols, dtype=float)
    if analytic.shape != smile.implied_vols.shape:
        raise DomainError("analytic_vols must match the smile strikes")
    usable = ~smile.missing_vol
    gaps = smile.implied_vols - analytic
    tolerances = n_se * smile.vol_std_errors + band
    within = np.abs(gaps[usable]) <= tolerances[usable]
    result = SmileAgreement(
        strikes=smile.strikes[usable],
        mc_vols=smile.implied_vols[usable],
        analytic_vols=analytic[usable],
        gaps=gaps[usable],
        tolerances=tolerances[usable],
        within=within,
        skipped=[float(k) for k in smile.strikes[~usable]],
    )
    if result.verdict == "FAIL":
        logger.warning(f"smile disagreement at strikes {list(result.strikes[~within])}")
    return result


def increment_variance_profile(paths: McPaths, bins: int = 8):
    """Variance per unit time of recorded R increments, averaged in equal time bins.

    Returns:
        (bin midpoints, variance per year) as numpy arrays
    """
    if paths.recorded_rates is None or paths.recorded_rates.shape[0] < 2:
        raise DomainError("increment variance needs at least two recorded paths")
    steps = np.diff(paths.times)
    rates_per_time = np.diff(paths.recorded_rates, axis=1).var(axis=0, ddof=1) / steps
    edges = np.linspace(paths.times[0], paths.times[-1], bins + 1)
    starts = paths.times[:-1]
    index = np.clip(np.searchsorted(edges, starts, side="right") - 1, 0, bins - 1)
    weights = np.bincount(index, weights=steps, minlength=bins)
    profile = np.bincount(index, weights=rates_per_time * steps, minlength=bins) / weights
    return 0.5 * (edges[:-1] + edges[1:]), profile
