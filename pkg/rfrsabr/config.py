"""Configuration module for the application.

Process settings come from defaults overridden by RFRSABR_* environment
variables, optionally loaded from a .env file at the repository root. Each run
is described by a JSON document parsed into a RunConfig.
"""

import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from dotenv import load_dotenv

from .errors import ConfigError
from .mc_engine import McConfig, McScheme, default_strike_grid
from .model_core import AccrualPeriod, CapletSpec, CapletStyle, SabrParams, validate

logger = logging.getLogger(__name__)

ENV_PREFIX = "RFRSABR_"

DEFAULTS: Dict[str, Any] = {
    "log_level": "WARNING",
    "mc_paths": 200000,
    "mc_dt": 1.0 / 512.0,
    "mc_seed": 20200501,
    "mc_chunk": 50000,
    "mc_workers": 1,
}


def load_env_file() -> bool:
    """Load environment variables from the .env file next to the package, if present."""
    env_path = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), ".env")
    if not os.path.exists(env_path):
        return False
    loaded = load_dotenv(env_path, override=False)
    logger.debug(f"loaded environment from {env_path}")
    return loaded


def _coerce(value: str, like: Any) -> Any:
    if isinstance(like, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        if "/" in value:
            numerator, denominator = value.split("/", 1)
            return float(numerator) / float(denominator)
        return float(value)
    return value


class Config:
    """Process-wide settings with environment overrides."""

    def __init__(self, environ: Optional[Dict[str, str]] = None):
        self._config: Dict[str, Any] = dict(DEFAULTS)
        self._load_environment(os.environ if environ is None else environ)

    def _load_environment(self, environ):
        problems = []
        for key, default in DEFAULTS.items():
            raw = environ.get(ENV_PREFIX + key.upper())
            if raw is None or raw == "":
                continue
            try:
                self._config[key] = _coerce(raw, default)
            except ValueError:
                problems.append(f"{ENV_PREFIX + key.upper()}={raw!r} is not a valid {type(default).__name__}")
        if problems:
            raise ConfigError(problems)

    def get(self, key: str, default: Any = None) -> Any:
        """Get a configuration value with a default fallback."""
        return self._config.get(key, default)

    def set(self, key: str, value: Any):
        """Override a value for the rest of the process."""
        self._config[key] = value

    def as_dict(self) -> Dict[str, Any]:
        return dict(self._config)

    def __getattr__(self, name: str) -> Any:
        if name.startswith("_"):
            raise AttributeError(name)
        return self._config.get(name)


_config_instance: Optional[Config] = None


def load_config() -> Config:
    """Load the configuration."""
    global _config_instance
    if _config_instance is None:
        load_env_file()
        _config_instance = Config()
    return _config_instance


def reset_config():
    """Drop the cached settings so the next load_config() re-reads the environment."""
    global _config_instance
    _config_instance = None


@dataclass
class RunConfig:
    """Declarative inputs of one command run."""

    params: SabrParams
    period: AccrualPeriod
    forward_rate: float
    q: Optional[float] = None
    strike: Optional[float] = None
    styles: List[CapletStyle] = field(default_factory=lambda: [CapletStyle.BACKWARD])
    discount: float = 1.0
    strikes: List[float] = field(default_factory=list)
    mc: McConfig = field(default_factory=McConfig)
    hw_kappa: float = 0.0
    hw_xi: float = 0.01
    hw_n_points: int = 101
    calibration_beta: Optional[float] = None
    calibration_initial: Optional[SabrParams] = None
    calibration_residual: str = "implied_vol"
    q_bounds: Tuple[float, float] = (1e-3, 1e3)

    @property
    def atm_strike(self) -> float:
        return self.forward_rate if self.strike is None else self.strike

    def caplet(self, style: CapletStyle, strike: Optional[float] = None) -> CapletSpec:
        return CapletSpec(
            strike=self.atm_strike if strike is None else strike,
            style=CapletStyle(style),
            period=self.period,
            discount=self.discount,
            forward_rate=self.forward_rate,
        )

    def violations(self) -> List[str]:
        problems = validate(self.params, self.caplet(self.styles[0] if self.styles else CapletStyle.BACKWARD))
        if self.q is not None and not (math.isfinite(self.q) and self.q > 0):
            problems.append("q must be finite and > 0")
        problems.extend(f"strike {k!r}: strike + shift <= 0" for k in self.strikes if not k + self.params.shift > 0)
        problems.extend(self.mc.violations(self.period))
        return problems

    @classmethod
    def from_dict(cls, doc: Dict[str, Any], require_q: bool = True) -> "RunConfig":
        """Parse and validate a run document, reporting every problem at once."""
        if not isinstance(doc, dict):
            raise ConfigError(["run configuration must be a JSON object"])
        problems: List[str] = []
        reader = _SectionReader(problems)

        model = reader.section(doc, "model", required=True)
        period_doc = reader.section(doc, "period", required=True)
        caplet = reader.section(doc, "caplet", required=True)
        mc_doc = reader.section(doc, "mc")
        hw_doc = reader.section(doc, "hull_white")
        calib_doc = reader.section(doc, "calibration")

        alpha = reader.number(model, "model", "alpha")
        beta = reader.number(model, "model", "beta")
        rho = reader.number(model, "model", "rho")
        nu = reader.number(model, "model", "nu")
        shift = reader.number(model, "model", "shift", default=0.0)
        tau0 = reader.number(period_doc, "period", "tau0")
        tau1 = reader.number(period_doc, "period", "tau1")
        forward_rate = reader.number(caplet, "caplet", "forward_rate")
        q = reader.number(doc, "", "q", required=require_q)
        strike = reader.number(caplet, "caplet", "strike", required=False)
        discount = reader.number(caplet, "caplet", "discount", default=1.0)

        styles = []
        for raw in caplet.get("styles", ["backward"]):
            try:
                styles.append(CapletStyle(raw))
            except ValueError:
                problems.append(f"caplet.styles: unknown style {raw!r}")
        if not styles:
            problems.append("caplet.styles must not be empty")

        mc_overrides = dict(
            n_paths=reader.number(mc_doc, "mc", "n_paths", required=False, kind=int),
            dt=reader.number(mc_doc, "mc", "dt", required=False),
            seed=reader.number(mc_doc, "mc", "seed", required=False, kind=int),
            chunk_size=reader.number(mc_doc, "mc", "chunk_size", required=False, kind=int),
            record_paths=reader.number(mc_doc, "mc", "path_dump", required=False, kind=int),
            workers=reader.number(mc_doc, "mc", "workers", required=False, kind=int),
            antithetic=bool(mc_doc.get("antithetic", False)),
            psi_midpoint=bool(mc_doc.get("psi_midpoint", False)),
            scheme=mc_doc.get("scheme"),
        )
        if mc_overrides["scheme"] is not None and mc_overrides["scheme"] not in {s.value for s in McScheme}:
            problems.append(f"mc.scheme: unknown scheme {mc_overrides['scheme']!r}")
            mc_overrides["scheme"] = None

        initial = None
        initial_doc = reader.section(calib_doc, "initial") if calib_doc else {}
        calibration_beta = reader.number(calib_doc, "calibration", "beta", required=False)
        if initial_doc:
            initial = (
                reader.number(initial_doc, "calibration.initial", "alpha"),
                reader.number(initial_doc, "calibration.initial", "rho"),
                reader.number(initial_doc, "calibration.initial", "nu"),
            )
        residual = calib_doc.get("residual", "implied_vol")
        if residual not in ("implied_vol", "pv"):
            problems.append(f"calibration.residual: unknown residual {residual!r}")
        q_bounds = calib_doc.get("q_bounds", [1e-3, 1e3])
        if not (isinstance(q_bounds, (list, tuple)) and len(q_bounds) == 2 and 0 < q_bounds[0] < q_bounds[1]):
            problems.append(f"calibration.q_bounds: expected [min, max] with 0 < min < max, got {q_bounds!r}")
            q_bounds = [1e-3, 1e3]

        hw_kappa = reader.number(hw_doc, "hull_white", "kappa", default=0.0)
        hw_xi = reader.number(hw_doc, "hull_white", "xi", default=0.01)
        hw_n_points = reader.number(hw_doc, "hull_white", "n_points", default=101, kind=int)

        if problems:
            raise ConfigError(problems)

        strikes = _parse_strikes(doc.get("strikes"), forward_rate, shift, problems)
        if problems:
            raise ConfigError(problems)

        params = SabrParams(alpha=alpha, beta=beta, rho=rho, nu=nu, shift=shift)
        run = cls(
            params=params,
            period=AccrualPeriod(tau0, tau1),
            forward_rate=forward_rate,
            q=q,
            strike=strike,
            styles=styles,
            discount=discount,
            strikes=strikes,
            mc=McConfig.from_settings(**mc_overrides),
            hw_kappa=hw_kappa,
            hw_xi=hw_xi,
            hw_n_points=hw_n_points,
            calibration_beta=beta if calibration_beta is None else calibration_beta,
            calibration_initial=params.with_values(alpha=initial[0], rho=initial[1], nu=initial[2]) if initial else None,
            calibration_residual=residual,
            q_bounds=(float(q_bounds[0]), float(q_bounds[1])),
        )
        problems = run.violations()
        if problems:
            raise ConfigError(problems)
        return run


class _SectionReader:
    """Reads typed values out of nested dicts, collecting every problem."""

    _MISSING = object()

    def __init__(self, problems: List[str]):
        self.problems = problems

    def section(self, doc: Dict[str, Any], name: str, required: bool = False) -> Dict[str, Any]:
        value = doc.get(name, self._MISSING)
        if value is self._MISSING:
            if required:
                self.problems.append(f"missing section {name!r}")
            return {}
        if not isinstance(value, dict):
            self.problems.append(f"section {name!r} must be an object")
            return {}
        return value

    def number(self, doc, section: str, key: str, required: bool = True, default=None, kind=float):
        name = f"{section}.{key}" if section else key
        value = doc.get(key, self._MISSING) if isinstance(doc, dict) else self._MISSING
        if value is self._MISSING or value is None:
            if required and default is None:
                self.problems.append(f"missing key {name!r}")
            return default
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.problems.append(f"{name}: expected a number, got {value!r}")
            return default
        if kind is int and float(value) != int(value):
            self.problems.append(f"{name}: expected an integer, got {value!r}")
            return default
        value = kind(value)
        if not math.isfinite(value):
            self.problems.append(f"{name}: must be finite")
            return default
        return value


def _parse_strikes(raw, forward_rate: float, shift: float, problems: List[str]) -> List[float]:
    if raw is None:
        raw = {"n": 11, "low": 0.5, "high": 2.0}
    if isinstance(raw, list):
        if not raw or not all(isinstance(k, (int, float)) and not isinstance(k, bool) for k in raw):
            problems.append("strikes: expected a non-empty list of numbers")
            return []
        return sorted(float(k) for k in raw)
    if isinstance(raw, dict):
        try:
            grid = default_strike_grid(
                forward_rate, n=int(raw.get("n", 11)), low=float(raw.get("low", 0.5)),
                high=float(raw.get("high", 2.0)), shift=shift,
            )
        except (TypeError, ValueError) as e:
            problems.append(f"strikes: {e}")
            return []
        return [float(k) for k in grid]
    problems.append("strikes: expected a list or an object {n, low, high}")
    return []


def load_run_config(path: str, require_q: bool = True) -> RunConfig:
    """Read a run configuration JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"])
    except json.JSONDecodeError as e:
        raise ConfigError([f"config file {path} is not valid JSON: {e}"])
    logger.info(f"loaded run configuration from {path}")
    return RunConfig.from_dict(doc, require_q=require_q)
