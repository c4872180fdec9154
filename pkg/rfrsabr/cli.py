"""Command implementations behind main.py.

Every command computes its full result before anything is written, so a
failing run leaves no output file behind.
"""

import json
import logging
import os
import sys
import time
from dataclasses import asdict, replace
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from utils.general_utils import format_duration

from .calibration import (
    ResidualKind,
    calibrate_backward_smile,
    calibrate_forward_smile,
    calibrate_q_from_quotes,
)
from .config import RunConfig, load_run_config
from .effective_sabr import (
    EffectiveSabrParams,
    effective_params,
    effective_rho_bound,
    forward_intermediates,
    limit_q_to_infinity,
    limit_q_to_zero,
    piterbarg_alpha,
    rescale_time_to_exercise,
)
from .errors import (
    BracketError,
    CalibrationError,
    ConfigError,
    DomainError,
    QuadratureError,
    QuoteFileError,
    RfrSabrError,
)
from .hagan_vol import hagan_implied_vol
from .hull_white import HullWhiteDecaySpec, decay_grid, decay_shape_report, fit_decay_exponent, term_rate_volatility
from .mc_engine import McConfig, mc_caplet_smile, mc_jensen_gap, simulate_paths, smile_agreement
from .model_core import CapletStyle
from .pricer import price_backward_caplet, price_forward_caplet, strike_profile_violations
from .quadrature_oracle import effective_params_quadrature
from .quote_reader import build_quote_set, read_quotes
from .report_writer import write_csv, write_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

CURVE_SETS = {
    "effective": ["effective"],
    "alpha-only": ["alpha-only"],
    "raw": ["raw"],
    "all": ["effective", "alpha-only", "raw"],
}

COMMANDS_WITHOUT_Q = {"calibrate"}


def _fmt(value: Optional[float], digits: int = 10) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return "n/a"
    return f"{value:.{digits}g}"


def _style_order(style: CapletStyle) -> int:
    return 0 if CapletStyle(style) is CapletStyle.BACKWARD else 1


def cmd_price(run: RunConfig, out: Optional[str] = None) -> pd.DataFrame:
    """Price the configured caplet in every requested style."""
    priced = []
    for style in run.styles:
        spec = run.caplet(style)
        if style is CapletStyle.BACKWARD:
            priced.append((spec, price_backward_caplet(spec, run.params, run.q)))
        else:
            priced.append((spec, price_forward_caplet(spec, run.params)))

    rows = []
    for spec, result in priced:
        eff = result.effective_params_used
        rows.append(
            {
                "style": result.style.value,
                "strike": spec.strike,
                "pv": result.present_value,
                "implied_vol": result.implied_vol,
                "time_to_exercise": result.time_to_exercise_quoted,
                "alpha_hat": eff.alpha_hat if eff else None,
                "rho_hat": eff.rho_hat if eff else None,
                "nu_hat": eff.nu_hat if eff else None,
            }
        )
        print(f"{result.style.value} caplet, strike {_fmt(spec.strike)}")
        print(f"  present value     {_fmt(result.present_value, 12)}")
        if result.implied_vol is None:
            print("  implied vol       n/a (payoff already fixed, intrinsic value)")
        else:
            print(f"  implied vol       {_fmt(result.implied_vol, 12)} (T = {_fmt(result.time_to_exercise_quoted)})")
        if eff is not None:
            print(
                f"  effective params  alpha_hat={eff.alpha_hat:.6f} rho_hat={eff.rho_hat:.6f} "
                f"nu_hat={eff.nu_hat:.6f} quoted at T={_fmt(eff.time_to_exercise)}"
            )
    frame = pd.DataFrame(rows, columns=["style", "strike", "pv", "implied_vol", "time_to_exercise", "alpha_hat", "rho_hat", "nu_hat"])
    if out:
        write_csv(frame, out, "price")
    return frame


def cmd_effective_params(run: RunConfig, out: Optional[str] = None) -> Dict[str, Any]:
    """Report the effective triple with its intermediates, limits and the quadrature check."""
    params, period, q = run.params, run.period, run.q
    eff = effective_params(params, period, q)
    report: Dict[str, Any] = {
        "tau0": period.tau0,
        "tau1": period.tau1,
        "q": q,
        "effective": _triple(eff),
        "effective_first_order": _triple(effective_params(params, period, q, include_second_order=False)),
        "rho_hat_bound": effective_rho_bound(period, q),
        "limit_q_to_zero": _triple(limit_q_to_zero(params, period)),
        "limit_q_to_infinity": _triple(limit_q_to_infinity(params, period)),
        "quadrature": _triple(effective_params_quadrature(params, period, q)),
    }
    if period.tau0 >= 0:
        mid = forward_intermediates(params, period, q)
        report["intermediates"] = {"tau": mid.tau, "H": mid.H, "gamma": mid.gamma, "zeta": mid.zeta}
    if period.tau0 > 0:
        report["piterbarg_alpha"] = piterbarg_alpha(params.alpha, period)
        report["alpha_hat_at_tau0"] = rescale_time_to_exercise(eff, period.tau0).alpha_hat

    print(f"effective SABR parameters for [{_fmt(period.tau0)}, {_fmt(period.tau1)}], q={_fmt(q)}")
    for name in ("effective", "effective_first_order", "quadrature", "limit_q_to_zero", "limit_q_to_infinity"):
        t = report[name]
        print(f"  {name:<22} alpha={t['alpha']:.8f} rho={t['rho']:.8f} nu={t['nu']:.8f} T={_fmt(t['time_to_exercise'])}")
    if "intermediates" in report:
        mid = report["intermediates"]
        print(f"  tau={mid['tau']:.8g} H={mid['H']:.8g} gamma={mid['gamma']:.8g}")
    if "piterbarg_alpha" in report:
        print(f"  alpha_hat at tau0 {report['alpha_hat_at_tau0']:.8f} vs Piterbarg {report['piterbarg_alpha']:.8f}")
    if out:
        write_json(report, out)
    return report


def _triple(eff: EffectiveSabrParams) -> Dict[str, Any]:
    return {
        "alpha": eff.alpha_hat,
        "rho": eff.rho_hat,
        "nu": eff.nu_hat,
        "time_to_exercise": eff.time_to_exercise,
        "degenerate": eff.degenerate,
    }


def _curve_triple(run: RunConfig, curve: str) -> EffectiveSabrParams:
    params, period = run.params, run.period
    if curve == "raw":
        return EffectiveSabrParams(params.alpha, params.rho, params.nu, period.tau1)
    eff = effective_params(params, period, run.q)
    if curve == "alpha-only":
        return EffectiveSabrParams(eff.alpha_hat, params.rho, params.nu, period.tau1)
    return eff


def cmd_smile(run: RunConfig, out: Optional[str] = None, curves: str = "effective") -> pd.DataFrame:
    """Analytic smile on the strike grid, one row per strike and style (and curve)."""
    if curves not in CURVE_SETS:
        raise ConfigError([f"unknown curve set {curves!r}; choose from {sorted(CURVE_SETS)}"])
    if not run.strikes:
        raise ConfigError(["strike grid is empty"])
    names = CURVE_SETS[curves]
    rows = []
    for style in run.styles:
        for curve in names if style is CapletStyle.BACKWARD else ["standard"]:
            triple = _curve_triple(run, curve) if style is CapletStyle.BACKWARD else None
            pvs = []
            for strike in run.strikes:
                spec = run.caplet(style, strike)
                if triple is not None:
                    result = price_backward_caplet(spec, run.params, run.q, effective=triple)
                else:
                    result = price_forward_caplet(spec, run.params)
                pvs.append(result.present_value)
                rows.append(
                    {
                        "strike": strike,
                        "style": style.value,
                        "curve": curve,
                        "pv": result.present_value,
                        "implied_vol": result.implied_vol,
                        "alpha_hat": triple.alpha_hat if triple else None,
                        "rho_hat": triple.rho_hat if triple else None,
                        "nu_hat": triple.nu_hat if triple else None,
                    }
                )
            for problem in strike_profile_violations(run.strikes, pvs):
                print(f"  warning ({style.value}, {curve}): {problem}")

    frame = pd.DataFrame(rows)
    frame["_order"] = frame["style"].map(lambda s: _style_order(CapletStyle(s)))
    frame["_curve"] = frame["curve"].map({"effective": 0, "alpha-only": 1, "raw": 2, "standard": 3})
    frame = frame.sort_values(["strike", "_order", "_curve"], kind="mergesort").drop(columns=["_order", "_curve"])
    frame = frame.reset_index(drop=True)
    kind = "smile"
    if curves == "effective":
        frame = frame.drop(columns=["curve"])
    else:
        kind = "smile-curves"
    print(f"smile: {len(run.strikes)} strike(s), styles {[s.value for s in run.styles]}, {len(frame)} row(s)")
    if out:
        write_csv(frame, out, kind)
    return frame


def _analytic_vol(run: RunConfig, style: CapletStyle, strike: float) -> Optional[float]:
    spec = run.caplet(style, strike)
    if style is CapletStyle.BACKWARD:
        return price_backward_caplet(spec, run.params, run.q).implied_vol
    return price_forward_caplet(spec, run.params).implied_vol


def cmd_simulate(run: RunConfig, out: Optional[str] = None, path_dump: Optional[str] = None) -> pd.DataFrame:
    """Monte-Carlo smile against the analytic effective-parameter smile."""
    started = time.time()
    paths = simulate_paths(run.params, run.period, run.q, run.mc, run.forward_rate)
    frames = []
    verdicts = []
    worst = 0.0
    for style in run.styles:
        smile = mc_caplet_smile(
            run.params, run.period, run.q, run.strikes, run.mc, style, discount=run.discount, paths=paths
        )
        analytic = [_analytic_vol(run, style, k) for k in run.strikes]
        analytic = np.array([np.nan if v is None else v for v in analytic])
        agreement = smile_agreement(smile, np.where(np.isnan(analytic), smile.implied_vols, analytic))
        gaps = smile.implied_vols - analytic
        tolerances = 3.0 * smile.vol_std_errors + 0.003
        usable = ~(np.isnan(gaps) | np.isnan(tolerances))
        within = np.where(usable, np.abs(np.nan_to_num(gaps)) <= np.nan_to_num(tolerances), False)
        if usable.any():
            worst = max(worst, float(np.max(np.abs(gaps[usable]) / tolerances[usable])))
        verdicts.append(agreement.verdict)
        frames.append(
            pd.DataFrame(
                {
                    "strike": smile.strikes,
                    "style": style.value,
                    "mc_pv": smile.prices,
                    "mc_std_error": smile.std_errors,
                    "mc_implied_vol": smile.implied_vols,
                    "mc_vol_std_error": smile.vol_std_errors,
                    "analytic_vol": analytic,
                    "gap": gaps,
                    "within_tolerance": within,
                }
            )
        )
    frame = pd.concat(frames, ignore_index=True)
    frame["_order"] = frame["style"].map(lambda s: _style_order(CapletStyle(s)))
    frame = frame.sort_values(["strike", "_order"], kind="mergesort").drop(columns=["_order"]).reset_index(drop=True)

    verdict = "PASS" if all(v == "PASS" for v in verdicts) else "FAIL"
    print(f"simulated {paths.n_paths} paths in {format_duration(time.time() - started)}")
    if paths.absorbed:
        print(f"  {paths.absorbed} path(s) absorbed at zero")
    if run.period.tau0 >= 0 and len(run.styles) == 2:
        jensen = mc_jensen_gap(run.params, run.period, run.q, run.strikes, run.mc, discount=run.discount, paths=paths)
        violations = jensen.violations()
        print(f"  backward >= forward at every strike within 3 SE: {'yes' if not violations else violations}")
    print(f"summary: max |gap|/tolerance = {worst:.4f} verdict {verdict}")

    dump = None
    if paths.recorded_rates is not None:
        n, m = paths.recorded_rates.shape
        dump = pd.DataFrame(
            {
                "path": np.repeat(np.arange(n), m),
                "t": np.tile(paths.times, n),
                "rate": paths.recorded_rates.ravel(),
                "vol": paths.recorded_vols.ravel(),
            }
        )
    if out:
        write_csv(frame, out, "simulate")
    if dump is not None:
        target = path_dump or (os.path.splitext(out)[0] + "_paths.csv" if out else None)
        if target:
            write_csv(dump, target, "paths")
    return frame


def cmd_calibrate(run: RunConfig, quotes_path: str, out: Optional[str] = None) -> Dict[str, Any]:
    """Mark (alpha, rho, nu) to forward quotes, then q to the at-the-money backward quote."""
    quotes = build_quote_set(read_quotes(quotes_path), run)
    forward_idx = quotes.indices(CapletStyle.FORWARD)
    backward_idx = quotes.indices(CapletStyle.BACKWARD)
    initial = run.calibration_initial or run.params
    residual = ResidualKind(run.calibration_residual)
    beta = run.calibration_beta if run.calibration_beta is not None else run.params.beta

    report: Dict[str, Any] = {"converged": True}
    params, q = run.params, run.q
    if forward_idx:
        smile_fit = calibrate_forward_smile(quotes, beta, initial, residual)
        params = smile_fit.params
        report["forward_fit"] = _fit_summary(smile_fit)
        report["converged"] &= smile_fit.converged
        if backward_idx:
            q_fit = calibrate_q_from_quotes(quotes, params, run.q_bounds)
            q = q_fit.q
            report["q_fit"] = {"q": q, "capped": q_fit.capped, "residual": float(q_fit.residuals[0]), "message": q_fit.message}
            report["converged"] &= q_fit.converged
    elif backward_idx:
        if run.q is None:
            raise ConfigError(["backward-only quotes need q in the run configuration"])
        back_fit = calibrate_backward_smile(quotes, beta, initial, run.q, residual)
        params = back_fit.params
        report["backward_fit"] = _fit_summary(back_fit)
        report["converged"] &= back_fit.converged

    report["params"] = {"alpha": params.alpha, "beta": params.beta, "rho": params.rho, "nu": params.nu, "shift": params.shift}
    report["q"] = q

    rows = []
    for i, entry in enumerate(quotes.entries):
        model_vol = float("nan")
        if entry.style is CapletStyle.FORWARD:
            model_vol = hagan_implied_vol(quotes.period.tau0, entry.strike, quotes.forward_rate, params)
        elif q is not None:
            sabr = effective_params(params, quotes.period, q).as_sabr(params.beta, params.shift)
            model_vol = hagan_implied_vol(quotes.period.tau1, entry.strike, quotes.forward_rate, sabr)
        rows.append(
            {
                "strike": entry.strike,
                "style": entry.style.value,
                "quote_kind": entry.quote_kind.value,
                "quote_vol": float(quotes.implied_vols[i]),
                "model_vol": model_vol,
                "residual": model_vol - float(quotes.implied_vols[i]),
                "weight": entry.weight,
            }
        )
    frame = pd.DataFrame(rows)

    print("calibrated parameters")
    for key, value in report["params"].items():
        print(f"  {key:<6} {value:.10g}")
    if q is not None:
        print(f"  q      {q:.10g}" + (" (capped)" if report.get("q_fit", {}).get("capped") else ""))
    print("residuals (model - quote, implied vol)")
    for row in rows:
        print(f"  {row['style']:<8} K={row['strike']:.6g} quote={row['quote_vol']:.8f} model={_fmt(row['model_vol'], 8)}")
    print(f"converged: {report['converged']}")
    if out:
        write_csv(frame, out, "calibration")
    report["residuals"] = rows
    return report


def _fit_summary(result) -> Dict[str, Any]:
    return {
        "objective": result.objective,
        "initial_objective": result.initial_objective,
        "iterations": result.iterations,
        "converged": result.converged,
        "message": result.message,
    }


def cmd_hw_compare(run: RunConfig, out: Optional[str] = None) -> pd.DataFrame:
    """Tabulate psi against the Hull-White decay psi_tilde on [tau0, tau1]."""
    grid = decay_grid(run.period, run.hw_n_points)
    report = decay_shape_report(run.hw_kappa, run.q, run.period, grid)
    frame = pd.DataFrame({"t": report.times, "psi": report.psi, "psi_tilde": report.psi_tilde, "gap": report.gap})
    spec = HullWhiteDecaySpec(kappa=run.hw_kappa, period=run.period, xi=run.hw_xi)
    print(f"kappa={_fmt(run.hw_kappa)} against q={_fmt(run.q)} on [{_fmt(run.period.tau0)}, {_fmt(run.period.tau1)}]")
    print(f"  max |psi - psi_tilde| = {report.max_abs_gap:.3e}")
    print(f"  curvature: psi {report.psi_curvature}, psi_tilde {report.psi_tilde_curvature}")
    print(f"  least-squares q for this kappa (diagnostic): {fit_decay_exponent(run.hw_kappa, run.period):.6g}")
    if run.period.tau0 > 0:
        print(f"  term-rate normal vol at t=0: {term_rate_volatility(0.0, spec):.6g}")
    if out:
        write_csv(frame, out, "hw-compare")
    return frame


def _error_kind(error: Exception) -> str:
    for cls, name in (
        (QuoteFileError, "quote_file_error"),
        (ConfigError, "config_error"),
        (BracketError, "bracket_error"),
        (CalibrationError, "calibration_error"),
        (QuadratureError, "quadrature_error"),
        (DomainError, "domain_error"),
    ):
        if isinstance(error, cls):
            return name
    return "error"


def report_error(error: Exception, stream=None) -> None:
    messages: List[str] = getattr(error, "messages", None) or [str(error)]
    payload: Dict[str, Any] = {"error": _error_kind(error), "messages": messages}
    if getattr(error, "rows", None):
        payload["rows"] = error.rows
    print(json.dumps(payload), file=stream or sys.stderr)


def apply_overrides(run: RunConfig, seed: Optional[int] = None, paths: Optional[int] = None) -> RunConfig:
    """Command-line --seed and --paths take precedence over the run configuration."""
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if paths is not None:
        changes["n_paths"] = paths
    if not changes:
        return run
    mc = McConfig.from_settings(**{**asdict(run.mc), **changes})
    problems = mc.violations(run.period)
    if problems:
        raise ConfigError(problems)
    return replace(run, mc=mc)


def dispatch(args) -> int:
    """Run one command; returns the process exit code."""
    try:
        run = load_run_config(args.config, require_q=args.command not in COMMANDS_WITHOUT_Q)
        run = apply_overrides(run, getattr(args, "seed", None), getattr(args, "paths", None))
        if args.command == "price":
            cmd_price(run, args.out)
        elif args.command == "effective-params":
            cmd_effective_params(run, args.out)
        elif args.command == "smile":
            cmd_smile(run, args.out, args.curves)
        elif args.command == "simulate":
            cmd_simulate(run, args.out, args.path_dump)
        elif args.command == "calibrate":
            if not args.quotes:
                raise ConfigError(["calibrate needs --quotes <file>"])
            report = cmd_calibrate(run, args.quotes, args.out)
            if not report["converged"]:
                return EXIT_NUMERICAL
        elif args.command == "hw-compare":
            cmd_hw_compare(run, args.out)
        else:
            raise ConfigError([f"unknown command {args.command!r}"])
    except (ConfigError, DomainError) as e:
        logger.error(f"{args.command} failed: {e}")
        report_error(e)
        return EXIT_CONFIG
    except RfrSabrError as e:
        logger.error(f"{args.command} failed: {e}")
        report_error(e)
        return EXIT_NUMERICAL
    return EXIT_OK
