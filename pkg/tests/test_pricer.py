import numpy as np
import pytest

from rfrsabr.black76 import black_price
from rfrsabr.effective_sabr import EffectiveSabrParams, effective_params, limit_q_to_infinity
from rfrsabr.errors import DomainError
from rfrsabr.hagan_vol import hagan_implied_vol
from rfrsabr.model_core import AccrualPeriod, CapletSpec, CapletStyle
from rfrsabr.pricer import (
    jensen_gap,
    price_backward_caplet,
    price_caplet,
    price_forward_caplet,
    strike_profile_violations,
)

ATM_STUDY_VOL = 0.1 * (1.0 + (-0.00625 + 1.25 / 24.0 * 0.25) * 0.5)


def test_forward_caplet_study_value(study_params, atm_forward):
    result = price_forward_caplet(atm_forward, study_params)
    assert result.implied_vol == pytest.approx(ATM_STUDY_VOL, abs=1e-15)
    assert result.present_value == pytest.approx(black_price(0.5, 0.05, 0.05, ATM_STUDY_VOL), rel=1e-13)
    assert result.time_to_exercise_quoted == 0.5
    assert result.style is CapletStyle.FORWARD


def test_fixed_forward_caplet_is_intrinsic(study_params):
    spec = CapletSpec(0.05, CapletStyle.FORWARD, AccrualPeriod(-0.1, 0.4), 0.99, 0.06)
    result = price_forward_caplet(spec, study_params)
    assert result.present_value == pytest.approx(0.0099, abs=1e-16)
    assert result.implied_vol is None


def test_far_strike_is_worthless(study_params, atm_forward, atm_backward):
    assert price_forward_caplet(atm_forward.with_strike(1.0), study_params).present_value < 1e-12
    assert price_backward_caplet(atm_backward.with_strike(1.0), study_params, 1.0).present_value < 1e-12


def test_backward_caplet_prices_at_effective_triple(study_params, atm_backward, study_period):
    result = price_backward_caplet(atm_backward, study_params, 1.0)
    eff = effective_params(study_params, study_period, 1.0)
    vol = hagan_implied_vol(1.0, 0.05, 0.05, eff.as_sabr(1.0))
    assert result.effective_params_used == eff
    assert result.implied_vol == pytest.approx(vol, rel=1e-15)
    assert result.present_value == pytest.approx(black_price(1.0, 0.05, 0.05, vol), rel=1e-14)
    assert result.time_to_exercise_quoted == 1.0


def test_backward_override_is_rescaled_to_tau1(study_params, atm_backward, study_period):
    eff = effective_params(study_params, study_period, 1.0)
    moved = EffectiveSabrParams(eff.alpha_hat * 2.0, eff.rho_hat, eff.nu_hat * 2.0, 0.25)
    a = price_backward_caplet(atm_backward, study_params, 1.0)
    b = price_backward_caplet(atm_backward, study_params, 1.0, effective=moved)
    assert b.present_value == pytest.approx(a.present_value, rel=1e-12)


def test_zero_length_period_matches_forward_pricing(study_params):
    period = AccrualPeriod(1.0, 1.0)
    backward = price_backward_caplet(CapletSpec(0.045, CapletStyle.BACKWARD, period, 0.97, 0.05), study_params, 2.0)
    expected_vol = hagan_implied_vol(1.0, 0.045, 0.05, study_params)
    assert backward.implied_vol == pytest.approx(expected_vol, rel=1e-15)


@pytest.mark.parametrize("strike", [0.04, 0.05, 0.065])
def test_backward_price_is_continuous_as_the_period_starts(study_params, strike):
    def pv(tau0):
        spec = CapletSpec(strike, CapletStyle.BACKWARD, AccrualPeriod(tau0, 1.0), 1.0, 0.05)
        return price_backward_caplet(spec, study_params, 1.0).present_value

    assert abs(pv(1e-6) - pv(-1e-6)) < 1e-8
    assert pv(0.0) == pytest.approx(pv(1e-6), abs=1e-8)


def test_short_period_converges_to_forward_caplet(study_params):
    period = AccrualPeriod(1.0 - 1e-8, 1.0)
    backward = price_backward_caplet(CapletSpec(0.05, CapletStyle.BACKWARD, period, 1.0, 0.05), study_params, 1.0)
    forward = price_forward_caplet(CapletSpec(0.05, CapletStyle.FORWARD, period, 1.0, 0.05), study_params)
    assert backward.present_value == pytest.approx(forward.present_value, rel=1e-6)


def test_infinite_decay_limit_gives_forward_price(study_params, atm_backward, atm_forward, study_period):
    limit = limit_q_to_infinity(study_params, study_period)
    backward = price_backward_caplet(atm_backward, study_params, 1.0, effective=limit)
    forward = price_forward_caplet(atm_forward, study_params)
    assert backward.present_value == pytest.approx(forward.present_value, abs=1e-10)
    assert jensen_gap(atm_backward, study_params, 1.0, effective=limit) == pytest.approx(0.0, abs=1e-10)


def test_seasoned_infinite_decay_is_intrinsic(study_params):
    period = AccrualPeriod(-0.2, 0.3)
    spec = CapletSpec(0.04, CapletStyle.BACKWARD, period, 0.98, 0.05)
    result = price_backward_caplet(spec, study_params, 1.0, effective=limit_q_to_infinity(study_params, period))
    assert result.present_value == pytest.approx(0.98 * 0.01, abs=1e-16)
    assert result.implied_vol is None


def test_jensen_gap_positive_for_study(study_params, atm_backward):
    assert jensen_gap(atm_backward, study_params, 1.0) > 0


def test_jensen_gap_vanishes_without_volatility(study_params, atm_backward):
    calm = study_params.with_values(alpha=1e-10, nu=0.0)
    itm = atm_backward.with_strike(0.04)
    assert jensen_gap(itm, calm, 1.0) == pytest.approx(0.0, abs=1e-14)


def test_jensen_gap_needs_unstarted_period(study_params):
    spec = CapletSpec(0.05, CapletStyle.BACKWARD, AccrualPeriod(-0.1, 0.4), 1.0, 0.05)
    with pytest.raises(DomainError):
        jensen_gap(spec, study_params, 1.0)


def test_price_caplet_dispatches_on_style(study_params, atm_backward, atm_forward):
    assert price_caplet(atm_forward, study_params) == price_forward_caplet(atm_forward, study_params)
    assert price_caplet(atm_backward, study_params, 1.0) == price_backward_caplet(atm_backward, study_params, 1.0)
    with pytest.raises(DomainError):
        price_caplet(atm_backward, study_params)


def test_style_mismatch_and_invalid_inputs(study_params, atm_backward, atm_forward):
    with pytest.raises(DomainError):
        price_forward_caplet(atm_backward, study_params)
    with pytest.raises(DomainError):
        price_backward_caplet(atm_backward.with_strike(-0.01), study_params, 1.0)


def test_discount_scales_present_value(study_params, study_period):
    spec = CapletSpec(0.05, CapletStyle.BACKWARD, study_period, 1.0, 0.05)
    full = price_backward_caplet(spec, study_params, 1.0).present_value
    half = price_backward_caplet(CapletSpec(0.05, CapletStyle.BACKWARD, study_period, 0.5, 0.05), study_params, 1.0)
    assert half.present_value == pytest.approx(0.5 * full, rel=1e-15)


def test_study_smile_is_clean(study_params, atm_backward, atm_forward):
    strikes = np.geomspace(0.025, 0.1, 11)
    backward = [price_backward_caplet(atm_backward.with_strike(k), study_params, 1.0).present_value for k in strikes]
    forward = [price_forward_caplet(atm_forward.with_strike(k), study_params).present_value for k in strikes]
    assert strike_profile_violations(strikes, backward) == []
    assert strike_profile_violations(strikes, forward) == []


def test_profile_violations_are_reported():
    problems = strike_profile_violations([0.01, 0.02, 0.03, 0.04], [0.03, 0.031, 0.015, 0.0])
    assert any("increases" in p for p in problems)
    assert any("convexity" in p for p in problems)
    with pytest.raises(DomainError):
        strike_profile_violations([0.02, 0.01], [0.1, 0.2])
