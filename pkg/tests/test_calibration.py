import logging

import numpy as np
import pytest

from rfrsabr.black76 import black_price
from rfrsabr.calibration import (
    QuoteEntry,
    QuoteKind,
    QuoteSet,
    ResidualKind,
    calibrate_backward_smile,
    calibrate_forward_smile,
    calibrate_q_from_quotes,
    calibrate_q_to_atm_backward,
)
from rfrsabr.effective_sabr import effective_params
from rfrsabr.errors import BracketError, CalibrationError, PriceBoundsError, QuoteFileError
from rfrsabr.hagan_vol import hagan_implied_vol
from rfrsabr.model_core import AccrualPeriod, CapletSpec, CapletStyle, SabrParams
from rfrsabr.pricer import price_backward_caplet, price_forward_caplet

STRIKES = (0.03, 0.04, 0.05, 0.06, 0.08)
TRUE = SabrParams(alpha=0.1, beta=1.0, rho=-0.5, nu=0.5)


def forward_quotes(period, params=TRUE, kind=QuoteKind.IMPLIED_VOL):
    entries = []
    for k in STRIKES:
        vol = hagan_implied_vol(period.tau0, k, 0.05, params)
        value = vol if kind is QuoteKind.IMPLIED_VOL else black_price(period.tau0, k, 0.05, vol)
        entries.append(QuoteEntry(k, CapletStyle.FORWARD, kind, value))
    return QuoteSet(entries, period, 0.05)


def backward_quotes(period, q, params=TRUE):
    sabr = effective_params(params, period, q).as_sabr(params.beta)
    entries = [
        QuoteEntry(k, CapletStyle.BACKWARD, QuoteKind.IMPLIED_VOL, hagan_implied_vol(period.tau1, k, 0.05, sabr))
        for k in STRIKES
    ]
    return QuoteSet(entries, period, 0.05)


def assert_recovered(found, expected, rel):
    assert found.alpha == pytest.approx(expected.alpha, rel=rel)
    assert found.rho == pytest.approx(expected.rho, rel=rel)
    assert found.nu == pytest.approx(expected.nu, rel=rel)


def test_forward_smile_round_trip(study_period):
    result = calibrate_forward_smile(forward_quotes(study_period), 1.0, SabrParams(0.1, 1.0, -0.5, 0.5))
    assert result.converged
    assert_recovered(result.params, TRUE, 1e-6)
    assert np.max(np.abs(result.residuals)) < 1e-8


def test_forward_smile_from_perturbed_start(study_period):
    start = SabrParams(alpha=0.15, beta=0.3, rho=0.0, nu=0.9)
    result = calibrate_forward_smile(forward_quotes(study_period), 1.0, start)
    assert result.params.beta == 1.0
    assert result.objective < result.initial_objective
    assert_recovered(result.params, TRUE, 1e-6)


def test_forward_smile_on_present_values(study_period):
    quotes = forward_quotes(study_period, kind=QuoteKind.PV)
    start = SabrParams(alpha=0.12, beta=1.0, rho=-0.3, nu=0.6)
    result = calibrate_forward_smile(quotes, 1.0, start, residual=ResidualKind.PV)
    assert_recovered(result.params, TRUE, 1e-5)


def test_atm_alpha_with_rho_and_nu_fixed(study_period):
    vol = hagan_implied_vol(0.5, 0.05, 0.05, TRUE)
    quotes = QuoteSet([QuoteEntry(0.05, CapletStyle.FORWARD, QuoteKind.IMPLIED_VOL, vol)], study_period, 0.05)
    start = SabrParams(alpha=0.2, beta=1.0, rho=-0.5, nu=0.5)
    result = calibrate_forward_smile(quotes, 1.0, start, fixed=("rho", "nu"))
    assert result.params.alpha == pytest.approx(0.1, rel=1e-8)
    assert (result.params.rho, result.params.nu) == (-0.5, 0.5)


def test_fit_argument_checks(study_period):
    quotes = forward_quotes(study_period)
    with pytest.raises(CalibrationError, match="fixed"):
        calibrate_forward_smile(quotes, 1.0, TRUE, fixed=("beta",))
    with pytest.raises(CalibrationError):
        calibrate_forward_smile(quotes, 1.0, TRUE, fixed=("alpha", "rho", "nu"))
    with pytest.raises(CalibrationError):
        calibrate_backward_smile(quotes, 1.0, TRUE, 1.0)
    seasoned = forward_quotes(study_period)
    seasoned.period = AccrualPeriod(-0.1, 0.4)
    with pytest.raises(CalibrationError):
        calibrate_forward_smile(seasoned, 1.0, TRUE)


def test_backward_smile_round_trip(study_period):
    result = calibrate_backward_smile(backward_quotes(study_period, 1.0), 1.0, SabrParams(0.12, 1.0, -0.3, 0.6), 1.0)
    assert result.q == 1.0
    assert_recovered(result.params, TRUE, 1e-6)
    assert result.effective == effective_params(result.params, study_period, 1.0)


def test_q_round_trip(study_params, study_period):
    quote = price_backward_caplet(
        CapletSpec(0.05, CapletStyle.BACKWARD, study_period, 1.0, 0.05),
        study_params,
        1.0,
    ).present_value
    result = calibrate_q_to_atm_backward(quote, study_params, study_period, 0.05)
    assert result.converged and not result.capped
    assert result.q == pytest.approx(1.0, abs=1e-8)


def test_q_from_quote_set(study_params, study_period):
    quotes = backward_quotes(study_period, 2.5, study_params)
    result = calibrate_q_from_quotes(quotes, study_params)
    assert result.q == pytest.approx(2.5, rel=1e-8)
    assert result.effective.triple() == pytest.approx(effective_params(study_params, study_period, result.q).triple())


def test_forward_price_quote_caps_q(study_params, study_period, atm_forward):
    quote = price_forward_caplet(atm_forward, study_params).present_value
    result = calibrate_q_to_atm_backward(quote, study_params, study_period, 0.05)
    assert result.capped
    assert result.q == 1e3
    assert "capped" in result.message


def test_unattainable_quotes(study_params, study_period, atm_backward, atm_forward):
    at_floor = price_forward_caplet(atm_forward, study_params).present_value
    near_zero_q = price_backward_caplet(atm_backward, study_params, 1e-3).present_value
    with pytest.raises(BracketError):
        calibrate_q_to_atm_backward(0.5 * at_floor, study_params, study_period, 0.05)
    with pytest.raises(BracketError):
        calibrate_q_to_atm_backward(1.5 * near_zero_q, study_params, study_period, 0.05)
    with pytest.raises(PriceBoundsError):
        calibrate_q_to_atm_backward(0.06, study_params, study_period, 0.05)
    with pytest.raises(CalibrationError):
        calibrate_q_to_atm_backward(at_floor, study_params, study_period, 0.05, q_bounds=(2.0, 1.0))


def test_quote_set_converts_both_ways(study_period):
    vol_quotes = forward_quotes(study_period)
    pv_quotes = forward_quotes(study_period, kind=QuoteKind.PV)
    np.testing.assert_allclose(pv_quotes.implied_vols, vol_quotes.implied_vols, rtol=1e-9)
    np.testing.assert_allclose(vol_quotes.present_values, pv_quotes.present_values, rtol=1e-14)
    assert vol_quotes.atm_index(CapletStyle.FORWARD) == 2
    assert vol_quotes.expiry(CapletStyle.BACKWARD) == 1.0


def test_quote_set_reports_bad_entries(study_period):
    entries = [
        QuoteEntry(0.05, CapletStyle.FORWARD, QuoteKind.IMPLIED_VOL, 0.2),
        QuoteEntry(0.05, CapletStyle.FORWARD, QuoteKind.PV, 0.9),
        QuoteEntry(0.04, CapletStyle.FORWARD, QuoteKind.IMPLIED_VOL, -0.1),
    ]
    with pytest.raises(QuoteFileError) as info:
        QuoteSet(entries, study_period, 0.05)
    assert info.value.rows == [2, 3]


def test_quote_set_weights(study_period):
    zero = [QuoteEntry(0.05, CapletStyle.FORWARD, QuoteKind.IMPLIED_VOL, 0.2, 0.0)]
    with pytest.raises(QuoteFileError, match="zero"):
        QuoteSet(zero, study_period, 0.05)
    negative = [QuoteEntry(0.05, CapletStyle.FORWARD, QuoteKind.IMPLIED_VOL, 0.2, -1.0)]
    with pytest.raises(QuoteFileError) as info:
        QuoteSet(negative, study_period, 0.05)
    assert info.value.rows == [1]
    with pytest.raises(QuoteFileError):
        QuoteSet([], study_period, 0.05)


def doubled(params):
    return params.with_values(alpha=2.0 * params.alpha, rho=2.0 * params.rho, nu=2.0 * params.nu)


def test_forward_smile_optimum_survives_doubled_start(study_period):
    quotes = forward_quotes(study_period)
    near = calibrate_forward_smile(quotes, 1.0, TRUE)
    far = calibrate_forward_smile(quotes, 1.0, doubled(TRUE))
    assert far.params.alpha == pytest.approx(near.params.alpha, abs=1e-5)
    assert far.params.rho == pytest.approx(near.params.rho, abs=1e-5)
    assert far.params.nu == pytest.approx(near.params.nu, abs=1e-5)


def test_backward_smile_optimum_survives_doubled_start(study_period):
    quotes = backward_quotes(study_period, 1.0)
    near = calibrate_backward_smile(quotes, 1.0, TRUE, 1.0)
    far = calibrate_backward_smile(quotes, 1.0, doubled(TRUE), 1.0)
    assert far.params.alpha == pytest.approx(near.params.alpha, abs=1e-5)
    assert far.params.rho == pytest.approx(near.params.rho, abs=1e-5)
    assert far.params.nu == pytest.approx(near.params.nu, abs=1e-5)


def test_boundary_rho_start_is_moved_inside_and_logged(study_period, caplog):
    caplog.set_level(logging.DEBUG, logger="rfrsabr.calibration")
    start = TRUE.with_values(rho=-1.0)
    result = calibrate_forward_smile(forward_quotes(study_period), 1.0, start)
    assert any("initial rho -1.0 moved to" in r.getMessage() for r in caplog.records)
    assert_recovered(result.params, TRUE, 1e-6)
