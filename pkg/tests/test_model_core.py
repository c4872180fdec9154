import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfrsabr.errors import DomainError
from rfrsabr.model_core import (
    AccrualPeriod,
    CapletSpec,
    CapletStyle,
    DecayExponent,
    SabrParams,
    decay_speed,
    ensure_valid,
    psi,
    validate,
)


def test_psi_boundaries_and_midpoint(study_period):
    assert psi(0.5, study_period, 1.0) == 1.0
    assert psi(1.0, study_period, 1.0) == 0.0
    assert psi(0.75, study_period, 1.0) == pytest.approx(0.5, abs=1e-15)


def test_psi_is_one_before_the_period(study_period):
    times = np.linspace(-1.0, 0.5, 7)
    np.testing.assert_array_equal(psi(times, study_period, 3.0), np.ones(7))


def test_psi_rejects_times_after_tau1(study_period):
    with pytest.raises(DomainError):
        psi(1.01, study_period, 1.0)


def test_psi_rejects_empty_period():
    with pytest.raises(DomainError):
        psi(0.0, AccrualPeriod(1.0, 1.0), 1.0)


@settings(max_examples=60, deadline=None)
@given(
    q=st.floats(min_value=0.01, max_value=50.0),
    tau0=st.floats(min_value=-2.0, max_value=2.0),
    length=st.floats(min_value=0.05, max_value=3.0),
)
def test_psi_decays_monotonically_inside_the_period(q, tau0, length):
    period = AccrualPeriod(tau0, tau0 + length)
    values = psi(np.linspace(tau0, tau0 + length, 50), period, q)
    assert np.all(np.diff(values) <= 0)
    assert values[0] == pytest.approx(1.0, abs=1e-12)
    assert values[-1] == 0.0


@pytest.mark.parametrize("tau0,tau1", [(0.5, 1.0), (-0.2, 0.3), (0.0, 2.0)])
@pytest.mark.parametrize("q", [0.3, 0.7, 1.0, 1.5, 4.0])
def test_psi_shape_follows_the_exponent(tau0, tau1, q):
    period = AccrualPeriod(tau0, tau1)
    curvature = np.diff(psi(np.linspace(max(0.0, tau0), tau1, 41), period, q), n=2)
    if q > 1:
        assert np.all(curvature >= -1e-12)
    elif q < 1:
        assert np.all(curvature <= 1e-12)
    else:
        np.testing.assert_allclose(curvature, 0.0, atol=1e-12)


def test_psi_kinks_only_where_the_period_starts(study_period):
    times = np.linspace(0.0, 1.0, 21)
    curvature = np.diff(psi(times, study_period, 1.0), n=2)
    kinks = np.flatnonzero(np.abs(curvature) > 1e-12) + 1
    assert list(times[kinks]) == [0.5]


@pytest.mark.parametrize("q", [0.0, -1.0, float("inf"), float("nan")])
def test_decay_exponent_must_be_positive_and_finite(q):
    with pytest.raises(DomainError):
        DecayExponent(q)
    with pytest.raises(DomainError):
        decay_speed(q)


def test_decay_speed_accepts_wrapped_exponent():
    assert decay_speed(DecayExponent(2.5)) == 2.5


def test_study_inputs_are_valid(study_params, atm_backward):
    assert validate(study_params, atm_backward) == []
    ensure_valid(study_params, atm_backward)


def test_rho_out_of_range_is_reported(study_params):
    assert "rho out of [-1,1]" in validate(study_params.with_values(rho=1.5))


def test_negative_strike_without_shift_is_reported(study_params, atm_backward):
    problems = validate(study_params, atm_backward.with_strike(-0.01))
    assert "strike + shift <= 0" in problems


def test_shift_makes_negative_strike_valid(study_params, atm_backward):
    shifted = study_params.with_values(shift=0.02)
    assert validate(shifted, atm_backward.with_strike(-0.01)) == []


def test_every_violation_is_listed():
    params = SabrParams(alpha=-1.0, beta=2.0, rho=2.0, nu=-0.1)
    spec = CapletSpec(0.05, CapletStyle.BACKWARD, AccrualPeriod(1.0, 0.5), 1.5, 0.05)
    problems = validate(params, spec)
    assert len(problems) == 6
    with pytest.raises(DomainError, match="alpha must be > 0"):
        ensure_valid(params, spec)


def test_zero_length_period_allowed_on_request():
    period = AccrualPeriod(1.0, 1.0)
    assert period.violations() == ["tau0 must be < tau1"]
    assert period.violations(allow_zero_length=True) == []


def test_seasoned_flag():
    assert AccrualPeriod(-0.25, 0.25).seasoned
    assert not AccrualPeriod(0.0, 0.25).seasoned


def test_with_style_accepts_strings(atm_backward):
    assert atm_backward.with_style("forward").style is CapletStyle.FORWARD
