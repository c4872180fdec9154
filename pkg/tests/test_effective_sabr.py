import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfrsabr.black76 import black_price
from rfrsabr.effective_sabr import (
    EffectiveSabrParams,
    effective_params,
    effective_params_forward,
    effective_params_seasoned,
    effective_rho_bound,
    forward_intermediates,
    limit_q_to_infinity,
    limit_q_to_zero,
    original_params,
    piterbarg_alpha,
    rescale_time_to_exercise,
    scaling_reparameterization,
)
from rfrsabr.errors import DomainError
from rfrsabr.hagan_vol import hagan_implied_vol
from rfrsabr.model_core import AccrualPeriod, SabrParams


def test_study_triple(study_params, study_period):
    eff = effective_params(study_params, study_period, 1.0)
    assert eff.alpha_hat == pytest.approx(0.082, abs=5e-4)
    assert eff.rho_hat == pytest.approx(-0.503, abs=5e-4)
    assert eff.nu_hat == pytest.approx(0.411, abs=5e-4)
    assert eff.time_to_exercise == 1.0


def test_study_intermediates(study_params, study_period):
    mid = forward_intermediates(study_params, study_period, 1.0)
    assert mid.tau == 2.0
    assert mid.gamma == pytest.approx(1.800982, abs=1e-6)
    assert mid.H == pytest.approx(0.003033, abs=1e-6)
    eff = effective_params_forward(study_params, study_period, 1.0)
    assert eff.rho_hat == pytest.approx(-0.50298, abs=1e-5)
    assert eff.nu_hat == pytest.approx(0.41090, abs=1e-5)
    assert eff.alpha_hat == pytest.approx(0.081712, abs=1e-6)


def test_first_order_drops_exponential_factor(study_params, study_period):
    full = effective_params(study_params, study_period, 1.0)
    first = effective_params(study_params, study_period, 1.0, include_second_order=False)
    assert first.alpha_hat == pytest.approx(0.1 * math.sqrt(2.0 / 3.0), rel=1e-14)
    assert full.alpha_hat / first.alpha_hat == pytest.approx(math.exp(0.25 * 0.003033), abs=1e-7)
    assert (first.rho_hat, first.nu_hat) == (full.rho_hat, full.nu_hat)


def test_zero_length_period_is_standard_sabr(study_params):
    eff = effective_params(study_params, AccrualPeriod(0.7, 0.7), 3.0)
    assert eff.triple() == (study_params.alpha, study_params.rho, study_params.nu)


def test_short_period_approaches_standard_sabr(study_params):
    eff = effective_params(study_params, AccrualPeriod(1.0 - 1e-7, 1.0), 2.0)
    assert eff.alpha_hat == pytest.approx(study_params.alpha, rel=1e-6)
    assert eff.rho_hat == pytest.approx(study_params.rho, rel=1e-6)
    assert eff.nu_hat == pytest.approx(study_params.nu, rel=1e-6)


@pytest.mark.parametrize("q", [0.25, 1.0, 4.0])
@pytest.mark.parametrize("rho", [-0.9, 0.0, 0.6])
def test_branches_agree_at_period_start(q, rho, study_params):
    params = study_params.with_values(rho=rho)
    period = AccrualPeriod(0.0, 0.75)
    seasoned = effective_params_seasoned(params, period, q)
    forward = effective_params_forward(params, period, q)
    for a, b in zip(seasoned.triple(), forward.triple()):
        assert a == pytest.approx(b, rel=1e-12, abs=1e-15)


def test_branch_preconditions(study_params):
    with pytest.raises(DomainError):
        effective_params_seasoned(study_params, AccrualPeriod(0.1, 1.0), 1.0)
    with pytest.raises(DomainError):
        effective_params_forward(study_params, AccrualPeriod(-0.1, 1.0), 1.0)


def test_rescale_identity_and_price_invariance(study_params, study_period):
    eff = effective_params(study_params, study_period, 1.0)
    assert rescale_time_to_exercise(eff, 1.0) == eff
    for strike in (0.03, 0.05, 0.08):
        for new_expiry in (0.25, 2.0, 5.0):
            moved = rescale_time_to_exercise(eff, new_expiry)
            base = black_price(1.0, strike, 0.05, hagan_implied_vol(1.0, strike, 0.05, eff.as_sabr(1.0)))
            other = black_price(new_expiry, strike, 0.05, hagan_implied_vol(new_expiry, strike, 0.05, moved.as_sabr(1.0)))
            assert other == pytest.approx(base, abs=1e-10)


def test_q_to_infinity_limit(study_params, study_period):
    limit = limit_q_to_infinity(study_params, study_period)
    assert limit.alpha_hat == pytest.approx(study_params.alpha / math.sqrt(2.0), rel=1e-15)
    assert limit.nu_hat == pytest.approx(study_params.nu / math.sqrt(2.0), rel=1e-15)
    assert limit.rho_hat == study_params.rho
    back = rescale_time_to_exercise(limit, study_period.tau0)
    assert back.alpha_hat == pytest.approx(study_params.alpha, rel=1e-15)
    assert back.nu_hat == pytest.approx(study_params.nu, rel=1e-15)


def test_q_to_infinity_after_period_start_is_degenerate(study_params):
    limit = limit_q_to_infinity(study_params, AccrualPeriod(-0.2, 0.3))
    assert limit.degenerate
    assert limit.triple() == (0.0, 0.0, 0.0)


def test_q_to_zero_limit(study_params, study_period):
    assert limit_q_to_zero(study_params, study_period).triple() == (0.1, -0.5, 0.5)


@pytest.mark.parametrize("period", [AccrualPeriod(0.5, 1.0), AccrualPeriod(2.0, 2.25)])
def test_closed_form_approaches_limits(study_params, period):
    big = effective_params(study_params, period, 1e3)
    limit = limit_q_to_infinity(study_params, period)
    small = effective_params(study_params, period, 1e-6)
    for a, b in zip(big.triple(), limit.triple()):
        assert a == pytest.approx(b, rel=1e-3)
    for a, b in zip(small.triple(), (0.1, -0.5, 0.5)):
        assert a == pytest.approx(b, rel=1e-3)


def test_seasoned_small_q_is_identity(study_params):
    small = effective_params(study_params, AccrualPeriod(-0.25, 0.25), 1e-6)
    for a, b in zip(small.triple(), (0.1, -0.5, 0.5)):
        assert a == pytest.approx(b, rel=1e-3)


def test_scaling_reparameterization_example(study_params):
    scaled = scaling_reparameterization(study_params, AccrualPeriod(-0.5, 0.5), 1.0)
    assert scaled.alpha == pytest.approx(0.1 * math.sqrt(0.5) * 0.5, rel=1e-15)
    assert scaled.nu == pytest.approx(0.5 * math.sqrt(0.5), rel=1e-15)
    assert scaling_reparameterization(study_params, AccrualPeriod(0.0, 1.0), 2.0) == study_params


@pytest.mark.parametrize("tau0,tau1,q", [(-0.5, 0.5, 1.0), (-0.1, 0.4, 2.5), (-2.0, 0.25, 0.5)])
def test_scaling_property_maps_to_canonical_period(study_params, tau0, tau1, q):
    period = AccrualPeriod(tau0, tau1)
    original = rescale_time_to_exercise(effective_params(study_params, period, q), 1.0)
    canonical = effective_params(scaling_reparameterization(study_params, period, q), AccrualPeriod(0.0, 1.0), q)
    for a, b in zip(original.triple(), canonical.triple()):
        assert a == pytest.approx(b, rel=1e-12)


@pytest.mark.parametrize("tau0", [0.1, 0.5, 2.0])
def test_piterbarg_agreement(study_params, tau0):
    period = AccrualPeriod(tau0, tau0 + 0.5)
    eff = effective_params(study_params, period, 1.0, include_second_order=False)
    at_fixing = rescale_time_to_exercise(eff, tau0)
    assert at_fixing.alpha_hat == pytest.approx(piterbarg_alpha(study_params.alpha, period), rel=1e-12)


def test_piterbarg_examples():
    assert piterbarg_alpha(1.0, AccrualPeriod(0.5, 1.0)) == pytest.approx(math.sqrt(4.0 / 3.0), rel=1e-15)
    assert piterbarg_alpha(0.3, AccrualPeriod(1.0, 1.0)) == 0.3
    with pytest.raises(DomainError):
        piterbarg_alpha(0.3, AccrualPeriod(0.0, 1.0))


@settings(max_examples=80, deadline=None)
@given(
    rho=st.floats(min_value=-0.99, max_value=0.99),
    nu=st.floats(min_value=0.01, max_value=1.5),
    q=st.floats(min_value=0.05, max_value=20.0),
    tau0=st.floats(min_value=-1.0, max_value=3.0),
    length=st.floats(min_value=0.05, max_value=2.0),
)
def test_effective_triple_is_admissible(rho, nu, q, tau0, length):
    period = AccrualPeriod(tau0, tau0 + length)
    if period.tau1 < 1e-3:
        return
    eff = effective_params(SabrParams(0.2, 0.5, rho, nu), period, q)
    assert eff.alpha_hat > 0 and eff.nu_hat > 0
    assert abs(eff.rho_hat) <= effective_rho_bound(period, q) + 1e-12
    assert effective_rho_bound(period, q) <= 1.0 + 1e-12
    assert math.copysign(1.0, eff.rho_hat) == math.copysign(1.0, rho) or rho == 0


@pytest.mark.parametrize("tau0,tau1", [(0.5, 1.0), (-0.3, 0.2), (0.0, 1.0), (3.0, 3.25)])
@pytest.mark.parametrize("rho", [-0.8, -0.2, 0.0, 0.7])
def test_original_params_inverts_effective(tau0, tau1, rho):
    params = SabrParams(alpha=0.07, beta=0.7, rho=rho, nu=0.6)
    period = AccrualPeriod(tau0, tau1)
    eff = effective_params(params, period, 1.5)
    recovered = original_params(eff, 0.7, period, 1.5)
    assert recovered.alpha == pytest.approx(params.alpha, rel=1e-10)
    assert recovered.rho == pytest.approx(params.rho, abs=1e-10)
    assert recovered.nu == pytest.approx(params.nu, rel=1e-10)


def test_original_params_accepts_any_quoting_time(study_params, study_period):
    eff = rescale_time_to_exercise(effective_params(study_params, study_period, 1.0), 0.5)
    recovered = original_params(eff, 1.0, study_period, 1.0)
    assert recovered.alpha == pytest.approx(0.1, rel=1e-10)


def test_original_params_rejects_unattainable_correlation(study_period):
    bound = effective_rho_bound(study_period, 1.0)
    assert bound < 1.0
    eff = EffectiveSabrParams(0.08, -(bound + 1e-4), 0.4, 1.0)
    with pytest.raises(DomainError):
        original_params(eff, 1.0, study_period, 1.0)


def test_original_params_rejects_degenerate_triple(study_params):
    period = AccrualPeriod(-0.2, 0.3)
    with pytest.raises(DomainError):
        original_params(limit_q_to_infinity(study_params, period), 1.0, period, 1.0)


def test_alpha_hat_decreases_as_period_seasons(study_params):
    alphas = [
        effective_params(study_params, AccrualPeriod(tau0, tau0 + 0.5), 1.0).alpha_hat
        for tau0 in np.linspace(0.0, -0.495, 25)
    ]
    assert np.all(np.diff(alphas) < 0)
    assert alphas[-1] < 0.1 * alphas[0]


@pytest.mark.parametrize("tau0", np.linspace(0.0, 5.0, 11))
def test_effective_ratios_over_fixing_dates(study_params, tau0):
    eff = effective_params(study_params, AccrualPeriod(float(tau0), float(tau0) + 0.5), 1.0)
    assert 0 < eff.alpha_hat / study_params.alpha <= 1
    assert 0 < eff.nu_hat / study_params.nu <= 1
    assert 0.95 <= eff.rho_hat / study_params.rho <= 1.05
