"""Hand-derived oracles for the aggregate optimality conditions."""

import numpy as np
import pytest

from prefbounds.aggregation import (AggregateObs, PreferenceTheta,
                                    euler_moment, habit_growth_mu,
                                    intratemporal_equality,
                                    intratemporal_moment, xi_consumption,
                                    xi_labor)
from prefbounds.errors import DomainError, ValidationError


def theta(**kw):
    base = dict(omega=2.0, eta=1.0, h=0.5, beta=0.97)
    base.update(kw)
    return PreferenceTheta(**base)


def obs(**kw):
    base = dict(C_prev=1.0, C_t=1.0, C_next=1.0, R_next=1.0,
                var_share_t=0.0, var_share_next=0.0)
    base.update(kw)
    return AggregateObs(**base)


class TestValidation:
    def test_rejects_nonpositive_omega(self):
        with pytest.raises(ValidationError):
            PreferenceTheta(omega=0.0, eta=1.0, h=0.0, beta=0.97)

    def test_rejects_habit_of_one(self):
        with pytest.raises(ValidationError):
            PreferenceTheta(omega=1.0, eta=1.0, h=1.0, beta=0.97)

    def test_rejects_beta_outside_unit_interval(self):
        with pytest.raises(ValidationError):
            PreferenceTheta(omega=1.0, eta=1.0, h=0.0, beta=1.0)


class TestConsumptionResidual:
    def test_no_dispersion_gives_unit_residual(self):
        assert xi_consumption(theta(), 1.0, 1.0, 0.0) == pytest.approx(1.0)

    def test_hand_value_with_habit(self):
        # omega=2, h=0.5, flat consumption: 1 + 3 * (1 - 0.5)^-2 * 0.1
        # = 1 + 3 * 4 * 0.1 = 2.2
        assert xi_consumption(theta(), 1.0, 1.0, 0.1) == pytest.approx(2.2)

    def test_log_utility_no_habit(self):
        # omega=1, h=0: 1 + 1 * 0.25 = 1.25
        t = theta(omega=1.0, h=0.0)
        assert xi_consumption(t, 1.0, 1.0, 0.25) == pytest.approx(1.25)

    def test_labor_residual_coefficient(self):
        # omega(eta+omega)/(2 eta^2) = 2*3/2 = 3 at omega=2, eta=1, h=0
        t = theta(h=0.0)
        assert xi_labor(t, 1.0, 1.0, 0.1) == pytest.approx(1.3)

    def test_habit_level_must_stay_positive(self):
        with pytest.raises(DomainError):
            xi_consumption(theta(h=0.9), C_t=1.0, C_prev=2.0,
                           var_share_t=0.1)


class TestEulerMoment:
    def test_flat_path_reduces_to_one_minus_beta_r(self):
        t = theta(h=0.0)
        got = euler_moment(t, obs(R_next=1.02))
        assert got == pytest.approx(1.0 - 0.97 * 1.02)

    def test_positive_wedge_for_low_return(self):
        assert euler_moment(theta(), obs(R_next=1.0)) > 0.0

    def test_habit_growth_hand_value(self):
        # growth (1.05 - 0.5)/(1 - 0.5) = 1.1, mu = 1.1^-2
        got = habit_growth_mu(theta(), C_prev=1.0, C_t=1.0, C_next=1.05)
        assert got == pytest.approx(1.1 ** -2.0)


class TestIntratemporal:
    def test_equality_zero_on_flat_frictionless_path(self):
        got = intratemporal_equality(theta(h=0.0), obs())
        assert got == pytest.approx(0.0, abs=1e-14)

    def test_moment_matches_euler_structure_when_flat(self):
        t = theta(h=0.0)
        got = intratemporal_moment(t, obs(R_next=1.02))
        assert got == pytest.approx(1.0 - 0.97 * 1.02)

    def test_wage_growth_moves_equality(self):
        t = theta(h=0.0)
        a = intratemporal_equality(t, obs())
        b = intratemporal_equality(t, obs(W_t=1.0, W_next=1.1))
        assert a != pytest.approx(b)
