"""Tests for the worked-example closed forms and the SIS Xi audit."""

import logging
import math

import pytest
from scipy.integrate import quad

from dynamics.closed_forms import (
    audit_sis_xi,
    birth_death_rate,
    birth_death_tau,
    birth_death_variance,
    composite_variance,
    sis_rate,
    sis_tau,
    sis_variance,
    sis_xi_amended,
    sis_xi_printed,
)
from dynamics.fluid import tau_of_r
from dynamics.model import birth_death
from dynamics.rates import build_rate_profile, clt_variance


class TestBirthDeath:

    def test_values(self):
        assert birth_death_tau(1.1, 1.0, 2.0) == pytest.approx(6.931471805599453, rel=1e-12)
        assert birth_death_variance(1.1, 1.0, 2.0) == pytest.approx(1050.0, rel=1e-12)
        assert birth_death_rate(1.1, 1.0, 2.0, 1.0) == pytest.approx(1.0 / 2100.0, rel=1e-12)

    @pytest.mark.parametrize("x, r", [(0.5, 1.5), (1.0, 3.0), (2.0, 2.5)])
    def test_match_quadrature(self, x, r):
        model = birth_death(1.3, 0.8, x)
        profile = build_rate_profile(model, r)
        assert tau_of_r(model, r) == pytest.approx(birth_death_tau(1.3, 0.8, r, x), rel=1e-8)
        assert clt_variance(profile, r) == pytest.approx(birth_death_variance(1.3, 0.8, r, x), rel=1e-8)


class TestSis:

    def test_tau(self):
        assert sis_tau(3.0, 0.6) == pytest.approx(0.5 * math.log(3.0), rel=1e-12)

    def test_variance_value(self):
        assert sis_variance(3.0, 0.6) == pytest.approx(24.7265648, rel=1e-7)

    @pytest.mark.parametrize("r", [0.55, 0.6, 0.65])
    def test_variance_matches_quadrature(self, sis_profile, r):
        assert sis_variance(3.0, r) == pytest.approx(clt_variance(sis_profile, r), rel=1e-8)
        assert sis_rate(3.0, r, 1.0) == pytest.approx(0.5 / clt_variance(sis_profile, r), rel=1e-8)

    @pytest.mark.parametrize("lam, r", [(3.0, 0.6), (4.0, 0.7), (2.5, 0.55)])
    def test_amended_xi_integrates_squared_denominator(self, lam, r):
        c = lam - 1.0

        def integrand(u):
            w = c - lam * u
            return (w + 2.0) / (u * u * w * w)

        value, _ = quad(integrand, 0.5, r, epsabs=0.0, epsrel=1e-12)
        assert sis_xi_amended(lam, r) == pytest.approx(value, rel=1e-10)

    def test_amended_xi_is_not_scaled_variance(self):
        assert sis_xi_amended(3.0, 0.6) / 9.0 < 0.1 * sis_variance(3.0, 0.6)

    def test_printed_xi_differs_from_variance(self):
        assert sis_xi_printed(3.0, 0.6) / 9.0 != pytest.approx(sis_variance(3.0, 0.6), rel=1e-3)


class TestAudit:

    def test_rows(self, caplog):
        with caplog.at_level(logging.WARNING, logger="dynamics.closed_forms"):
            rows = audit_sis_xi(3.0, [0.55, 0.6, 0.65])
        assert [row.r for row in rows] == [0.55, 0.6, 0.65]
        for row in rows:
            assert row.refinement_relerr <= 1e-8
            assert row.quadrature_relerr <= 1e-8
            assert row.exact_relerr <= 1e-8
            assert row.printed_ratio != pytest.approx(1.0, rel=1e-6)
        assert "as printed" in caplog.text

    def test_composite_converges(self, sis_model):
        coarse = composite_variance(sis_model, 0.6, 50)
        fine = composite_variance(sis_model, 0.6, 400)
        assert fine == pytest.approx(sis_variance(3.0, 0.6), rel=1e-10)
        assert abs(coarse - fine) <= 1e-6 * fine
