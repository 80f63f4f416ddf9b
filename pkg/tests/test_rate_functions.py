"""Tests for rate functions and the compiled piecewise-polynomial evaluation."""

import numpy as np
import pytest

from dynamics.rate_functions import CallableRate, PolynomialRate, TabulatedRate, pack_ppolys
from engines.kernels import evaluate_rates, ppoly_value


def test_polynomial_rate():
    rate = PolynomialRate([0.0, 3.0, -3.0])
    assert rate(0.5) == pytest.approx(0.75)
    assert rate.derivative(0.5) == pytest.approx(0.0)
    np.testing.assert_allclose(rate(np.array([0.0, 1.0])), [0.0, 0.0])


def test_tabulated_rate_is_monotone():
    u = np.array([0.0, 0.5, 1.0, 2.0])
    rate = TabulatedRate(u, [0.0, 1.0, 1.5, 1.6])
    grid = np.linspace(0.0, 2.0, 401)
    assert np.all(np.diff(rate(grid)) >= -1e-15)
    assert rate(0.5) == pytest.approx(1.0)


def test_tabulated_rate_rejects_bad_tables():
    with pytest.raises(ValueError):
        TabulatedRate([0.0, 0.0, 1.0], [0.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        TabulatedRate([0.0, 1.0], [0.0])


def test_callable_rate_numeric_derivative():
    rate = CallableRate(lambda u: u * u)
    assert not rate.analytic_derivative
    assert rate.derivative(1.5) == pytest.approx(3.0, rel=1e-8)
    assert rate.as_ppoly() is None
    assert pack_ppolys([rate]) is None


class TestKernelTables:

    def test_pack_shapes(self):
        tables = pack_ppolys([
            PolynomialRate([0.0, 1.1]),
            TabulatedRate([0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 4.0, 9.0]),
        ])
        breaks, coefficients, pieces = tables
        assert pieces.tolist() == [1, 3]
        assert breaks.shape == (2, 4)
        assert coefficients.shape == (2, 4, 3)

    @pytest.mark.parametrize("u", [0.0, 0.3, 1.0, 1.7, 2.5, 3.0, 4.5])
    def test_ppoly_value_matches_rates(self, u):
        rates = [
            PolynomialRate([0.0, 3.0, -3.0]),
            TabulatedRate([0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 4.0, 9.0]),
        ]
        breaks, coefficients, pieces = pack_ppolys(rates)
        for i, rate in enumerate(rates):
            assert ppoly_value(breaks, coefficients, pieces, i, u) == pytest.approx(float(rate(u)), abs=1e-12)

    def test_negative_rates_are_clamped(self):
        breaks, coefficients, pieces = pack_ppolys([PolynomialRate([0.0, 3.0, -3.0])])
        out = np.empty(1)
        # 3u(1-u) < 0 above u = 1
        assert evaluate_rates(breaks, coefficients, pieces, 1.5, out) == 1
        assert out[0] == 0.0
        assert evaluate_rates(breaks, coefficients, pieces, 0.5, out) == 0
        assert out[0] == pytest.approx(0.75)
