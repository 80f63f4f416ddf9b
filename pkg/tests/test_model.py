"""Tests for model definitions, validation and coefficients."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from dynamics.model import (
    Domain,
    beta_of_u,
    birth_death,
    build_model,
    drift,
    lattice_unit,
    lipschitz_constant,
    sis,
    x_infinity,
)
from utils.errors import (
    InvalidDomain,
    NegativeRate,
    NonpositiveStartDrift,
    NonzeroAtOrigin,
    OutOfDomain,
)


class TestCoefficients:

    def test_birth_death_drift(self, bd):
        assert drift(bd, 1.0) == pytest.approx(0.1, rel=1e-14)
        assert drift(bd, 2.0) == pytest.approx(0.2, rel=1e-14)

    def test_sis_drift(self, sis_model):
        assert drift(sis_model, 0.5) == pytest.approx(0.25, rel=1e-14)
        assert drift(sis_model, 0.6) == pytest.approx(0.12, rel=1e-12)

    def test_beta(self, bd, sis_model):
        assert beta_of_u(bd, 1.0) == pytest.approx(2.1, rel=1e-14)
        assert beta_of_u(sis_model, 0.5) == pytest.approx(1.25, rel=1e-14)

    def test_outside_domain(self, sis_model):
        with pytest.raises(OutOfDomain):
            drift(sis_model, 1.5)
        with pytest.raises(OutOfDomain):
            beta_of_u(sis_model, -0.1)

    @given(st.floats(min_value=0.0, max_value=100.0))
    @settings(max_examples=50, deadline=None)
    def test_birth_death_drift_is_linear(self, u):
        model = birth_death(1.1, 1.0, 1.0)
        assert drift(model, u) == pytest.approx(0.1 * u, rel=1e-12, abs=1e-14)
        assert beta_of_u(model, u) == pytest.approx(2.1 * u, rel=1e-12, abs=1e-14)

    def test_vectorised(self, bd):
        u = np.linspace(0.0, 3.0, 7)
        np.testing.assert_allclose(bd.drift(u), 0.1 * u, atol=1e-15)

    def test_lipschitz_constant(self, bd):
        # 2 reactions, max |l| = 1, max |F'| = 1.1
        assert lipschitz_constant(bd) == pytest.approx(2.2)


class TestXInfinity:

    def test_unbounded_supercritical(self, bd):
        assert x_infinity(bd) == math.inf

    def test_sis_equilibrium(self, sis_model):
        assert x_infinity(sis_model) == pytest.approx(2.0 / 3.0, abs=1e-10)

    @pytest.mark.parametrize("lam", [2.5, 3.0, 5.0])
    def test_sis_family(self, lam):
        assert x_infinity(sis(lam, 1.0, 0.5)) == pytest.approx(1.0 - 1.0 / lam, abs=1e-10)


class TestValidation:

    def test_nonpositive_start_drift(self):
        with pytest.raises(NonpositiveStartDrift):
            birth_death(1.0, 1.1, 1.0)

    def test_start_outside_domain(self):
        with pytest.raises(OutOfDomain):
            sis(3.0, 1.0, 1.5)

    def test_empty_domain(self):
        with pytest.raises(InvalidDomain):
            Domain(1.0, 0.0)

    def test_nonzero_at_origin(self):
        raw = {
            "model": "custom", "x": 0.5, "jumps": [1.0], "domain": [0.0, 2.0],
            "tables": [{"u": [0.0, 1.0, 2.0], "f": [1.0, 2.0, 3.0]}],
        }
        with pytest.raises(NonzeroAtOrigin):
            build_model(raw)

    def test_negative_rate(self):
        raw = {
            "model": "custom", "x": 0.5, "jumps": [1.0, -1.0], "domain": [0.0, 2.0],
            "tables": [
                {"u": [0.0, 1.0, 2.0], "f": [0.0, 1.0, 2.0]},
                {"u": [0.0, 1.0, 2.0], "f": [0.0, -0.5, 0.0]},
            ],
        }
        with pytest.raises(NegativeRate):
            build_model(raw)

    def test_missing_parameters(self):
        with pytest.raises(ValidationError):
            build_model({"model": "sis", "lambda": 3.0, "x": 0.5})


class TestBuildModel:

    def test_builtin_families(self):
        model = build_model({"model": "birth_death", "lambda": 1.1, "theta": 1.0, "x": 1.0})
        assert model.label == "birth_death"
        assert model.parameters == {"lambda": 1.1, "theta": 1.0, "x": 1.0}

        yule = build_model({"model": "pure_birth", "lambda": 2.0, "x": 1.0})
        assert yule.jumps == (1.0,)
        assert drift(yule, 1.5) == pytest.approx(3.0)

    def test_custom_tabulated_model(self):
        u = np.linspace(0.0, 1.0, 21)
        raw = {
            "model": "custom", "x": 0.5, "jumps": [1.0, -1.0], "domain": [0.0, 1.0],
            "tables": [{"u": u.tolist(), "f": (3.0 * u * (1 - u)).tolist()}, {"u": u.tolist(), "f": u.tolist()}],
            "label": "tabulated_sis",
        }
        model = build_model(raw)
        assert model.label == "tabulated_sis"
        assert drift(model, 0.5) == pytest.approx(0.25, abs=1e-3)
        assert model.kernel_tables is not None

    def test_models_are_hashable(self, bd):
        # caches key on the model
        assert {bd: "cached"}[bd] == "cached"
        assert x_infinity(bd) is x_infinity(bd)

    def test_with_start(self, bd):
        restarted = bd.with_start(1.5)
        assert restarted.start == 1.5
        assert restarted.parameters["x"] == 1.5
        assert bd.start == 1.0


class TestLattice:

    def test_unit_jumps(self):
        unit, steps = lattice_unit([1.0, -1.0])
        assert unit == 1.0
        assert steps.tolist() == [1, -1]

    def test_fractional_jumps(self):
        unit, steps = lattice_unit([0.5, -1.5])
        assert unit == 0.5
        assert steps.tolist() == [1, -3]

    def test_incommensurate(self):
        with pytest.raises(ValueError):
            lattice_unit([1.0, math.sqrt(2.0)])
