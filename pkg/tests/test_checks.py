"""Tests for the randomised self-consistency suites."""

import numpy as np
import pytest

from dynamics.checks import identity_suite, perturbed_paths, variational_suite
from dynamics.rates import variational_minimum


@pytest.mark.parametrize("profile_name", ["bd_profile", "sis_profile"])
def test_identity_suite(request, profile_name):
    profile = request.getfixturevalue(profile_name)
    checks = identity_suite(profile, np.random.default_rng(11), samples=10)
    assert len(checks) == 10
    assert max(check.relerr for check in checks) <= 1e-8
    assert all(profile.model.start < check.r <= profile.fluid.values[-1] for check in checks)


def test_variational_suite_birth_death(bd_profile):
    checks = variational_suite(bd_profile, np.random.default_rng(3), samples=20, perturbed=50)
    assert len(checks) == 20
    for check in checks:
        assert check.extremal_relerr <= 1e-6
        assert check.undercut <= 1e-8
        assert check.passed


def test_variational_suite_sis(sis_profile):
    checks = variational_suite(sis_profile, np.random.default_rng(5), samples=5, perturbed=20)
    assert all(check.passed for check in checks)


def test_perturbed_paths_keep_endpoints(bd_profile):
    extremal = variational_minimum(bd_profile, 4.0, 1.2).extremal
    for path in perturbed_paths(extremal, np.random.default_rng(0), 10):
        assert path.value(0.0) == pytest.approx(0.0, abs=1e-15)
        assert path.value(4.0) == pytest.approx(1.2, abs=1e-12)
        assert not np.allclose(path.values, extremal.values)
