"""Numerical self-checks of the rate objects on random instances."""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from dynamics.rates import (
    IdentityCheck,
    PiecewiseLinearPath,
    RateProfile,
    check_eq37_identity,
    path_rate_I,
    variational_minimum,
)


logger = logging.getLogger(__name__)

IDENTITY_TOLERANCE = 1e-8
EXTREMAL_TOLERANCE = 1e-6
UNDERCUT_TOLERANCE = 1e-8


def identity_suite(profile: RateProfile, rng: np.random.Generator, samples: int = 10) -> List[IdentityCheck]:
    """Time-domain against density-domain weighted variance at random levels."""
    model = profile.model
    top = float(profile.fluid.values[-1])
    radii = model.start + (top - model.start) * (1.0 - rng.random(samples))
    checks = [check_eq37_identity(profile, float(r)) for r in np.sort(radii)]
    worst = max(check.relerr for check in checks)
    level = logging.INFO if worst <= IDENTITY_TOLERANCE else logging.WARNING
    logger.log(level, f"Weighted-variance identity on {samples} levels of {model.label}: worst relerr {worst:.3e}")
    return checks


@dataclass(frozen=True)
class VariationalCheck:
    T: float
    a: float
    minimum: float
    extremal_rate: float
    smallest_perturbed: float

    @property
    def extremal_relerr(self) -> float:
        return abs(self.extremal_rate - self.minimum) / self.minimum

    @property
    def undercut(self) -> float:
        """How far the best perturbed path falls below the minimum, relative."""
        return max(0.0, (self.minimum - self.smallest_perturbed) / self.minimum)

    @property
    def passed(self) -> bool:
        return self.extremal_relerr <= EXTREMAL_TOLERANCE and self.undercut <= UNDERCUT_TOLERANCE


def perturbed_paths(extremal: PiecewiseLinearPath, rng: np.random.Generator, count: int) -> List[PiecewiseLinearPath]:
    """Random smooth bumps vanishing at both ends added to the extremal."""
    times = extremal.times
    end = extremal.end
    scale = max(abs(extremal.values[-1]), 1e-3)
    paths = []
    for _ in range(count):
        modes = rng.integers(1, 6)
        amplitudes = scale * rng.normal(0.0, 0.2, modes)
        bump = sum(amp * np.sin((k + 1) * np.pi * times / end) for k, amp in enumerate(amplitudes))
        paths.append(PiecewiseLinearPath(times, extremal.values + bump))
    return paths


def variational_suite(
    profile: RateProfile,
    rng: np.random.Generator,
    samples: int = 20,
    perturbed: int = 50,
) -> List[VariationalCheck]:
    """
    For random (T, a): the extremal attains the closed-form minimum and no
    perturbed path with the same endpoints does better.
    """
    checks = []
    for _ in range(samples):
        T = float(profile.horizon * (0.05 + 0.95 * rng.random()))
        a = float(rng.uniform(-2.0, 2.0))
        if abs(a) < 1e-3:
            a = 1.0
        result = variational_minimum(profile, T, a)
        rates = [path_rate_I(profile, path, T) for path in perturbed_paths(result.extremal, rng, perturbed)]
        checks.append(VariationalCheck(
            T=T,
            a=a,
            minimum=result.value,
            extremal_rate=path_rate_I(profile, result.extremal, T),
            smallest_perturbed=min(rates),
        ))
    failures = sum(not check.passed for check in checks)
    if failures:
        logger.warning(f"Variational suite for {profile.model.label}: {failures} of {samples} instances failed")
    else:
        logger.info(f"Variational suite for {profile.model.label}: {samples} instances passed")
    return checks
