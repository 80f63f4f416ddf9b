"""Density-dependent Markov chain families: definition, validation, coefficients."""

import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from dynamics.rate_functions import (
    CallableRate,
    PolynomialRate,
    RateFunction,
    TabulatedRate,
    pack_ppolys,
)
from models.schemas import ModelConfig
from utils.errors import (
    InvalidDomain,
    NegativeRate,
    NonpositiveStartDrift,
    NonzeroAtOrigin,
    OutOfDomain,
    UnboundedDerivative,
)


logger = logging.getLogger(__name__)

DEFAULT_GRID_POINTS = 10_000
ORIGIN_TOLERANCE = 1e-12
ROOT_TOLERANCE = 1e-12
DOMAIN_SLACK = 1e-12


@dataclass(frozen=True)
class Domain:
    """Closed interval of valid densities; ``upper`` may be +inf."""

    lower: float
    upper: float = math.inf

    def __post_init__(self):
        if not (self.lower <= self.upper) or math.isnan(self.lower) or math.isnan(self.upper):
            raise InvalidDomain(
                f"domain [{self.lower}, {self.upper}] is empty",
                {"lower": self.lower, "upper": self.upper},
            )

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.upper)

    def contains(self, u: float) -> bool:
        return self.lower - DOMAIN_SLACK <= u <= self.upper + DOMAIN_SLACK

    def validation_grid(self, start: float, points: int) -> np.ndarray:
        """Grid on the domain; unbounded domains are checked up to ten start-widths."""
        upper = self.upper
        if not self.bounded:
            upper = self.lower + 10.0 * max(1.0, abs(start - self.lower))
        return np.linspace(self.lower, upper, points)


@dataclass(frozen=True)
class ModelSpec:
    """One density-dependent family: X jumps by l_i at rate n F_i(X/n)."""

    jumps: Tuple[float, ...]
    rates: Tuple[RateFunction, ...]
    start: float
    domain: Domain
    label: str = "custom"
    parameters: Dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def size(self) -> int:
        return len(self.jumps)

    def rate_values(self, u) -> np.ndarray:
        """Stacked F_i(u), shape (M,) + shape(u)."""
        return np.stack([np.asarray(rate(u), dtype=float) for rate in self.rates])

    def rate_derivatives(self, u) -> np.ndarray:
        return np.stack([np.asarray(rate.derivative(u), dtype=float) for rate in self.rates])

    def drift(self, u):
        """sum_i l_i F_i(u), vectorised, no domain check."""
        values = np.tensordot(self.jump_array, self.rate_values(u), axes=1)
        return values if np.ndim(values) else float(values)

    def beta(self, u):
        """sum_i l_i^2 F_i(u), vectorised, no domain check."""
        values = np.tensordot(self.jump_array ** 2, self.rate_values(u), axes=1)
        return values if np.ndim(values) else float(values)

    def drift_prime(self, u):
        """sum_i l_i F_i'(u)."""
        values = np.tensordot(self.jump_array, self.rate_derivatives(u), axes=1)
        return values if np.ndim(values) else float(values)

    @cached_property
    def jump_array(self) -> np.ndarray:
        return np.asarray(self.jumps, dtype=float)

    @cached_property
    def lattice(self) -> Tuple[float, np.ndarray]:
        """(unit, integer steps) with l_i = steps_i * unit."""
        return lattice_unit(self.jumps)

    @cached_property
    def kernel_tables(self):
        """Padded PPoly tables for the compiled engines, None for closures."""
        return pack_ppolys(self.rates)

    def with_start(self, start: float) -> "ModelSpec":
        """Same family restarted at another density (validated)."""
        restarted = replace(self, start=float(start), parameters={**self.parameters, "x": float(start)})
        validate_model(restarted)
        return restarted


def lattice_unit(jumps: Sequence[float], max_denominator: int = 1_000_000) -> Tuple[float, np.ndarray]:
    """
    Common lattice unit of the jump sizes.

    Args:
        jumps: Jump sizes l_i
        max_denominator: Largest denominator tried when rationalising a jump

    Returns:
        (unit, steps) where each jump equals steps[i] * unit exactly

    Raises:
        ValueError: If the jumps are not commensurate
    """
    fractions = []
    for jump in jumps:
        frac = Fraction(jump).limit_denominator(max_denominator)
        if frac == 0 or abs(float(frac) - jump) > 1e-12 * max(1.0, abs(jump)):
            raise ValueError(f"jump {jump} is zero or not on a rational lattice")
        fractions.append(frac)

    numerator = 0
    denominator = 1
    for frac in fractions:
        denominator = denominator * frac.denominator // math.gcd(denominator, frac.denominator)
    for frac in fractions:
        numerator = math.gcd(numerator, frac.numerator * (denominator // frac.denominator))
    unit = Fraction(numerator, denominator)
    steps = np.array([int(frac / unit) for frac in fractions], dtype=np.int64)
    return float(unit), steps


def validate_model(model: ModelSpec, grid_points: int = DEFAULT_GRID_POINTS) -> float:
    """
    Check the standing assumptions of a model on a validation grid.

    Args:
        model: The model to check
        grid_points: Number of grid points on the domain

    Returns:
        The numerically estimated sup over the grid of |F_i'|

    Raises:
        OutOfDomain, NonzeroAtOrigin, NegativeRate, UnboundedDerivative,
        NonpositiveStartDrift
    """
    if model.size < 1:
        raise ValueError("a model needs at least one reaction")
    if len(model.rates) != model.size:
        raise ValueError("jumps and rates must have the same length")
    if not model.domain.contains(model.start):
        raise OutOfDomain(
            f"start density {model.start} is outside {model.domain}",
            {"start": model.start, "label": model.label},
        )

    at_origin = model.rate_values(0.0)
    for i, value in enumerate(at_origin):
        if abs(value) > ORIGIN_TOLERANCE:
            raise NonzeroAtOrigin(
                f"F_{i + 1}(0) = {value} but every rate must vanish at the origin",
                {"reaction": i + 1, "value": float(value), "label": model.label},
            )

    grid = model.domain.validation_grid(model.start, grid_points)
    values = model.rate_values(grid)
    worst = values.min(axis=1)
    for i, value in enumerate(worst):
        if value < -ORIGIN_TOLERANCE:
            where = float(grid[np.argmin(values[i])])
            raise NegativeRate(
                f"F_{i + 1} is negative ({value:.3e}) at u={where}",
                {"reaction": i + 1, "u": where, "label": model.label},
            )

    slopes = np.abs(model.rate_derivatives(grid))
    bound = float(slopes.max()) if slopes.size else 0.0
    if not np.isfinite(bound):
        raise UnboundedDerivative(
            "a rate derivative is not finite on the validation grid",
            {"label": model.label},
        )

    start_drift = model.drift(model.start)
    if not start_drift > 0:
        raise NonpositiveStartDrift(
            f"drift at the start density is {start_drift}, it must be positive",
            {"start": model.start, "drift": float(start_drift), "label": model.label},
        )

    return bound


def make_model(
    jumps: Sequence[float],
    rates: Sequence[RateFunction],
    start: float,
    domain: Domain,
    label: str = "custom",
    parameters: Optional[Dict[str, Any]] = None,
    grid_points: int = DEFAULT_GRID_POINTS,
) -> ModelSpec:
    """Construct and validate a model from already-built rate functions."""
    model = ModelSpec(
        jumps=tuple(float(j) for j in jumps),
        rates=tuple(rates),
        start=float(start),
        domain=domain,
        label=label,
        parameters=dict(parameters or {}),
    )
    validate_model(model, grid_points)
    logger.debug(f"Model {label} validated on {grid_points} grid points")
    return model


def birth_death(lam: float, theta: float, x: float = 1.0) -> ModelSpec:
    """Birth-and-death process: l = (+1, -1), F1 = lam u, F2 = theta u."""
    return make_model(
        jumps=(1.0, -1.0),
        rates=(PolynomialRate([0.0, lam]), PolynomialRate([0.0, theta])),
        start=x,
        domain=Domain(0.0, math.inf),
        label="birth_death",
        parameters={"lambda": lam, "theta": theta, "x": x},
    )


def sis(lam: float, theta: float, x: float = 0.5) -> ModelSpec:
    """SIS epidemic on the complete graph: F1 = lam u (1 - u), F2 = theta u."""
    return make_model(
        jumps=(1.0, -1.0),
        rates=(PolynomialRate([0.0, lam, -lam]), PolynomialRate([0.0, theta])),
        start=x,
        domain=Domain(0.0, 1.0),
        label="sis",
        parameters={"lambda": lam, "theta": theta, "x": x},
    )


def pure_birth(lam: float = 1.0, x: float = 1.0) -> ModelSpec:
    """Yule process: one reaction, l = +1, F = lam u."""
    return make_model(
        jumps=(1.0,),
        rates=(PolynomialRate([0.0, lam]),),
        start=x,
        domain=Domain(0.0, math.inf),
        label="pure_birth",
        parameters={"lambda": lam, "x": x},
    )


def build_model(
    raw: Union[ModelConfig, Mapping[str, Any]],
    grid_points: int = DEFAULT_GRID_POINTS,
) -> ModelSpec:
    """
    Build a validated model from raw configuration parameters.

    Args:
        raw: A ``ModelConfig`` or a mapping that validates as one
        grid_points: Validation grid size

    Returns:
        A validated ModelSpec
    """
    config = raw if isinstance(raw, ModelConfig) else ModelConfig.model_validate(raw)

    if config.kind == "birth_death":
        model = birth_death(config.lam, config.theta, config.x)
    elif config.kind == "sis":
        model = sis(config.lam, config.theta, config.x)
    elif config.kind == "pure_birth":
        model = pure_birth(config.lam, config.x)
    else:
        lower, upper = config.domain
        model = make_model(
            jumps=config.jumps,
            rates=[TabulatedRate(table.u, table.f) for table in config.tables],
            start=config.x,
            domain=Domain(lower, math.inf if upper is None else upper),
            label=config.label or "custom",
            parameters={"x": config.x},
            grid_points=grid_points,
        )
        return model

    if grid_points != DEFAULT_GRID_POINTS:
        validate_model(model, grid_points)
    if config.label:
        model = replace(model, label=config.label)
    return model


def _check_domain(model: ModelSpec, u: float) -> None:
    if not model.domain.contains(u):
        raise OutOfDomain(
            f"u={u} is outside the domain [{model.domain.lower}, {model.domain.upper}]",
            {"u": u, "label": model.label},
        )


def drift(model: ModelSpec, u: float) -> float:
    """Fluid velocity sum_i l_i F_i(u) at a density in the domain."""
    _check_domain(model, u)
    return float(model.drift(u))


def beta_of_u(model: ModelSpec, u: float) -> float:
    """Infinitesimal variance sum_i l_i^2 F_i(u) at a density in the domain."""
    _check_domain(model, u)
    return float(model.beta(u))


def lipschitz_constant(model: ModelSpec, grid_points: int = DEFAULT_GRID_POINTS) -> float:
    """Estimated Lipschitz constant of the drift: M * max|l_i| * max_grid |F_i'|."""
    grid = model.domain.validation_grid(model.start, grid_points)
    bound = float(np.abs(model.rate_derivatives(grid)).max())
    return model.size * float(np.abs(model.jump_array).max()) * bound


@lru_cache(maxsize=128)
def x_infinity(model: ModelSpec, grid_points: int = DEFAULT_GRID_POINTS) -> float:
    """
    First zero of the drift strictly above the start density.

    Scans the domain above x for a sign change of the drift and refines the
    bracket by bisection to 1e-12. Returns +inf when the drift stays
    positive on an unbounded domain, and the upper end of a bounded domain
    when the drift only vanishes there.
    """
    x = model.start
    if model.domain.bounded:
        grid = np.linspace(x, model.domain.upper, grid_points)
    else:
        half = grid_points // 2
        grid = np.concatenate([
            np.linspace(x, x + 1.0, half, endpoint=False),
            x + np.geomspace(1.0, 1e12, grid_points - half),
        ])

    values = np.asarray(model.drift(grid), dtype=float)
    nonpositive = np.flatnonzero(values[1:] <= 0.0)
    if nonpositive.size == 0:
        if model.domain.bounded and abs(values[-1]) <= ORIGIN_TOLERANCE:
            return float(model.domain.upper)
        return math.inf

    k = int(nonpositive[0]) + 1
    if values[k] == 0.0:
        return float(grid[k])
    root = brentq(model.drift, grid[k - 1], grid[k], xtol=ROOT_TOLERANCE, rtol=4 * np.finfo(float).eps)
    logger.debug(f"x_infinity for {model.label}: {root}")
    return float(root)
