"""Deviation rate objects built on the fluid path.

Time-domain integrals along the fluid path use composite Gauss-Legendre
rules on the solver grid; density-domain integrals use adaptive
Gauss-Kronrod (``scipy.integrate.quad``). The two families are independent,
which is what makes the identity check meaningful.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline

from dynamics.fluid import DEFAULT_TOL, SINGULARITY_GUARD, FluidPath, solve_fluid
from dynamics.model import ModelSpec, x_infinity
from utils.errors import DegenerateDenominator, RangeError


logger = logging.getLogger(__name__)

CLT_RELATIVE_TOL = 1e-10
BETA_FLOOR = 1e-14
DENOMINATOR_FLOOR = 1e-14
NEWTON_BRACKET = 50.0
DEFAULT_KNOTS = 2000
DEFAULT_SUBPOINTS = 8


def _gauss_legendre_pieces(func, left: np.ndarray, right: np.ndarray, order: int = 10) -> np.ndarray:
    """Integral of a vectorised ``func`` over each [left_k, right_k]."""
    nodes, weights = leggauss(order)
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    points = mid[:, None] + half[:, None] * nodes[None, :]
    return (np.asarray(func(points)) * weights).sum(axis=1) * half


def _breakpoints(grid: np.ndarray, a: float, b: float) -> np.ndarray:
    inner = grid[(grid > a) & (grid < b)]
    return np.concatenate([[a], inner, [b]])


class RateProfile:
    """
    C(t) = sum l_i F_i'(x_t), beta(t) = sum l_i^2 F_i(x_t) along a fluid path,
    with the antiderivative of C cached on the solver grid.
    """

    def __init__(self, model: ModelSpec, fluid: FluidPath):
        self.model = model
        self.fluid = fluid
        grid = fluid.grid
        increments = _gauss_legendre_pieces(self.c_of_t, grid[:-1], grid[1:])
        cumulative = np.concatenate([[0.0], np.cumsum(increments)])
        slopes = np.asarray(model.drift_prime(fluid.values), dtype=float)
        self._cum_c = CubicHermiteSpline(grid, cumulative, slopes, extrapolate=False)

    @property
    def horizon(self) -> float:
        return self.fluid.horizon

    def c_of_t(self, t):
        """C(t)."""
        return self.model.drift_prime(self.fluid.value(t))

    def beta_of_t(self, t):
        """beta(t)."""
        return self.model.beta(self.fluid.value(t))

    def cum_c(self, t):
        """int_0^t C."""
        self.fluid.check_times(t)
        out = self._cum_c(np.minimum(t, self.horizon))
        return out if np.ndim(out) else float(out)

    def weighted_beta_integral(self, T: float) -> float:
        """int_0^T beta(u) exp(2 int_u^T C) du on the solver grid."""
        if not 0 < T <= self.horizon * (1 + 1e-14):
            raise RangeError(
                f"T={T} must lie in (0, {self.horizon}]",
                {"T": T, "horizon": self.horizon, "label": self.model.label},
            )
        T = min(T, self.horizon)
        edges = _breakpoints(self.fluid.grid, 0.0, T)
        end = self.cum_c(T)

        def integrand(u):
            return self.beta_of_t(u) * np.exp(2.0 * (end - self.cum_c(u)))

        return float(_gauss_legendre_pieces(integrand, edges[:-1], edges[1:]).sum())


def build_rate_profile(model: ModelSpec, r_stop: float, tol: float = DEFAULT_TOL) -> RateProfile:
    """
    Solve the fluid path up to r_stop and precompute the rate profile.

    Raises:
        RangeError: If r_stop is outside (x, x_inf) or beta(x) = 0
    """
    if not model.beta(model.start) > 0:
        raise RangeError(
            "beta vanishes at the start density; the moderate-deviation functionals are undefined",
            {"x": model.start, "label": model.label},
        )
    profile = RateProfile(model, solve_fluid(model, r_stop, tol))
    logger.info(f"Rate profile for {model.label} built up to r={r_stop} (horizon {profile.horizon:.6g})")
    return profile


class PiecewiseLinearPath:
    """Absolutely continuous path given by linear interpolation of knots."""

    def __init__(self, times, values):
        """
        Args:
            times: Knot times, strictly increasing, starting at 0
            values: Path values at the knots
        """
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.values.shape or self.times.size < 2:
            raise ValueError("a path needs two equal-length 1-D knot arrays with at least two knots")
        if self.times[0] != 0.0:
            raise ValueError("a path starts at t=0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("knot times must be strictly increasing")

    @property
    def end(self) -> float:
        return float(self.times[-1])

    def value(self, t):
        out = np.interp(t, self.times, self.values)
        return out if np.ndim(out) else float(out)

    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.times)

    def derivative(self, t):
        index = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 2)
        out = self.slopes()[index]
        return out if np.ndim(out) else float(out)

    def scaled(self, factor: float) -> "PiecewiseLinearPath":
        return PiecewiseLinearPath(self.times, factor * self.values)

    def midpoint_rule(self, T: float, subpoints: int = DEFAULT_SUBPOINTS) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """
        Composite midpoint nodes on [0, T] refining every knot interval.

        Returns:
            (nodes, weights, values, slopes) at the nodes
        """
        if T <= 0 or T > self.end * (1 + 1e-14):
            raise RangeError(f"path is defined on [0, {self.end}], not on [0, {T}]", {"T": T})
        if subpoints < 1:
            raise ValueError("subpoints must be positive")
        edges = _breakpoints(self.times, 0.0, min(T, self.end))
        width = np.diff(edges)
        offsets = (np.arange(subpoints) + 0.5) / subpoints
        nodes = (edges[:-1, None] + width[:, None] * offsets[None, :]).ravel()
        weights = np.repeat(width / subpoints, subpoints)
        # slope is constant on each original knot interval
        slopes = np.repeat(self.derivative(0.5 * (edges[:-1] + edges[1:])), subpoints)
        return nodes, weights, np.interp(nodes, self.times, self.values), slopes


def clt_variance(profile: RateProfile, r: float) -> float:
    """
    sigma^2(r) = int_x^r beta(u) / drift(u)^3 du.

    Raises:
        RangeError: If r is outside (x, x_inf) or too close to x_inf
    """
    model = profile.model
    x_inf = x_infinity(model)
    if not model.start < r < x_inf:
        raise RangeError(
            f"r={r} must lie in (x, x_inf) = ({model.start}, {x_inf})",
            {"r": r, "label": model.label},
        )
    if model.drift(r) < SINGULARITY_GUARD:
        raise RangeError(f"drift({r}) < {SINGULARITY_GUARD}: too close to x_inf", {"r": r})
    value, _ = quad(
        lambda u: model.beta(u) / model.drift(u) ** 3,
        model.start, r, epsabs=0.0, epsrel=CLT_RELATIVE_TOL, limit=500,
    )
    return float(value)


def mdp_rate(profile: RateProfile, r: float, t: float) -> float:
    """t^2 / (2 sigma^2(r)); shared by the upper and lower tails."""
    return t * t / (2.0 * clt_variance(profile, r))


@dataclass(frozen=True)
class VariationalMinimum:
    value: float
    extremal: PiecewiseLinearPath
    denominator: float


def variational_minimum(
    profile: RateProfile,
    T: float,
    a: float,
    knots: int = DEFAULT_KNOTS,
) -> VariationalMinimum:
    """
    inf { I_T(f) : f(0) = 0, f(T) = a } and its minimiser.

    The minimiser is f(t) = a exp(int_T^t C) G(t) / G(T) with
    G(t) = int_0^t beta(u) exp(2 int_u^T C) du, sampled on ``knots`` points.

    Raises:
        RangeError: If T is outside (0, horizon]
        DegenerateDenominator: If G(T) < 1e-14
    """
    denominator = profile.weighted_beta_integral(T)
    if denominator < DENOMINATOR_FLOOR:
        raise DegenerateDenominator(
            f"int beta exp(2 int C) = {denominator:.3e} on [0, {T}]",
            {"T": T, "label": profile.model.label},
        )
    T = min(T, profile.horizon)

    times = np.linspace(0.0, T, knots)
    end = profile.cum_c(T)

    def integrand(u):
        return profile.beta_of_t(u) * np.exp(2.0 * (end - profile.cum_c(u)))

    # the extremal is smooth, so a fixed rule per knot interval suffices
    pieces = _gauss_legendre_pieces(integrand, times[:-1], times[1:])
    cumulative = np.concatenate([[0.0], np.cumsum(pieces)])
    shape = np.exp(profile.cum_c(times) - end) * cumulative / cumulative[-1]

    return VariationalMinimum(
        value=a * a / (2.0 * denominator),
        extremal=PiecewiseLinearPath(times, a * shape),
        denominator=denominator,
    )


def path_rate_I(
    profile: RateProfile,
    f: PiecewiseLinearPath,
    T: float,
    subpoints: int = DEFAULT_SUBPOINTS,
) -> float:
    """
    I_T(f) = 1/2 int_0^T (f' - C f)^2 / beta; +inf unless f(0) = 0.
    """
    if abs(f.value(0.0)) > 0.0:
        return math.inf
    if T > profile.horizon * (1 + 1e-14):
        raise RangeError(f"T={T} exceeds the fluid horizon {profile.horizon}", {"T": T})

    nodes, weights, values, slopes = f.midpoint_rule(min(T, profile.horizon), subpoints)
    numerator = (slopes - profile.c_of_t(nodes) * values) ** 2
    beta = profile.beta_of_t(nodes)

    vanishing = beta < BETA_FLOOR
    if np.any(vanishing & (numerator > 0)):
        where = float(nodes[np.argmax(vanishing & (numerator > 0))])
        logger.warning(f"beta vanishes at t={where:.6g} where the I_T integrand is nonzero; returning +inf")
        return math.inf

    safe_beta = np.where(vanishing, 1.0, beta)
    return float(0.5 * np.sum(weights * np.where(vanishing, 0.0, numerator / safe_beta)))


def legendre_transform(rates: np.ndarray, jumps: np.ndarray, y: np.ndarray) -> np.ndarray:
    """
    l(y) = sup_b { b y - sum_i F_i (exp(b l_i) - 1) } for many points.

    Args:
        rates: F_i at each point, shape (M, N); negatives are clamped to 0
        jumps: l_i, shape (M,)
        y: Velocities, shape (N,)

    Returns:
        Nonnegative values, +inf outside the reachable cone
    """
    rates = np.maximum(np.asarray(rates, dtype=float), 0.0)
    y = np.asarray(y, dtype=float)
    jumps = np.asarray(jumps, dtype=float)[:, None]

    def gradient(b):
        return y - np.sum(rates * jumps * np.exp(b * jumps), axis=0)

    def curvature(b):
        return -np.sum(rates * jumps ** 2 * np.exp(b * jumps), axis=0)

    def objective(b):
        return b * y - np.sum(rates * np.expm1(b * jumps), axis=0)

    lower = np.full(y.shape, -NEWTON_BRACKET)
    upper = np.full(y.shape, NEWTON_BRACKET)
    with np.errstate(over="ignore", invalid="ignore"):
        bracketed = (gradient(lower) >= 0) & (gradient(upper) <= 0)

        b = np.zeros(y.shape)
        for _ in range(200):
            g = gradient(b)
            lower = np.where(g > 0, b, lower)
            upper = np.where(g <= 0, b, upper)
            step = b - g / curvature(b)
            inside = np.isfinite(step) & (step > lower) & (step < upper)
            updated = np.where(inside, step, 0.5 * (lower + upper))
            done = np.abs(updated - b) <= 1e-15 * (1.0 + np.abs(b))
            b = updated
            if np.all(done | ~bracketed):
                break

        values = np.where(bracketed, objective(b), 0.0)
        boundary = np.maximum(objective(np.full(y.shape, -NEWTON_BRACKET)),
                              objective(np.full(y.shape, NEWTON_BRACKET)))
    values = np.where(bracketed, values, boundary)

    active = rates > 0
    has_up = np.any(active & (jumps > 0), axis=0)
    has_down = np.any(active & (jumps < 0), axis=0)
    unreachable = ((y > 0) & ~has_up) | ((y < 0) & ~has_down)
    values = np.where(unreachable | np.isnan(values), math.inf, values)
    return np.maximum(values, 0.0)


def local_ld_rate(model: ModelSpec, u: float, y: float) -> float:
    """Local large-deviation cost l(u, y) of velocity y at density u."""
    if not model.domain.contains(u):
        raise RangeError(f"u={u} is outside the domain", {"u": u, "label": model.label})
    rates = model.rate_values(np.array([float(u)]))
    return float(legendre_transform(rates, model.jump_array, np.array([float(y)]))[0])


def _starts_at(f: PiecewiseLinearPath, x: float) -> bool:
    return abs(f.value(0.0) - x) <= 1e-12 * max(1.0, abs(x))


def path_rate_J(
    model: ModelSpec,
    f: PiecewiseLinearPath,
    T: float,
    subpoints: int = DEFAULT_SUBPOINTS,
) -> float:
    """J_T(f) = int_0^T l(f, f'); +inf unless f(0) = x."""
    if not _starts_at(f, model.start):
        return math.inf
    nodes, weights, values, slopes = f.midpoint_rule(T, subpoints)
    local = legendre_transform(model.rate_values(values), model.jump_array, slopes)
    if not np.all(np.isfinite(local)):
        return math.inf
    return float(np.sum(weights * local))


def path_rate_K(
    model: ModelSpec,
    f: PiecewiseLinearPath,
    T: float,
    subpoints: int = DEFAULT_SUBPOINTS,
) -> float:
    """K_T(f) = int_0^T (f' - drift(f))^2 / beta(f), without a 1/2 prefactor."""
    if not _starts_at(f, model.start):
        return math.inf
    nodes, weights, values, slopes = f.midpoint_rule(T, subpoints)
    numerator = (slopes - model.drift(values)) ** 2
    beta = model.beta(values)
    vanishing = beta < BETA_FLOOR
    if np.any(vanishing & (numerator > 0)):
        return math.inf
    safe_beta = np.where(vanishing, 1.0, beta)
    return float(np.sum(weights * np.where(vanishing, 0.0, numerator / safe_beta)))


@dataclass(frozen=True)
class IdentityCheck:
    r: float
    lhs: float
    rhs: float
    relerr: float


def check_eq37_identity(profile: RateProfile, r: float) -> IdentityCheck:
    """
    Compare int_0^{tau_r} beta exp(2 int_u^{tau_r} C) (time domain) with
    x'(tau_r)^2 sigma^2(r) (density domain).
    """
    model = profile.model
    if not model.start < r <= profile.fluid.values[-1]:
        raise RangeError(
            f"r={r} must lie in (x, r_stop] = ({model.start}, {profile.fluid.values[-1]}]",
            {"r": r, "label": model.label},
        )
    tau = profile.fluid.time_at(r)
    lhs = profile.weighted_beta_integral(tau) if tau > 0 else 0.0
    rhs = float(model.drift(r)) ** 2 * clt_variance(profile, r)
    scale = abs(rhs) if rhs != 0 else 1.0
    return IdentityCheck(r=r, lhs=lhs, rhs=rhs, relerr=abs(lhs - rhs) / scale)
