"""Fluid limit x' = drift(x) and the deterministic hitting time tau_r."""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from dynamics.model import ModelSpec, x_infinity
from utils.errors import ConsistencyError, RangeError, StallDetected


logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
SINGULARITY_GUARD = 1e-8
STALL_DRIFT = 1e-14
MAX_HORIZON = 1e9


class FluidPath:
    """Dense solution of the fluid ODE on [0, horizon]."""

    def __init__(self, grid: np.ndarray, values: np.ndarray, slopes: np.ndarray, tolerance: float, label: str = ""):
        """
        Build the interpolant.

        Args:
            grid: Strictly increasing times starting at 0
            values: x at the grid times
            slopes: drift(x) at the grid times, used as Hermite slopes
            tolerance: Tolerance the path was solved with
            label: Model label, for messages
        """
        self.grid = np.asarray(grid, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.slopes = np.asarray(slopes, dtype=float)
        self.tolerance = tolerance
        self.label = label
        self.interpolant = CubicHermiteSpline(self.grid, self.values, self.slopes, extrapolate=False)
        self._derivative = self.interpolant.derivative()

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    def check_times(self, t) -> None:
        t = np.asarray(t)
        if np.any(t < 0) or np.any(t > self.horizon * (1 + 1e-14)):
            raise RangeError(
                f"time outside the fluid horizon [0, {self.horizon}]",
                {"horizon": self.horizon, "label": self.label},
            )

    def value(self, t):
        self.check_times(t)
        out = self.interpolant(np.minimum(t, self.horizon))
        return out if np.ndim(out) else float(out)

    def derivative(self, t):
        self.check_times(t)
        out = self._derivative(np.minimum(t, self.horizon))
        return out if np.ndim(out) else float(out)

    def time_at(self, level: float) -> float:
        """First time the path reaches ``level`` (root of the interpolant)."""
        if level < self.values[0] or level > self.values[-1] + 1e-13 * max(1.0, abs(level)):
            raise RangeError(
                f"level {level} is not reached on [0, {self.horizon}]",
                {"level": level, "label": self.label},
            )
        if abs(self.values[-1] - level) <= 1e-13 * max(1.0, abs(level)):
            return self.horizon
        k = int(np.searchsorted(self.values, level, side="left"))
        if k == 0:
            return 0.0
        return brentq(
            lambda t: float(self.interpolant(t)) - level,
            self.grid[k - 1], self.grid[k],
            xtol=1e-15, rtol=4 * np.finfo(float).eps,
        )

    def sample(self, points: int) -> np.ndarray:
        """(points, 2) array of (t, x_t) on a uniform grid."""
        times = np.linspace(0.0, self.horizon, points)
        return np.column_stack([times, self.value(times)])


def _check_level(model: ModelSpec, r: float) -> float:
    x_inf = x_infinity(model)
    if not model.start < r < x_inf:
        raise RangeError(
            f"level r={r} must lie in (x, x_inf) = ({model.start}, {x_inf})",
            {"r": r, "x": model.start, "x_infinity": x_inf, "label": model.label},
        )
    return x_inf


def solve_fluid(model: ModelSpec, r_stop: float, tol: float = DEFAULT_TOL) -> FluidPath:
    """
    Integrate the fluid ODE with Dormand-Prince 4(5) until x reaches r_stop.

    Args:
        model: Validated model
        r_stop: Level at which integration stops
        tol: Error tolerance; the local step tolerance is two decades tighter

    Returns:
        FluidPath with horizon equal to the time r_stop is reached

    Raises:
        RangeError: If r_stop is outside (x, x_inf)
        StallDetected: If the drift underflows before r_stop is reached
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    _check_level(model, r_stop)

    rtol = max(1e-2 * tol, 100 * np.finfo(float).eps)
    atol = 1e-3 * rtol * max(1.0, abs(model.start))

    def reached(t, y):
        return y[0] - r_stop
    reached.terminal = True
    reached.direction = 1

    def stalled(t, y):
        return model.drift(y[0]) - STALL_DRIFT
    stalled.terminal = True
    stalled.direction = -1

    solution = solve_ivp(
        lambda t, y: [model.drift(y[0])],
        (0.0, MAX_HORIZON),
        [model.start],
        method="RK45",
        rtol=rtol,
        atol=atol,
        events=[reached, stalled],
    )

    if solution.status != 1 or solution.t_events[0].size == 0:
        raise StallDetected(
            f"fluid path stalled before reaching r={r_stop}; r is numerically at or past x_inf",
            {"r_stop": r_stop, "last_t": float(solution.t[-1]), "last_x": float(solution.y[0, -1]),
             "label": model.label},
        )

    grid = solution.t
    values = solution.y[0]
    keep = np.concatenate([[True], np.diff(grid) > 0])
    grid, values = grid[keep], values[keep]
    values = np.maximum.accumulate(values)
    slopes = np.asarray(model.drift(values), dtype=float)

    logger.debug(f"Fluid path for {model.label}: {grid.size} steps, horizon {grid[-1]:.6g}")
    return FluidPath(grid, values, slopes, tol, model.label)


@dataclass(frozen=True)
class TauEstimate:
    """Both estimates of tau_r and whether they agree."""

    r: float
    quadrature: float
    event: float
    tolerance: float

    @property
    def discrepancy(self) -> float:
        return abs(self.quadrature - self.event)

    @property
    def agree(self) -> bool:
        return self.discrepancy <= 10.0 * self.tolerance * max(self.quadrature, np.finfo(float).tiny)


def tau_quadrature(model: ModelSpec, r: float, tol: float = DEFAULT_TOL) -> float:
    """tau_r = int_x^r du / drift(u) by adaptive Gauss-Kronrod."""
    _check_level(model, r)
    if model.drift(r) < SINGULARITY_GUARD:
        raise RangeError(
            f"drift({r}) < {SINGULARITY_GUARD}: too close to x_inf for a reliable tau",
            {"r": r, "label": model.label},
        )
    value, _ = quad(lambda u: 1.0 / model.drift(u), model.start, r, epsabs=0.0, epsrel=tol, limit=500)
    return float(value)


def tau_estimates(model: ModelSpec, r: float, tol: float = DEFAULT_TOL) -> TauEstimate:
    """Quadrature and ODE-event estimates of tau_r."""
    quadrature = tau_quadrature(model, r, tol)
    path = solve_fluid(model, r, tol)
    return TauEstimate(r=r, quadrature=quadrature, event=path.time_at(r), tolerance=tol)


def tau_of_r(model: ModelSpec, r: float, tol: float = DEFAULT_TOL) -> float:
    """
    Deterministic hitting time of level r, cross-validated two ways.

    Raises:
        RangeError: If r is outside (x, x_inf) or too close to x_inf
        ConsistencyError: If quadrature and ODE event disagree
    """
    estimate = tau_estimates(model, r, tol)
    if not estimate.agree:
        raise ConsistencyError(
            f"tau_r quadrature {estimate.quadrature!r} and ODE event {estimate.event!r} disagree",
            {"r": r, "tol": tol, "discrepancy": estimate.discrepancy, "label": model.label},
        )
    return estimate.quadrature


def fluid_derivative_at_tau(model: ModelSpec, path: FluidPath, r: float) -> float:
    """x'(tau_r), which equals drift(r) by the chain rule."""
    x_inf = x_infinity(model)
    if not model.start < r < x_inf or r > path.values[-1] * (1 + 1e-14):
        raise RangeError(
            f"r={r} is not a level reached inside (x, x_inf) by this path",
            {"r": r, "x_infinity": x_inf, "label": model.label},
        )
    value = float(model.drift(r))
    if not value > 0 or math.isnan(value):
        raise RangeError(f"drift({r}) is not positive", {"r": r, "label": model.label})
    return value
