"""Scalar rate functions u -> F_i(u) with derivative access.

Every rate knows how to evaluate itself on numpy arrays and how to report
its derivative. Rates that are piecewise polynomials additionally expose a
``PPoly`` so the compiled simulation kernels can evaluate them without
calling back into Python.
"""

import logging
from abc import ABC, abstractmethod
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import PPoly, PchipInterpolator


logger = logging.getLogger(__name__)


class RateFunction(ABC):
    """A nonnegative C^1 rate u -> F(u)."""

    @abstractmethod
    def __call__(self, u):
        """Evaluate F at a scalar or array."""

    @abstractmethod
    def derivative(self, u):
        """Evaluate F' at a scalar or array."""

    def as_ppoly(self) -> Optional[PPoly]:
        """Piecewise-polynomial form for compiled kernels, None if unavailable."""
        return None

    @property
    def analytic_derivative(self) -> bool:
        return True


class PolynomialRate(RateFunction):
    """F(u) = sum_k c_k u^k with coefficients in ascending order."""

    def __init__(self, coefficients: Sequence[float]):
        self.polynomial = Polynomial(np.asarray(coefficients, dtype=float))
        self._derivative = self.polynomial.deriv()

    def __call__(self, u):
        return self.polynomial(u)

    def derivative(self, u):
        return self._derivative(u)

    def as_ppoly(self) -> PPoly:
        # a single piece anchored at 0; PPoly extrapolates it over the real line
        descending = self.polynomial.coef[::-1].copy()
        return PPoly(descending[:, None], np.array([0.0, 1.0]))

    def __repr__(self) -> str:
        return f"PolynomialRate({self.polynomial.coef.tolist()})"


class TabulatedRate(RateFunction):
    """Monotone-cubic (PCHIP) interpolation of tabulated (u, F(u)) pairs."""

    def __init__(self, u: Sequence[float], values: Sequence[float]):
        u = np.asarray(u, dtype=float)
        values = np.asarray(values, dtype=float)
        if u.ndim != 1 or u.shape != values.shape or u.size < 2:
            raise ValueError("tabulated rate needs two equal-length 1-D arrays with >= 2 points")
        if np.any(np.diff(u) <= 0):
            raise ValueError("tabulated abscissae must be strictly increasing")
        self.u = u
        self.values = values
        self.interpolant = PchipInterpolator(u, values, extrapolate=True)
        self._derivative = self.interpolant.derivative()

    def __call__(self, u):
        return self.interpolant(u)

    def derivative(self, u):
        return self._derivative(u)

    def as_ppoly(self) -> PPoly:
        return PPoly(self.interpolant.c, self.interpolant.x)

    def __repr__(self) -> str:
        return f"TabulatedRate(points={self.u.size}, range=[{self.u[0]}, {self.u[-1]}])"


class CallableRate(RateFunction):
    """User closure; derivative by central differences unless supplied."""

    def __init__(
        self,
        func: Callable,
        derivative: Optional[Callable] = None,
        relative_step: float = 1e-6,
    ):
        self.func = func
        self._derivative = derivative
        self.relative_step = relative_step
        self._elementwise = np.vectorize(func, otypes=[float])

    def __call__(self, u):
        if np.ndim(u):
            return self._elementwise(u)
        return float(self.func(u))

    def derivative(self, u):
        if self._derivative is not None:
            return self._derivative(u)
        u = np.asarray(u, dtype=float)
        h = self.relative_step * np.maximum(1.0, np.abs(u))
        result = (self._elementwise(u + h) - self._elementwise(u - h)) / (2.0 * h)
        return result if result.ndim else float(result)

    @property
    def analytic_derivative(self) -> bool:
        return self._derivative is not None

    def __repr__(self) -> str:
        return f"CallableRate({getattr(self.func, '__name__', 'closure')})"


def pack_ppolys(rates: Sequence[RateFunction]):
    """
    Pack the PPoly forms of several rates into padded arrays.

    Args:
        rates: Rates that all provide ``as_ppoly``

    Returns:
        (breaks[M, P+1], coefficients[M, D, P], pieces[M]) or None when a
        rate has no piecewise-polynomial form
    """
    ppolys = [rate.as_ppoly() for rate in rates]
    if any(p is None for p in ppolys):
        return None

    max_pieces = max(p.x.size - 1 for p in ppolys)
    max_order = max(p.c.shape[0] for p in ppolys)
    breaks = np.full((len(ppolys), max_pieces + 1), np.inf)
    coefficients = np.zeros((len(ppolys), max_order, max_pieces))
    pieces = np.zeros(len(ppolys), dtype=np.int64)

    for i, p in enumerate(ppolys):
        count = p.x.size - 1
        order = p.c.shape[0]
        breaks[i, :count + 1] = p.x
        # highest order first; pad leading rows with zeros
        coefficients[i, max_order - order:, :count] = p.c
        pieces[i] = count

    return breaks, coefficients, pieces
