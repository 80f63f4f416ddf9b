"""Exact first-passage computations on small truncated chains.

The chain is the generator restricted to the integer states below the
target level. Jumps that reach or overshoot the target are lumped into one
absorbing target; state 0 is absorbing (extinction) when requested.
"""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu
from scipy.stats import poisson

from dynamics.fluid import tau_quadrature
from dynamics.model import ModelSpec
from models.schemas import HittingSample
from utils.errors import OutOfDomain, OverflowGuard, SingularSystem


logger = logging.getLogger(__name__)

HIT_TOLERANCE = 1e-12
SERIES_TOLERANCE = 1e-12
MAX_SERIES_TERMS = 2_000_000


@dataclass(frozen=True)
class TruncatedChain:
    """Finite restriction of the jump chain at size n below the level n r."""

    n: int
    target: int
    steps: np.ndarray
    rates: np.ndarray
    initial: int
    absorb_zero: bool
    label: str = ""

    @property
    def offset(self) -> int:
        return 1 if self.absorb_zero else 0

    @property
    def transient_states(self) -> np.ndarray:
        return np.arange(self.offset, self.target)

    @property
    def outflow(self) -> np.ndarray:
        """Total outflow of each state 0..target-1."""
        return self.rates.sum(axis=0)

    def is_absorbing(self, state: int) -> bool:
        return state >= self.target or (self.absorb_zero and state == 0)

    def generator_blocks(self):
        """
        Transient block Q_TT (CSC) plus the rate vectors into the target and
        into state 0 from every transient state.
        """
        states = self.transient_states
        count = states.size
        rows, cols, data = [], [], []
        into_target = np.zeros(count)
        into_zero = np.zeros(count)
        for i, step in enumerate(self.steps):
            rate = self.rates[i, states]
            destination = states + step
            for j in np.flatnonzero(rate > 0):
                d = destination[j]
                if d >= self.target:
                    into_target[j] += rate[j]
                elif self.absorb_zero and d == 0:
                    into_zero[j] += rate[j]
                else:
                    rows.append(j)
                    cols.append(d - self.offset)
                    data.append(rate[j])
        rows.extend(range(count))
        cols.extend(range(count))
        data.extend(-self.outflow[states])
        block = sparse.csc_matrix((data, (rows, cols)), shape=(count, count))
        return block, into_target, into_zero


def build_chain(model: ModelSpec, n: int, r: float, absorb_zero: bool = True) -> TruncatedChain:
    """
    Truncated chain for the level r at system size n.

    Args:
        model: Validated model with integer jumps
        n: System size
        r: Level; the target is every state >= ceil(n r)
        absorb_zero: Treat 0 as absorbing

    Raises:
        ValueError: If a jump is not an integer
        OutOfDomain: If a positive rate would jump below 0
    """
    if n < 1:
        raise ValueError("n must be positive")
    jumps = model.jump_array
    if not np.all(jumps == np.rint(jumps)):
        raise ValueError(f"the oracle needs integer jumps, got {model.jumps}")
    steps = np.rint(jumps).astype(np.int64)

    target = int(math.ceil(n * r - 1e-9))
    initial = int(round(n * model.start))

    states = np.arange(target)
    rates = n * np.maximum(model.rate_values(states / n), 0.0)
    for i, step in enumerate(steps):
        below = (states + step < 0) & (rates[i] > 0)
        if np.any(below):
            k = int(states[below][0])
            raise OutOfDomain(
                f"reaction {i + 1} jumps from state {k} below 0 at a positive rate",
                {"state": k, "reaction": i + 1, "label": model.label},
            )

    logger.debug(f"Truncated chain for {model.label}: n={n}, target={target}")
    # states at or above the target are absorbed before they are visited, so
    # cutting the chain there is exact
    return TruncatedChain(
        n=n, target=target, steps=steps, rates=rates, initial=initial,
        absorb_zero=absorb_zero, label=model.label,
    )


def _factorize(chain: TruncatedChain, block):
    outflow = chain.outflow[chain.transient_states]
    stuck = np.flatnonzero(outflow <= 0)
    if stuck.size:
        state = int(chain.transient_states[stuck[0]])
        raise SingularSystem(
            f"state {state} has no outflow but is not absorbing; the chain is disconnected",
            {"state": state, "label": chain.label},
        )
    try:
        return splu(block)
    except RuntimeError as e:
        raise SingularSystem(f"first-passage system is singular: {e}", {"label": chain.label}) from e


class HittingMoments(NamedTuple):
    mean: float
    second_moment: float
    hit_probability: float


def exact_mean_hitting(chain: TruncatedChain, start: int, conditional: bool = False) -> HittingMoments:
    """
    Hit probability and first two moments of the hitting time from ``start``.

    Solves Q h = -q_target, Q u = -h and Q v = -2u on the transient states,
    so u = E[tau; hit] and v = E[tau^2; hit].

    Args:
        chain: Truncated chain
        start: Start state
        conditional: Return moments given a hit instead of unconditional ones

    Returns:
        HittingMoments; unconditional moments are +inf when the hit
        probability is below 1

    Raises:
        SingularSystem: If some transient state cannot leave
    """
    if start < 0:
        raise ValueError("start state must be nonnegative")
    if start >= chain.target:
        return HittingMoments(0.0, 0.0, 1.0)
    if chain.absorb_zero and start == 0:
        return HittingMoments(math.inf, math.inf, 0.0)

    block, into_target, _ = chain.generator_blocks()
    lu = _factorize(chain, block)
    h = lu.solve(-into_target)
    u = lu.solve(-h)
    v = lu.solve(-2.0 * u)

    j = start - chain.offset
    probability = float(min(max(h[j], 0.0), 1.0))
    if conditional:
        if probability <= 0.0:
            return HittingMoments(math.inf, math.inf, probability)
        return HittingMoments(float(u[j] / h[j]), float(v[j] / h[j]), probability)
    if probability < 1.0 - HIT_TOLERANCE:
        return HittingMoments(math.inf, math.inf, probability)
    return HittingMoments(float(u[j]), float(v[j]), probability)


def exact_survival(chain: TruncatedChain, start: int, t_grid: Sequence[float]) -> np.ndarray:
    """
    P(tau > t) on ``t_grid`` by uniformization, tau = +inf when never hit.

    Raises:
        OverflowGuard: If the Poisson series would need more than
            MAX_SERIES_TERMS terms at the largest t
    """
    times = np.asarray(t_grid, dtype=float)
    if np.any(times < 0):
        raise ValueError("t_grid must be nonnegative")
    if start >= chain.target:
        return np.zeros_like(times)
    if chain.absorb_zero and start == 0:
        return np.ones_like(times)

    block, _, into_zero = chain.generator_blocks()
    uniform_rate = float(chain.outflow[chain.transient_states].max())
    if uniform_rate <= 0.0:
        return np.ones_like(times)
    horizon = uniform_rate * float(times.max(initial=0.0))
    terms = int(poisson.isf(SERIES_TOLERANCE, horizon)) + 1 if horizon > 0 else 1
    if terms > MAX_SERIES_TERMS:
        raise OverflowGuard(
            f"uniformization needs {terms} terms (rate {uniform_rate:.3g} x t {times.max():.3g}); "
            "shorten the t grid or use a smaller n",
            {"terms": terms, "uniform_rate": uniform_rate, "t_max": float(times.max()), "label": chain.label},
        )

    step = (sparse.identity(block.shape[0], format="csc") + block / uniform_rate).T.tocsr()
    leak = into_zero / uniform_rate
    mass = np.zeros(block.shape[0])
    mass[start - chain.offset] = 1.0
    extinct = 0.0
    surviving = np.empty(terms + 1)
    for k in range(terms + 1):
        surviving[k] = mass.sum() + extinct
        extinct += float(mass @ leak)
        mass = step @ mass

    order = np.argsort(times)
    result = np.empty_like(times)
    indices = np.arange(terms + 1)
    for position in order:
        weights = poisson.pmf(indices, uniform_rate * times[position])
        result[position] = float(weights @ surviving)
    result = np.clip(result, 0.0, 1.0)
    result[order] = np.minimum.accumulate(result[order])
    logger.debug(f"Uniformization for {chain.label}: rate {uniform_rate:.6g}, {terms} terms")
    return result


def dkw_epsilon(replicas: int, confidence: float) -> float:
    """Half-width sqrt(ln(2/alpha) / (2m)) of the Dvoretzky-Kiefer-Wolfowitz band."""
    if replicas < 1 or not 0 < confidence < 1:
        raise ValueError("need replicas >= 1 and 0 < confidence < 1")
    return math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * replicas))


def empirical_survival(samples: Sequence[HittingSample], t_grid: Sequence[float]) -> np.ndarray:
    """Fraction of replicas with tau > t; censored replicas never hit."""
    times = np.asarray(t_grid, dtype=float)
    taus = np.array([s.tau if s.hit else math.inf for s in samples])
    return (taus[None, :] > times[:, None]).mean(axis=1)


@dataclass(frozen=True)
class SurvivalComparison:
    t_grid: np.ndarray
    exact: np.ndarray
    empirical: np.ndarray
    epsilon: float

    @property
    def within_band(self) -> np.ndarray:
        return np.abs(self.empirical - self.exact) <= self.epsilon

    @property
    def all_within(self) -> bool:
        return bool(np.all(self.within_band))


def compare_survival(
    chain: TruncatedChain,
    start: int,
    samples: Sequence[HittingSample],
    t_grid: Sequence[float],
    confidence: float = 0.999,
) -> SurvivalComparison:
    """Exact survival against the empirical one with its DKW band."""
    times = np.asarray(t_grid, dtype=float)
    comparison = SurvivalComparison(
        t_grid=times,
        exact=exact_survival(chain, start, times),
        empirical=empirical_survival(samples, times),
        epsilon=dkw_epsilon(len(samples), confidence),
    )
    if not comparison.all_within:
        worst = float(np.max(np.abs(comparison.empirical - comparison.exact)))
        logger.warning(f"Empirical survival leaves the DKW band: sup gap {worst:.4g} > {comparison.epsilon:.4g}")
    return comparison


@dataclass(frozen=True)
class MeanConvergence:
    sizes: np.ndarray
    means: np.ndarray
    errors: np.ndarray
    slope: float


def mean_convergence(model: ModelSpec, r: float, sizes: Sequence[int]) -> MeanConvergence:
    """
    Exact conditional mean hitting time against tau_r for growing n, with
    the least-squares slope of log error against log n.
    """
    tau_r = tau_quadrature(model, r)
    means = []
    for n in sizes:
        chain = build_chain(model, int(n), r)
        means.append(exact_mean_hitting(chain, chain.initial, conditional=True).mean)
    means = np.asarray(means)
    errors = np.abs(means - tau_r)
    slope = float(np.polyfit(np.log(np.asarray(sizes, dtype=float)), np.log(errors), 1)[0])
    return MeanConvergence(sizes=np.asarray(sizes), means=means, errors=errors, slope=slope)
