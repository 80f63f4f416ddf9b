"""Exact stochastic simulation of the jump chain and its hitting time."""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np

from dynamics.fluid import tau_quadrature
from dynamics.model import ModelSpec, x_infinity
from engines.kernels import EXTINCT, HIT, HORIZON, STATUS_NAMES, ssa_kernel
from engines.streams import replica_generator
from models.schemas import DEFAULT_MASTER_SEED, HittingSample
from utils.errors import InvalidN, RangeError
from utils.logging_config import log_with_replica_context


logger = logging.getLogger(__name__)

DEFAULT_T_MAX_MULTIPLIER = 10.0
ROUNDING_SLACK = 1e-9


@dataclass(frozen=True)
class LatticeStart:
    """Integer encoding of the start and the level: X = count * unit."""

    unit: float
    steps: np.ndarray
    start: int
    target: int


@lru_cache(maxsize=256)
def lattice_start(model: ModelSpec, n: int, r: float) -> LatticeStart:
    """
    Start count round(n x / unit) and threshold ceil(n r / unit).

    Raises:
        InvalidN: If n is not a positive integer
        RangeError: If r is outside (x, x_inf)
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n <= 0:
        raise InvalidN(f"n must be a positive integer, got {n!r}", {"n": str(n), "label": model.label})
    x_inf = x_infinity(model)
    if not model.start < r < x_inf:
        raise RangeError(
            f"level r={r} must lie in (x, x_inf) = ({model.start}, {x_inf})",
            {"r": r, "label": model.label},
        )

    unit, steps = model.lattice
    exact = n * model.start / unit
    start = int(round(exact))
    if abs(exact - start) > ROUNDING_SLACK:
        logger.warning(
            f"n*x/unit = {exact!r} is not an integer; starting from {start}",
            extra={"label": model.label},
        )
    target = int(math.ceil(n * r / unit - ROUNDING_SLACK))
    return LatticeStart(unit=unit, steps=steps, start=start, target=target)


@lru_cache(maxsize=64)
def default_t_max(model: ModelSpec, r: float, multiplier: float = DEFAULT_T_MAX_MULTIPLIER) -> float:
    """Censoring horizon multiplier * tau_r."""
    return multiplier * tau_quadrature(model, r)


def _python_ssa(model: ModelSpec, lattice: LatticeStart, n: int, t_max: float, rng, stride: int):
    """Same algorithm as ``ssa_kernel`` for rates without a piecewise-polynomial form."""
    state = lattice.start
    times, states = ([0.0], [float(state)]) if stride > 0 else ([], [])
    last_recorded = 0
    t = 0.0
    events = 0
    clamped = 0
    status = HIT
    while state < lattice.target:
        rates = model.rate_values(state * lattice.unit / n)
        negative = rates < 0.0
        clamped += int(negative.sum())
        rates = np.where(negative, 0.0, rates)
        total = float(rates.sum())
        if total <= 0.0:
            status = EXTINCT
            break

        wait = rng.standard_exponential() / (n * total)
        if t + wait > t_max:
            t, status = t_max, HORIZON
            break
        t += wait

        threshold = rng.random() * total
        partial = np.cumsum(rates)
        chosen = int(np.searchsorted(partial, threshold, side="right"))
        if chosen >= rates.size:
            chosen = int(np.flatnonzero(rates > 0)[-1])
        state += int(lattice.steps[chosen])
        events += 1

        if stride > 0 and events % stride == 0:
            times.append(t)
            states.append(float(state))
            last_recorded = events

    if stride > 0 and last_recorded != events:
        times.append(t)
        states.append(float(state))
    return status, t, events, state, clamped, np.asarray(times), np.asarray(states)


def _run(model: ModelSpec, n: int, r: float, seed: int, t_max: Optional[float], replica: int, stride: int):
    lattice = lattice_start(model, n, r)
    if t_max is None:
        t_max = default_t_max(model, r)
    if not t_max > 0:
        raise ValueError("t_max must be positive")

    rng = replica_generator(seed, replica)
    tables = model.kernel_tables
    if tables is None:
        outcome = _python_ssa(model, lattice, n, t_max, rng, stride)
    else:
        breaks, coefficients, pieces = tables
        outcome = ssa_kernel(
            rng, lattice.steps, lattice.unit, float(n), lattice.start, lattice.target,
            float(t_max), breaks, coefficients, pieces, stride,
        )
    return lattice, outcome


def _sample(lattice: LatticeStart, outcome, seed: int, replica: int) -> HittingSample:
    status, t, events, state, clamped = outcome[:5]
    status = int(status)
    if clamped:
        log_with_replica_context(logger, logging.WARNING, f"{clamped} rate evaluations clamped to 0", replica)
    return HittingSample(
        hit=status == HIT,
        tau=float(t),
        events=int(events),
        terminal_state=float(state) * lattice.unit,
        replica_seed=seed,
        replica=replica,
        censor_reason=STATUS_NAMES[status],
        clamped=int(clamped),
    )


def simulate_hitting(
    model: ModelSpec,
    n: int,
    r: float,
    seed: int = DEFAULT_MASTER_SEED,
    t_max: Optional[float] = None,
    replica: int = 0,
) -> HittingSample:
    """
    First time X^n / n reaches r, by exact event-driven simulation.

    Args:
        model: Validated model
        n: System size
        r: Level in (x, x_inf)
        seed: Master seed; together with ``replica`` it keys the random stream
        t_max: Censoring horizon, 10 tau_r when omitted
        replica: Replica index

    Returns:
        HittingSample; censored at total rate 0 (extinct) or at t_max (horizon)
    """
    lattice, outcome = _run(model, n, r, seed, t_max, replica, stride=0)
    return _sample(lattice, outcome, seed, replica)


def simulate_path(
    model: ModelSpec,
    n: int,
    r: float,
    seed: int = DEFAULT_MASTER_SEED,
    t_max: Optional[float] = None,
    record_stride: int = 1000,
    replica: int = 0,
) -> List[Tuple[float, float]]:
    """
    The trajectory (t, X_t / n) sampled every ``record_stride`` events.

    Uses the same stream as ``simulate_hitting`` so the terminal record
    matches its hitting sample.
    """
    if record_stride < 1:
        raise ValueError("record_stride must be a positive number of events")
    lattice, outcome = _run(model, n, r, seed, t_max, replica, stride=int(record_stride))
    times, states = outcome[5], outcome[6]
    densities = states * lattice.unit / n
    return list(zip(times.tolist(), densities.tolist()))


def simulate_batch(
    model: ModelSpec,
    n: int,
    r: float,
    seed: int,
    t_max: float,
    replicas: Sequence[int],
) -> List[HittingSample]:
    """Run a contiguous batch of replicas; used by the replica pool."""
    return [simulate_hitting(model, n, r, seed, t_max, replica) for replica in replicas]
