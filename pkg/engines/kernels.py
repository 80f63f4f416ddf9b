"""
Compiled inner loops for the jump-chain and diffusion engines.

Rates reach the kernels as padded piecewise-polynomial tables (see
``dynamics.rate_functions.pack_ppolys``), so no Python callback happens per
event. Every kernel takes a numpy ``Generator`` and releases the GIL, which
lets the replica pool run batches on plain threads.
"""

import numpy as np
from numba import njit


HIT = 0
EXTINCT = 1
HORIZON = 2

STATUS_NAMES = (None, "extinct", "horizon")

INITIAL_RECORDS = 1024


@njit(nogil=True, cache=True)
def ppoly_value(breaks, coefficients, pieces, i, u):
    """Horner evaluation of rate i at u; the end pieces extrapolate."""
    count = pieces[i]
    lo = 0
    hi = count - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if breaks[i, mid] <= u:
            lo = mid
        else:
            hi = mid - 1
    dx = u - breaks[i, lo]
    value = 0.0
    for d in range(coefficients.shape[1]):
        value = value * dx + coefficients[i, d, lo]
    return value


@njit(nogil=True, cache=True)
def evaluate_rates(breaks, coefficients, pieces, u, out):
    """Fill ``out`` with max(F_i(u), 0); returns how many were clamped."""
    clamped = 0
    for i in range(out.shape[0]):
        value = ppoly_value(breaks, coefficients, pieces, i, u)
        if value < 0.0:
            value = 0.0
            clamped += 1
        out[i] = value
    return clamped


@njit(nogil=True, cache=True)
def _grow(array):
    out = np.empty(2 * array.shape[0])
    out[:array.shape[0]] = array
    return out


@njit(nogil=True, cache=True)
def ssa_kernel(rng, steps, unit, n, state, target, t_max, breaks, coefficients, pieces, stride):
    """
    Direct-method simulation of X until X >= target * unit.

    The state is the integer count X / unit. With ``stride`` > 0 the start,
    every stride-th event and the terminal state are recorded.

    Returns:
        (status, time, events, state, clamped, record_times, record_states)
    """
    reactions = steps.shape[0]
    rates = np.empty(reactions)
    scale = unit / n

    record_times = np.empty(INITIAL_RECORDS if stride > 0 else 1)
    record_states = np.empty(INITIAL_RECORDS if stride > 0 else 1)
    recorded = 0
    last_recorded = -1
    if stride > 0:
        record_times[0] = 0.0
        record_states[0] = state
        recorded = 1
        last_recorded = 0

    t = 0.0
    events = 0
    clamped = 0
    status = HIT
    while state < target:
        clamped += evaluate_rates(breaks, coefficients, pieces, state * scale, rates)
        total = 0.0
        for i in range(reactions):
            total += rates[i]
        if total <= 0.0:
            status = EXTINCT
            break

        wait = rng.standard_exponential() / (n * total)
        if t + wait > t_max:
            t = t_max
            status = HORIZON
            break
        t += wait

        threshold = rng.random() * total
        chosen = -1
        acc = 0.0
        for i in range(reactions):
            acc += rates[i]
            if threshold < acc:
                chosen = i
                break
        if chosen < 0:
            # rounding pushed the draw past the last partial sum
            for i in range(reactions):
                if rates[i] > 0.0:
                    chosen = i
        state += steps[chosen]
        events += 1

        if stride > 0 and events % stride == 0:
            if recorded == record_times.shape[0]:
                record_times = _grow(record_times)
                record_states = _grow(record_states)
            record_times[recorded] = t
            record_states[recorded] = state
            recorded += 1
            last_recorded = events

    if stride > 0 and last_recorded != events:
        if recorded == record_times.shape[0]:
            record_times = _grow(record_times)
            record_states = _grow(record_states)
        record_times[recorded] = t
        record_states[recorded] = state
        recorded += 1

    return status, t, events, state, clamped, record_times[:recorded], record_states[:recorded]


@njit(nogil=True, cache=True)
def euler_maruyama_kernel(rng, jumps, n, z, r, dt, t_max, breaks, coefficients, pieces, bridge, noise, lower):
    """
    Euler-Maruyama for dZ = drift(Z) dt + sqrt(beta(Z)/n) dW until Z >= r.

    Each step draws one normal and one uniform whatever the flags, so runs
    with and without noise or bridge correction share their random numbers.

    Returns:
        (status, time, steps, z, clamped)
    """
    reactions = jumps.shape[0]
    rates = np.empty(reactions)
    sqrt_dt = np.sqrt(dt)
    clamped = 0
    steps = 0
    if z >= r:
        return HIT, 0.0, 0, z, 0

    while True:
        t = steps * dt
        if t >= t_max:
            return HORIZON, t_max, steps, z, clamped

        clamped += evaluate_rates(breaks, coefficients, pieces, z, rates)
        drift = 0.0
        beta = 0.0
        for i in range(reactions):
            drift += jumps[i] * rates[i]
            beta += jumps[i] * jumps[i] * rates[i]
        if z <= lower and drift <= 0.0:
            return EXTINCT, t, steps, z, clamped

        xi = rng.standard_normal()
        v = rng.random()
        if not noise:
            xi = 0.0
        z_next = z + drift * dt + np.sqrt(beta / n) * sqrt_dt * xi
        steps += 1

        if z_next >= r:
            return HIT, t + (r - z) / (z_next - z) * dt, steps, z_next, clamped
        if bridge and noise and beta > 0.0:
            crossing = np.exp(-2.0 * (r - z) * (r - z_next) * n / (beta * dt))
            if v < crossing:
                return HIT, t + 0.5 * dt, steps, r, clamped
        z = z_next
