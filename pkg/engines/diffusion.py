"""Euler-Maruyama simulation of the diffusion approximation and its hitting time."""

import logging
import math
from typing import List, Optional, Sequence

import numpy as np

from dynamics.fluid import tau_quadrature
from dynamics.model import ModelSpec, x_infinity
from engines.kernels import EXTINCT, HIT, HORIZON, STATUS_NAMES, euler_maruyama_kernel
from engines.streams import replica_generator
from models.schemas import DiffusionConfig, HittingSample
from utils.errors import InvalidStep, RangeError
from utils.logging_config import log_with_replica_context


logger = logging.getLogger(__name__)

MAX_DT = 1e-3
STEPS_PER_TAU = 1000
MIN_STEPS_PER_TAU = 100


def default_dt(tau_r: float) -> float:
    """min(1e-3, tau_r / 1000)."""
    return min(MAX_DT, tau_r / STEPS_PER_TAU)


def diffusion_config(
    model: ModelSpec,
    r: float,
    n: int,
    seed: int,
    dt: Optional[float] = None,
    bridge_correction: bool = True,
    noise: bool = True,
    t_max_multiplier: float = 10.0,
) -> DiffusionConfig:
    """DiffusionConfig with dt and t_max defaulted from tau_r."""
    tau_r = tau_quadrature(model, r)
    return DiffusionConfig(
        n=n,
        dt=default_dt(tau_r) if dt is None else dt,
        bridge_correction=bridge_correction,
        seed=seed,
        t_max=t_max_multiplier * tau_r,
        noise=noise,
    )


def _python_euler_maruyama(model: ModelSpec, cfg: DiffusionConfig, r: float, rng):
    """Same scheme as ``euler_maruyama_kernel`` for closure rates."""
    z = model.start
    jumps = model.jump_array
    sqrt_dt = math.sqrt(cfg.dt)
    clamped = 0
    steps = 0
    if z >= r:
        return HIT, 0.0, 0, z, 0
    while True:
        t = steps * cfg.dt
        if t >= cfg.t_max:
            return HORIZON, cfg.t_max, steps, z, clamped
        rates = model.rate_values(z)
        clamped += int((rates < 0.0).sum())
        rates = np.maximum(rates, 0.0)
        drift = float(jumps @ rates)
        beta = float((jumps ** 2) @ rates)
        if z <= model.domain.lower and drift <= 0.0:
            return EXTINCT, t, steps, z, clamped

        xi = rng.standard_normal()
        v = rng.random()
        if not cfg.noise:
            xi = 0.0
        z_next = z + drift * cfg.dt + math.sqrt(beta / cfg.n) * sqrt_dt * xi
        steps += 1
        if z_next >= r:
            return HIT, t + (r - z) / (z_next - z) * cfg.dt, steps, z_next, clamped
        if cfg.bridge_correction and cfg.noise and beta > 0.0:
            if v < math.exp(-2.0 * (r - z) * (r - z_next) * cfg.n / (beta * cfg.dt)):
                return HIT, t + 0.5 * cfg.dt, steps, r, clamped
        z = z_next


def simulate_diffusion_hitting(
    model: ModelSpec,
    cfg: DiffusionConfig,
    r: float,
    replica: int = 0,
    tau_r: Optional[float] = None,
) -> HittingSample:
    """
    First time Z^n reaches r under Euler-Maruyama with optional bridge correction.

    Args:
        model: Validated model
        cfg: Step size, system size, seed, horizon and flags
        r: Level in (x, x_inf)
        replica: Replica index keying the random stream with ``cfg.seed``
        tau_r: Precomputed deterministic hitting time, to skip the quadrature

    Returns:
        HittingSample with ``events`` counting Euler steps

    Raises:
        RangeError: If r is outside (x, x_inf)
        InvalidStep: If dt > tau_r / 100
    """
    x_inf = x_infinity(model)
    if not model.start < r < x_inf:
        raise RangeError(
            f"level r={r} must lie in (x, x_inf) = ({model.start}, {x_inf})",
            {"r": r, "label": model.label},
        )
    if tau_r is None:
        tau_r = tau_quadrature(model, r)
    if cfg.dt > tau_r / MIN_STEPS_PER_TAU:
        raise InvalidStep(
            f"dt={cfg.dt} exceeds tau_r/{MIN_STEPS_PER_TAU} = {tau_r / MIN_STEPS_PER_TAU}",
            {"dt": cfg.dt, "tau_r": tau_r, "label": model.label},
        )

    rng = replica_generator(cfg.seed, replica)
    tables = model.kernel_tables
    if tables is None:
        status, t, steps, z, clamped = _python_euler_maruyama(model, cfg, r, rng)
    else:
        breaks, coefficients, pieces = tables
        status, t, steps, z, clamped = euler_maruyama_kernel(
            rng, model.jump_array, float(cfg.n), float(model.start), float(r), cfg.dt, cfg.t_max,
            breaks, coefficients, pieces, cfg.bridge_correction, cfg.noise, float(model.domain.lower),
        )

    status = int(status)
    if clamped:
        log_with_replica_context(
            logger, logging.WARNING, f"Z left the domain: {clamped} rate evaluations clamped to 0", replica
        )
    return HittingSample(
        hit=status == HIT,
        tau=float(t),
        events=int(steps),
        terminal_state=float(z),
        replica_seed=cfg.seed,
        replica=replica,
        censor_reason=STATUS_NAMES[status],
        clamped=int(clamped),
    )


def simulate_diffusion_batch(
    model: ModelSpec,
    cfg: DiffusionConfig,
    r: float,
    tau_r: float,
    replicas: Sequence[int],
) -> List[HittingSample]:
    return [simulate_diffusion_hitting(model, cfg, r, replica, tau_r) for replica in replicas]
