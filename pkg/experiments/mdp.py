"""Replica experiments: moderate-deviation curves, CLT statistics, engine comparison."""

import logging
import math
from dataclasses import dataclass
from functools import partial, reduce
from typing import List, Optional, Tuple

import numpy as np
from scipy.stats import anderson

from dynamics.fluid import tau_of_r
from dynamics.model import ModelSpec, build_model
from dynamics.rates import build_rate_profile, clt_variance, mdp_rate
from engines.diffusion import default_dt, simulate_diffusion_batch
from engines.ssa import simulate_batch
from experiments.statistics import EmpiricalCurve, TailCounts, build_curve
from models.schemas import DiffusionConfig, ExperimentConfig, HittingSample, SystemConfig
from utils.errors import AllCensored
from workers.replica_processor import run_replicas


logger = logging.getLogger(__name__)

TAU_TOLERANCE = 1e-10


@dataclass(frozen=True)
class ReplicaRun:
    """Samples of one engine run with the analytic anchors they are compared to."""

    model: ModelSpec
    tau_r: float
    samples: List[HittingSample]


def _pool_settings(workers: Optional[int], batch_size: Optional[int]) -> Tuple[int, int]:
    system = SystemConfig.from_env()
    return workers or system.maxConcurrentWorkers, batch_size or system.batchSize


def collect_samples(
    cfg: ExperimentConfig,
    workers: Optional[int] = None,
    batch_size: Optional[int] = None,
) -> ReplicaRun:
    """
    Run ``cfg.replicas`` replicas of the configured engine.

    Replica i always uses the stream keyed by (master_seed, i), so the
    samples do not depend on the worker count or the batch size.

    Raises:
        AllCensored: If no replica hit the level
    """
    workers, batch_size = _pool_settings(workers, batch_size)
    model = build_model(cfg.model)
    tau_r = tau_of_r(model, cfg.r, TAU_TOLERANCE)
    t_max = cfg.t_max_multiplier * tau_r

    if cfg.engine == "ssa":
        task = partial(simulate_batch, model, cfg.n, cfg.r, cfg.master_seed, t_max)
    else:
        diffusion = DiffusionConfig(
            n=cfg.n,
            dt=cfg.dt if cfg.dt is not None else default_dt(tau_r),
            bridge_correction=cfg.bridge_correction,
            seed=cfg.master_seed,
            t_max=t_max,
            noise=cfg.noise,
        )
        task = partial(simulate_diffusion_batch, model, diffusion, cfg.r, tau_r)

    logger.info(
        f"Running {cfg.replicas} {cfg.engine} replicas of {model.label} at n={cfg.n}, r={cfg.r} "
        f"(tau_r={tau_r:.10g}, seed={cfg.master_seed})"
    )
    samples = run_replicas(task, cfg.replicas, workers, batch_size)

    hits = sum(s.hit for s in samples)
    if hits == 0:
        raise AllCensored(
            f"none of {cfg.replicas} replicas reached r={cfg.r} before censoring",
            {"replicas": cfg.replicas, "n": cfg.n, "r": cfg.r, "engine": cfg.engine, "t_max": t_max},
        )
    censored = len(samples) - hits
    if censored:
        logger.warning(f"{censored} of {len(samples)} replicas were censored")
    return ReplicaRun(model=model, tau_r=tau_r, samples=samples)


def tail_counts(cfg: ExperimentConfig, run: ReplicaRun, batch_size: Optional[int] = None) -> TailCounts:
    """Fold per-batch tail counts into one."""
    _, batch_size = _pool_settings(None, batch_size)
    chunks = [run.samples[i:i + batch_size] for i in range(0, len(run.samples), batch_size)]
    return reduce(
        TailCounts.merge,
        (TailCounts.from_samples(chunk, cfg.t_grid, run.tau_r, cfg.n, cfg.a_n) for chunk in chunks),
        TailCounts.empty(cfg.t_grid),
    )


def run_mdp_experiment(
    cfg: ExperimentConfig,
    workers: Optional[int] = None,
    batch_size: Optional[int] = None,
) -> EmpiricalCurve:
    """
    Empirical upper and lower tail rates of the scaled hitting-time deviation.

    Args:
        cfg: Experiment configuration
        workers: Concurrent batches; HITTIME_WORKERS when omitted
        batch_size: Replicas per batch; HITTIME_BATCH_SIZE when omitted

    Returns:
        EmpiricalCurve with t^2 / (2 sigma^2(r)) attached as the rate column

    Raises:
        AllCensored: If no replica hit the level
    """
    run = collect_samples(cfg, workers, batch_size)
    profile = build_rate_profile(run.model, cfg.r, TAU_TOLERANCE)
    rate = [mdp_rate(profile, cfg.r, t) for t in cfg.t_grid]

    counts = tail_counts(cfg, run, batch_size)
    curve = build_curve(counts, cfg.n, cfg.a_n, rate, cfg.confidence, cfg.engine, run.tau_r)
    logger.info(
        f"MDP curve for {run.model.label}: {counts.hits}/{counts.replicas} hits, "
        f"censored fraction {counts.censored_fraction:.3g}, "
        f"{int(np.sum(curve.upper_count >= cfg.min_count))} upper-tail points above the count floor"
    )
    return curve


@dataclass(frozen=True)
class CltSummary:
    """Sample statistics of sqrt(n)(tau^n - tau_r) among replicas that hit."""

    sample_mean: float
    standard_error: float
    sample_var_scaled: float
    predicted_var: float
    anderson_statistic: float
    anderson_critical_5pct: float
    tau_r: float
    hits: int
    replicas: int

    @property
    def mean_z_score(self) -> float:
        """(mean - tau_r) in standard errors."""
        if self.standard_error == 0.0:
            return 0.0 if self.sample_mean == self.tau_r else math.inf
        return (self.sample_mean - self.tau_r) / self.standard_error

    @property
    def variance_ratio(self) -> float:
        return self.sample_var_scaled / self.predicted_var


def run_clt_experiment(
    cfg: ExperimentConfig,
    workers: Optional[int] = None,
    batch_size: Optional[int] = None,
) -> CltSummary:
    """
    Sample mean of tau^n and sample variance of sqrt(n)(tau^n - tau_r)
    against clt_variance(r), with an Anderson-Darling normality statistic.
    """
    run = collect_samples(cfg, workers, batch_size)
    profile = build_rate_profile(run.model, cfg.r, TAU_TOLERANCE)
    predicted = clt_variance(profile, cfg.r)

    taus = np.array([s.tau for s in run.samples if s.hit])
    scaled = math.sqrt(cfg.n) * (taus - run.tau_r)
    mean = float(taus.mean())
    variance = float(scaled.var(ddof=1)) if taus.size > 1 else 0.0
    standard_error = math.sqrt(float(taus.var(ddof=1)) / taus.size) if taus.size > 1 else 0.0

    statistic, critical = math.nan, math.nan
    if variance > 0.0 and taus.size >= 8:
        result = anderson(scaled, dist="norm")
        statistic = float(result.statistic)
        critical = float(result.critical_values[list(result.significance_level).index(5.0)])

    summary = CltSummary(
        sample_mean=mean,
        standard_error=standard_error,
        sample_var_scaled=variance,
        predicted_var=predicted,
        anderson_statistic=statistic,
        anderson_critical_5pct=critical,
        tau_r=run.tau_r,
        hits=int(taus.size),
        replicas=len(run.samples),
    )
    logger.info(
        f"CLT for {run.model.label}: mean {mean:.8g} (z={summary.mean_z_score:.3g}), "
        f"scaled variance {variance:.6g} vs {predicted:.6g}, A^2={statistic:.4g}"
    )
    return summary


COMPARISON_HEADER = (
    "t", "rate",
    "ssa_upper_count", "ssa_upper_est", "ssa_band_lo", "ssa_band_hi",
    "diffusion_upper_count", "diffusion_upper_est", "diffusion_band_lo", "diffusion_band_hi",
    "consistent",
)


@dataclass(frozen=True, eq=False)
class EngineComparison:
    ssa: EmpiricalCurve
    diffusion: EmpiricalCurve
    min_count: int

    @property
    def consistent(self) -> List[Optional[bool]]:
        """
        Per t: each engine's upper estimate lies in the other's Wilson band.
        None where either upper count is below the floor.
        """
        verdicts = []
        for k in range(self.ssa.t_grid.size):
            if min(self.ssa.upper_count[k], self.diffusion.upper_count[k]) < self.min_count:
                verdicts.append(None)
                continue
            a, b = self.ssa, self.diffusion
            verdicts.append(bool(
                b.band_lo[k] <= a.upper_estimate[k] <= b.band_hi[k]
                and a.band_lo[k] <= b.upper_estimate[k] <= a.band_hi[k]
            ))
        return verdicts

    def rows(self) -> List[tuple]:
        a, b = self.ssa, self.diffusion
        rows = []
        for k, verdict in enumerate(self.consistent):
            rows.append((
                a.t_grid[k], a.rate[k],
                int(a.upper_count[k]), a.upper_estimate[k], a.band_lo[k], a.band_hi[k],
                int(b.upper_count[k]), b.upper_estimate[k], b.band_lo[k], b.band_hi[k],
                "" if verdict is None else int(verdict),
            ))
        return rows


def compare_engines(
    cfg: ExperimentConfig,
    workers: Optional[int] = None,
    batch_size: Optional[int] = None,
) -> EngineComparison:
    """Run the same experiment on both engines with a shared t grid and rate column."""
    ssa_curve = run_mdp_experiment(cfg.model_copy(update={"engine": "ssa"}), workers, batch_size)
    diffusion_curve = run_mdp_experiment(cfg.model_copy(update={"engine": "diffusion"}), workers, batch_size)
    comparison = EngineComparison(ssa=ssa_curve, diffusion=diffusion_curve, min_count=cfg.min_count)
    failed = [float(t) for t, v in zip(ssa_curve.t_grid, comparison.consistent) if v is False]
    if failed:
        logger.warning(f"Engines are not band-consistent at t={failed}")
    return comparison
