"""Subcommand handlers: each runs one operation and emits its CSVs."""

import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import Callable, Dict, List

import numpy as np

from cli.emitters import OutputWriter
from dynamics.checks import identity_suite, variational_suite
from dynamics.closed_forms import audit_sis_xi, birth_death_tau, birth_death_variance, sis_tau, sis_variance
from dynamics.fluid import solve_fluid, tau_estimates, tau_of_r
from dynamics.model import ModelSpec
from dynamics.rates import build_rate_profile, clt_variance, mdp_rate
from engines.diffusion import default_dt, simulate_diffusion_batch
from engines.oracle import build_chain, compare_survival, exact_mean_hitting
from engines.ssa import simulate_batch, simulate_path
from engines.streams import replica_generator
from experiments.mdp import COMPARISON_HEADER, compare_engines, run_clt_experiment, run_mdp_experiment
from experiments.statistics import CURVE_HEADER, DETAIL_HEADER, band_report, report_passes
from models.schemas import DiffusionConfig, RunConfig, StudyConfig, SystemConfig
from utils.errors import AllCensored, ConsistencyError
from workers.replica_processor import run_replicas


logger = logging.getLogger(__name__)

SAMPLE_HEADER = ("replica", "hit", "tau", "events", "censor_reason")


@dataclass
class CommandContext:
    run: RunConfig
    study: StudyConfig
    model: ModelSpec
    writer: OutputWriter
    system: SystemConfig

    @property
    def batch_size(self) -> int:
        return self.system.batchSize


def _sample_rows(samples):
    return [(s.replica, s.hit, s.tau, s.events, s.censor_reason) for s in samples]


def run_fluid(ctx: CommandContext) -> None:
    section = ctx.study.fluid
    path = solve_fluid(ctx.model, section.r, section.tol)
    samples = path.sample(section.points)
    rows = [(t, x, ctx.model.drift(x)) for t, x in samples]
    ctx.writer.emit("fluid", ("t", "x", "drift"), rows, r=section.r, horizon=path.horizon, steps=path.grid.size)
    print(f"fluid path reaches r={section.r} at t={path.horizon:.10f} ({path.grid.size} solver steps)")


def run_tau(ctx: CommandContext) -> None:
    section = ctx.study.fluid
    estimate = tau_estimates(ctx.model, section.r, section.tol)
    ctx.writer.emit(
        "tau",
        ("r", "quadrature", "event", "discrepancy", "agree"),
        [(estimate.r, estimate.quadrature, estimate.event, estimate.discrepancy, estimate.agree)],
    )
    print(f"tau_r quadrature: {estimate.quadrature:.6f}")
    print(f"tau_r ODE event:  {estimate.event:.6f}")
    print(f"agree: {estimate.agree}")


def run_rate(ctx: CommandContext) -> None:
    section = ctx.study.rate
    profile = build_rate_profile(ctx.model, section.r_stop or section.r, ctx.study.fluid.tol)
    sigma2 = clt_variance(profile, section.r)
    rows = [(t, mdp_rate(profile, section.r, t)) for t in section.t_grid]
    ctx.writer.emit("rate", ("t", "rate"), rows, r=section.r, sigma2=sigma2)
    print(f"sigma^2({section.r}) = {sigma2:.10g}")


def _closed_form_rows(model: ModelSpec, r: float, tol: float) -> List[tuple]:
    """Quadrature tau and sigma^2 against the closed forms that apply to this model."""
    p = model.parameters
    profile = build_rate_profile(model, r, tol)
    computed_tau, computed_var = tau_of_r(model, r, tol), clt_variance(profile, r)
    if model.label == "birth_death":
        exact = birth_death_tau(p["lambda"], p["theta"], r, p["x"]), birth_death_variance(p["lambda"], p["theta"], r, p["x"])
    elif model.label == "sis" and p.get("theta") == 1.0 and p.get("x") == 0.5 and p["lambda"] > 2:
        exact = sis_tau(p["lambda"], r), sis_variance(p["lambda"], r)
    else:
        return []
    return [
        ("tau", r, computed_tau, exact[0], abs(computed_tau - exact[0]) / exact[0]),
        ("sigma2", r, computed_var, exact[1], abs(computed_var - exact[1]) / exact[1]),
    ]


def run_check(ctx: CommandContext) -> None:
    section = ctx.study.rate
    rng = replica_generator(ctx.run.master_seed, 0)
    profile = build_rate_profile(ctx.model, section.r_stop or section.r, ctx.study.fluid.tol)
    failures = []

    identity = identity_suite(profile, rng, section.check_samples)
    ctx.writer.emit(
        "check_identity", ("r", "lhs", "rhs", "relerr"),
        [(c.r, c.lhs, c.rhs, c.relerr) for c in identity],
    )
    worst = max(c.relerr for c in identity)
    if worst > 1e-8:
        failures.append(f"identity relerr {worst:.3e}")

    variational = variational_suite(profile, rng, section.variational_samples, section.perturbed_paths)
    ctx.writer.emit(
        "check_variational",
        ("T", "a", "minimum", "extremal_rate", "smallest_perturbed", "extremal_relerr", "undercut", "passed"),
        [(c.T, c.a, c.minimum, c.extremal_rate, c.smallest_perturbed, c.extremal_relerr, c.undercut, c.passed)
         for c in variational],
    )
    if not all(c.passed for c in variational):
        failures.append("variational suite")

    closed = _closed_form_rows(ctx.model, section.r, ctx.study.fluid.tol)
    if closed:
        ctx.writer.emit("check_closed_form", ("quantity", "r", "computed", "closed_form", "relerr"), closed)
        if max(row[4] for row in closed) > 1e-8:
            failures.append("closed forms")

    p = ctx.model.parameters
    if ctx.model.label == "sis" and p.get("theta") == 1.0 and p.get("x") == 0.5 and p["lambda"] > 2:
        audit = audit_sis_xi(p["lambda"], section.audit_radii, ctx.study.fluid.tol)
        ctx.writer.emit(
            "check_xi",
            ("r", "quadrature_variance", "coarse_variance", "refined_variance", "exact_variance",
             "printed_xi", "amended_xi", "refinement_relerr", "quadrature_relerr", "exact_relerr",
             "printed_ratio", "amended_ratio"),
            [(a.r, a.quadrature_variance, a.coarse_variance, a.refined_variance, a.exact_variance,
              a.printed_xi, a.amended_xi, a.refinement_relerr, a.quadrature_relerr, a.exact_relerr,
              a.printed_ratio, a.amended_ratio) for a in audit],
        )
        for a in audit:
            print(f"r={a.r}: sigma^2={a.quadrature_variance:.12g}, printed Xi/lam^2 ratio {a.printed_ratio:.6g}")
        if max(a.refinement_relerr for a in audit) > 1e-8:
            failures.append("Xi audit mesh refinement")

    if failures:
        raise ConsistencyError(
            f"checks failed: {', '.join(failures)}",
            {"label": ctx.model.label, "failures": failures},
        )
    print(f"all checks passed for {ctx.model.label}")


def run_simulate(ctx: CommandContext) -> None:
    section = ctx.study.simulation
    seed = ctx.run.master_seed
    t_max = section.t_max_multiplier * tau_of_r(ctx.model, section.r, ctx.study.fluid.tol)
    task = partial(simulate_batch, ctx.model, section.n, section.r, seed, t_max)
    samples = run_replicas(task, section.replicas, ctx.run.workers, ctx.batch_size)
    hits = [s.tau for s in samples if s.hit]
    mean = float(np.mean(hits)) if hits else math.nan
    ctx.writer.emit("simulate", SAMPLE_HEADER, _sample_rows(samples), hits=len(hits), mean_tau=mean)

    path = simulate_path(ctx.model, section.n, section.r, seed, t_max, section.record_stride, replica=0)
    ctx.writer.emit("simulate_path", ("t", "x"), path, replica=0, record_stride=section.record_stride)
    print(f"{len(hits)}/{len(samples)} replicas hit r={section.r}; mean tau {mean:.8g}")


def run_diffusion(ctx: CommandContext) -> None:
    section = ctx.study.diffusion
    tau_r = tau_of_r(ctx.model, section.r, ctx.study.fluid.tol)
    config = DiffusionConfig(
        n=section.n,
        dt=section.dt if section.dt is not None else default_dt(tau_r),
        bridge_correction=section.bridge_correction,
        seed=ctx.run.master_seed,
        t_max=section.t_max_multiplier * tau_r,
        noise=section.noise,
    )
    task = partial(simulate_diffusion_batch, ctx.model, config, section.r, tau_r)
    samples = run_replicas(task, section.replicas, ctx.run.workers, ctx.batch_size)
    hits = [s.tau for s in samples if s.hit]
    mean = float(np.mean(hits)) if hits else math.nan
    ctx.writer.emit(
        "diffusion", ("replica", "hit", "tau", "steps", "censor_reason"), _sample_rows(samples),
        dt=config.dt, hits=len(hits), mean_tau=mean,
    )
    print(f"{len(hits)}/{len(samples)} replicas hit r={section.r} at dt={config.dt:.3g}; mean tau {mean:.8g}")


def run_oracle(ctx: CommandContext) -> None:
    section = ctx.study.oracle
    chain = build_chain(ctx.model, section.n, section.r, section.absorb_zero)
    moments = exact_mean_hitting(chain, chain.initial, conditional=True)

    # no horizon: censoring would bias the moments
    task = partial(simulate_batch, ctx.model, section.n, section.r, ctx.run.master_seed, math.inf)
    samples = run_replicas(task, section.replicas, ctx.run.workers, ctx.batch_size)
    comparison = compare_survival(chain, chain.initial, samples, section.t_grid, section.confidence)

    taus = np.array([s.tau for s in samples if s.hit])
    if taus.size == 0:
        raise AllCensored(
            f"no replica hit r={section.r}",
            {"n": section.n, "r": section.r, "replicas": section.replicas},
        )
    sample_mean = float(taus.mean())
    standard_error = float(taus.std(ddof=1) / math.sqrt(taus.size)) if taus.size > 1 else math.nan
    z = (sample_mean - moments.mean) / standard_error if standard_error else math.nan

    eps = comparison.epsilon
    ctx.writer.emit(
        "oracle",
        ("t", "exact_survival", "empirical_survival", "band_lo", "band_hi"),
        [(t, ex, em, max(0.0, em - eps), min(1.0, em + eps))
         for t, ex, em in zip(comparison.t_grid, comparison.exact, comparison.empirical)],
        epsilon=eps, within_band=comparison.all_within,
    )
    ctx.writer.emit(
        "oracle_moments",
        ("hit_probability", "exact_mean", "exact_second_moment", "sample_mean", "standard_error", "z_score"),
        [(moments.hit_probability, moments.mean, moments.second_moment, sample_mean, standard_error, z)],
    )
    print(f"exact conditional mean {moments.mean:.8g}, hit probability {moments.hit_probability:.8g}")
    print(f"sample mean {sample_mean:.8g} (z={z:.3g}); survival within DKW band: {comparison.all_within}")


def run_mdp(ctx: CommandContext) -> None:
    cfg = ctx.study.experiment_config(ctx.run.master_seed)
    curve = run_mdp_experiment(cfg, ctx.run.workers, ctx.batch_size)
    report = band_report(curve, cfg.min_count)
    summary = dict(
        tau_r=curve.tau_r, censored_fraction=curve.censored_fraction, replicas=curve.replicas,
        bands_contain_rate=report_passes(report),
    )
    ctx.writer.emit("mdp", CURVE_HEADER, curve.rows(), **summary)
    ctx.writer.emit("mdp_detail", DETAIL_HEADER, curve.detail_rows(), **summary)
    for row in report:
        if row.upper_contains is not None or row.lower_contains is not None:
            print(f"t={row.t:.2f}: upper {row.upper_contains} ({row.upper_count}), "
                  f"lower {row.lower_contains} ({row.lower_count})")


def run_clt(ctx: CommandContext) -> None:
    cfg = ctx.study.experiment_config(ctx.run.master_seed)
    summary = run_clt_experiment(cfg, ctx.run.workers, ctx.batch_size)
    ctx.writer.emit(
        "clt",
        ("tau_r", "sample_mean", "standard_error", "mean_z_score", "sample_var_scaled", "predicted_var",
         "variance_ratio", "anderson_statistic", "anderson_critical_5pct", "hits", "replicas"),
        [(summary.tau_r, summary.sample_mean, summary.standard_error, summary.mean_z_score,
          summary.sample_var_scaled, summary.predicted_var, summary.variance_ratio,
          summary.anderson_statistic, summary.anderson_critical_5pct, summary.hits, summary.replicas)],
    )
    print(f"mean {summary.sample_mean:.8g} vs tau_r {summary.tau_r:.8g} (z={summary.mean_z_score:.3g})")
    print(f"scaled variance {summary.sample_var_scaled:.6g} vs {summary.predicted_var:.6g}")


def run_compare(ctx: CommandContext) -> None:
    cfg = ctx.study.experiment_config(ctx.run.master_seed)
    comparison = compare_engines(cfg, ctx.run.workers, ctx.batch_size)
    verdicts = [v for v in comparison.consistent if v is not None]
    ctx.writer.emit(
        "compare", COMPARISON_HEADER, comparison.rows(),
        consistent_points=sum(verdicts), compared_points=len(verdicts),
    )
    print(f"engines band-consistent at {sum(verdicts)} of {len(verdicts)} comparable t")


COMMANDS: Dict[str, Callable[[CommandContext], None]] = {
    "fluid": run_fluid,
    "tau": run_tau,
    "rate": run_rate,
    "check": run_check,
    "simulate": run_simulate,
    "diffusion": run_diffusion,
    "oracle": run_oracle,
    "mdp": run_mdp,
    "clt": run_clt,
    "compare": run_compare,
}
