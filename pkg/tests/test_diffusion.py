"""Tests for the Euler-Maruyama engine."""

import math

import numpy as np
import pytest

from engines.diffusion import default_dt, diffusion_config, simulate_diffusion_batch, simulate_diffusion_hitting
from models.schemas import DiffusionConfig
from utils.errors import InvalidStep, RangeError


SEED = 20230519
TAU_BD = math.log(2.0) / 0.1


def test_default_dt():
    assert default_dt(TAU_BD) == 1e-3
    assert default_dt(0.5) == pytest.approx(5e-4)


def test_diffusion_config_defaults(bd):
    cfg = diffusion_config(bd, 2.0, 10_000, SEED)
    assert cfg.dt == 1e-3
    assert cfg.t_max == pytest.approx(10.0 * TAU_BD, rel=1e-8)
    assert cfg.bridge_correction and cfg.noise


def test_step_too_large(bd):
    cfg = DiffusionConfig(n=100, dt=0.1, seed=SEED, t_max=70.0)
    with pytest.raises(InvalidStep):
        simulate_diffusion_hitting(bd, cfg, 2.0)


def test_level_out_of_range(sis_model):
    cfg = DiffusionConfig(n=100, dt=1e-4, seed=SEED, t_max=10.0)
    with pytest.raises(RangeError):
        simulate_diffusion_hitting(sis_model, cfg, 0.8)


def test_noise_free_scheme_tracks_fluid(bd):
    cfg = diffusion_config(bd, 2.0, 100, SEED, noise=False)
    sample = simulate_diffusion_hitting(bd, cfg, 2.0, tau_r=TAU_BD)
    assert sample.hit
    assert sample.tau == pytest.approx(TAU_BD, abs=5e-3)


def test_reproducible(bd):
    cfg = diffusion_config(bd, 2.0, 1000, SEED)
    first = simulate_diffusion_hitting(bd, cfg, 2.0, replica=4, tau_r=TAU_BD)
    assert first == simulate_diffusion_hitting(bd, cfg, 2.0, replica=4, tau_r=TAU_BD)


def test_hit_time_within_last_step(bd):
    cfg = diffusion_config(bd, 2.0, 1000, SEED, bridge_correction=False)
    for sample in simulate_diffusion_batch(bd, cfg, 2.0, TAU_BD, range(10)):
        if sample.hit:
            assert (sample.events - 1) * cfg.dt < sample.tau <= sample.events * cfg.dt + 1e-12


def test_bridge_only_brings_hits_forward(bd):
    # both runs consume the same draws, so the bridge can only stop a path earlier
    plain = diffusion_config(bd, 2.0, 500, SEED, bridge_correction=False)
    bridged = diffusion_config(bd, 2.0, 500, SEED, bridge_correction=True)
    for replica in range(20):
        a = simulate_diffusion_hitting(bd, plain, 2.0, replica, TAU_BD)
        b = simulate_diffusion_hitting(bd, bridged, 2.0, replica, TAU_BD)
        if a.hit:
            assert b.hit
            assert b.tau <= a.tau + 1e-12


def test_mean_close_to_tau(bd):
    cfg = diffusion_config(bd, 2.0, 10_000, SEED)
    samples = simulate_diffusion_batch(bd, cfg, 2.0, TAU_BD, range(200))
    taus = [s.tau for s in samples if s.hit]
    assert len(taus) == 200
    # sd of tau is sqrt(1050 / n) ~ 0.32
    assert sum(taus) / len(taus) == pytest.approx(TAU_BD, abs=0.1)


def test_halving_dt_keeps_mean(bd):
    means, errors = [], []
    for dt in (1e-3, 5e-4):
        cfg = diffusion_config(bd, 2.0, 1000, SEED, dt=dt)
        taus = np.array([s.tau for s in simulate_diffusion_batch(bd, cfg, 2.0, TAU_BD, range(300))])
        means.append(taus.mean())
        errors.append(taus.std(ddof=1) / math.sqrt(taus.size))
    assert abs(means[0] - means[1]) < 4.0 * math.hypot(*errors)


def test_small_population_goes_extinct(bd):
    # at n = 1 the noise dwarfs the drift and about half the paths reach 0 first
    cfg = DiffusionConfig(n=1, dt=1e-3, seed=SEED, t_max=70.0)
    samples = simulate_diffusion_batch(bd, cfg, 2.0, TAU_BD, range(50))
    extinct = [s for s in samples if s.censor_reason == "extinct"]
    assert extinct
    for sample in extinct:
        assert not sample.hit
        assert sample.terminal_state <= 0.0
        assert sample.tau < cfg.t_max
    assert all(s.censor_reason is None for s in samples if s.hit)
