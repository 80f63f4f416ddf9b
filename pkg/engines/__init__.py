"""Simulation engines and the exact small-instance oracle."""

from engines.diffusion import simulate_diffusion_hitting
from engines.oracle import build_chain, exact_mean_hitting, exact_survival
from engines.ssa import simulate_hitting, simulate_path

__all__ = [
    "build_chain",
    "exact_mean_hitting",
    "exact_survival",
    "simulate_diffusion_hitting",
    "simulate_hitting",
    "simulate_path",
]
