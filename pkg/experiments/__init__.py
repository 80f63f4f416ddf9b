"""Replica experiments and the tail statistics they report."""

from experiments.mdp import compare_engines, run_clt_experiment, run_mdp_experiment
from experiments.statistics import EmpiricalCurve, TailCounts, band_report

__all__ = [
    "EmpiricalCurve",
    "TailCounts",
    "band_report",
    "compare_engines",
    "run_clt_experiment",
    "run_mdp_experiment",
]
