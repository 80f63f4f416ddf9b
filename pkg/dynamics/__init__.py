"""Model definitions and the analytic objects built on the fluid limit."""

from dynamics.fluid import FluidPath, solve_fluid, tau_of_r
from dynamics.model import ModelSpec, beta_of_u, birth_death, build_model, drift, pure_birth, sis, x_infinity
from dynamics.rates import (
    RateProfile,
    build_rate_profile,
    check_eq37_identity,
    clt_variance,
    local_ld_rate,
    mdp_rate,
    path_rate_I,
    path_rate_J,
    path_rate_K,
    variational_minimum,
)

__all__ = [
    "FluidPath",
    "ModelSpec",
    "RateProfile",
    "beta_of_u",
    "birth_death",
    "build_model",
    "build_rate_profile",
    "check_eq37_identity",
    "clt_variance",
    "drift",
    "local_ld_rate",
    "mdp_rate",
    "path_rate_I",
    "path_rate_J",
    "path_rate_K",
    "pure_birth",
    "sis",
    "solve_fluid",
    "tau_of_r",
    "variational_minimum",
    "x_infinity",
]
