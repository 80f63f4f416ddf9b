"""Shared fixtures: the three built-in models and their rate profiles."""

import json
import math

import pytest

from dynamics.model import birth_death, pure_birth, sis
from dynamics.rates import build_rate_profile
from models.schemas import HittingSample


@pytest.fixture(scope="session")
def bd():
    """birth_death(1.1, 1) from x = 1."""
    return birth_death(1.1, 1.0, 1.0)


@pytest.fixture(scope="session")
def sis_model():
    return sis(3.0, 1.0, 0.5)


@pytest.fixture(scope="session")
def yule():
    return pure_birth(1.0, 1.0)


@pytest.fixture(scope="session")
def bd_profile(bd):
    return build_rate_profile(bd, 2.0)


@pytest.fixture(scope="session")
def sis_profile(sis_model):
    return build_rate_profile(sis_model, 0.65)


def make_sample(tau: float, hit: bool = True, replica: int = 0, reason: str = None) -> HittingSample:
    return HittingSample(
        hit=hit,
        tau=tau,
        events=1,
        terminal_state=2.0 if hit else 0.0,
        replica_seed=1,
        replica=replica,
        censor_reason=None if hit else (reason or "horizon"),
    )


@pytest.fixture
def write_config(tmp_path):
    """Write a study dict to a JSON file and return its path as a string."""

    def write(study: dict, name: str = "study.json") -> str:
        path = tmp_path / name
        path.write_text(json.dumps(study))
        return str(path)

    return write


BIRTH_DEATH_STUDY = {
    "model": {"model": "birth_death", "lambda": 1.1, "theta": 1.0, "x": 1.0},
    "fluid": {"r": 2.0},
    "rate": {"r": 2.0, "t_grid": [0.0, 1.0, 2.0], "check_samples": 3,
             "variational_samples": 3, "perturbed_paths": 5},
    "simulation": {"n": 100, "r": 2.0, "replicas": 20, "record_stride": 50},
    "diffusion": {"n": 100, "r": 2.0, "replicas": 10},
    "oracle": {"n": 2, "r": 2.0, "replicas": 500, "t_grid": [0.0, 5.0, 10.0]},
    "experiment": {"n": 100, "r": 2.0, "replicas": 100, "t_grid": [0.0, 0.5, 1.0]},
}

LN2_OVER_TENTH = math.log(2.0) / 0.1
