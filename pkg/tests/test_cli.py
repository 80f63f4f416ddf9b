"""End-to-end tests of the hittime command line."""

import copy
import json
import logging
import math

import numpy as np
import pytest

from cli import apply_overrides, format_value, load_study, main
from utils.errors import ConfigParseError

from conftest import BIRTH_DEATH_STUDY


SIS_STUDY = {
    "model": {"model": "sis", "lambda": 3.0, "theta": 1.0, "x": 0.5},
    "fluid": {"r": 0.6},
    "rate": {"r": 0.6, "r_stop": 0.65, "t_grid": [0.0, 1.0], "check_samples": 3,
             "variational_samples": 2, "perturbed_paths": 5, "audit_radii": [0.55, 0.6]},
}


@pytest.fixture(autouse=True)
def restore_root_logger():
    """main() installs its own stderr handler; put the root logger back afterwards."""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def bd_config(write_config):
    return write_config(copy.deepcopy(BIRTH_DEATH_STUDY))


def run_cli(subcommand, config, output, *extra):
    return main([subcommand, "--config", config, "--output", str(output), *extra])


class TestOverrides:

    def test_dotted_keys(self):
        raw = {"experiment": {"n": 10}}
        apply_overrides(raw, ["experiment.n=1000", "experiment.engine=diffusion", "oracle.t_grid=[0, 1]"])
        assert raw == {"experiment": {"n": 1000, "engine": "diffusion"}, "oracle": {"t_grid": [0, 1]}}

    def test_rejects_non_section(self):
        with pytest.raises(ConfigParseError):
            apply_overrides({"experiment": 3}, ["experiment.n=5"])

    def test_rejects_missing_equals(self):
        with pytest.raises(ConfigParseError):
            apply_overrides({}, ["experiment.n"])


class TestLoadStudy:

    def test_defaults_fill_sections(self, write_config):
        study = load_study(write_config({"model": {"model": "pure_birth", "lambda": 1.0, "x": 1.0}}))
        assert study.experiment.alpha == 0.9
        assert study.oracle.absorb_zero

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigParseError):
            load_study(str(path))

    def test_validation_errors_are_listed(self, write_config):
        with pytest.raises(ConfigParseError) as excinfo:
            load_study(write_config({"model": {"model": "sis", "x": 0.5}}))
        assert excinfo.value.context["errors"]


@pytest.mark.parametrize("value, expected", [
    (1.5, "1.5000000000000000e+00"),
    (math.inf, "inf"),
    (math.nan, "nan"),
    (True, "1"),
    (np.int64(3), "3"),
    (np.float64(0.25), "2.5000000000000000e-01"),
    ("extinct", "extinct"),
    (None, ""),
])
def test_format_value(value, expected):
    assert format_value(value) == expected


class TestExitCodes:

    def test_tau(self, bd_config, tmp_path, capsys):
        assert run_cli("tau", bd_config, tmp_path / "out") == 0
        assert "6.931472" in capsys.readouterr().out
        lines = (tmp_path / "out" / "tau.csv").read_text().splitlines()
        assert lines[0] == "r,quadrature,event,discrepancy,agree"
        manifest = json.loads((tmp_path / "out" / "tau.manifest.json").read_text())
        assert manifest["master_seed"] == 20230519
        assert manifest["subcommand"] == "tau"

    def test_unknown_subcommand(self, bd_config):
        assert main(["bogus", "--config", bd_config]) != 0

    def test_missing_config(self, tmp_path, capsys):
        assert run_cli("tau", str(tmp_path / "absent.json"), tmp_path / "out") == 2
        record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert record["error"] == "ConfigParseError"

    def test_level_below_start(self, bd_config, tmp_path, capsys):
        assert run_cli("tau", bd_config, tmp_path / "out", "--set", "fluid.r=0.5") == 1
        record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert record["error"] == "RangeError"
        assert record["module"] == "fluid"

    def test_invalid_override_is_config_error(self, bd_config, tmp_path):
        assert run_cli("tau", bd_config, tmp_path / "out", "--set", "experiment.alpha=0.4") == 2


class TestSubcommands:

    def test_simulate_is_reproducible(self, bd_config, tmp_path):
        assert run_cli("simulate", bd_config, tmp_path / "a", "--workers", "1") == 0
        assert run_cli("simulate", bd_config, tmp_path / "b", "--workers", "3") == 0
        for name in ("simulate.csv", "simulate_path.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_simulate_hits_leave_reason_empty(self, bd_config, tmp_path):
        assert run_cli("simulate", bd_config, tmp_path / "out") == 0
        lines = (tmp_path / "out" / "simulate.csv").read_text().splitlines()
        assert lines[0] == "replica,hit,tau,events,censor_reason"
        for line in lines[1:]:
            hit, reason = line.split(",")[1], line.split(",")[4]
            assert (hit == "1") == (reason == "")
            assert reason in ("", "extinct", "horizon")

    def test_seed_changes_samples(self, bd_config, tmp_path):
        run_cli("simulate", bd_config, tmp_path / "a")
        run_cli("simulate", bd_config, tmp_path / "b", "--seed", "7")
        assert (tmp_path / "a" / "simulate.csv").read_bytes() != (tmp_path / "b" / "simulate.csv").read_bytes()

    def test_check_birth_death(self, bd_config, tmp_path):
        assert run_cli("check", bd_config, tmp_path / "out") == 0
        for name in ("check_identity", "check_variational", "check_closed_form"):
            assert (tmp_path / "out" / f"{name}.csv").exists()

    def test_check_sis_writes_audit(self, write_config, tmp_path):
        assert run_cli("check", write_config(SIS_STUDY), tmp_path / "out") == 0
        rows = (tmp_path / "out" / "check_xi.csv").read_text().splitlines()
        assert len(rows) == 3

    def test_mdp_header(self, bd_config, tmp_path):
        assert run_cli("mdp", bd_config, tmp_path / "out") == 0
        header = (tmp_path / "out" / "mdp.csv").read_text().splitlines()[0]
        assert header == "t,upper_count,lower_count,upper_est,lower_est,band_lo,band_hi,rate"
        assert (tmp_path / "out" / "mdp_detail.csv").exists()

    def test_oracle_pure_birth(self, write_config, tmp_path):
        study = {"model": {"model": "pure_birth", "lambda": 1.0, "x": 1.0},
                 "oracle": {"n": 2, "r": 2.0, "replicas": 2000, "t_grid": [0.0, 0.5, 1.0, 2.0]}}
        assert run_cli("oracle", write_config(study), tmp_path / "out") == 0
        moments = (tmp_path / "out" / "oracle_moments.csv").read_text().splitlines()
        exact_mean = float(moments[1].split(",")[1])
        assert exact_mean == pytest.approx(5.0 / 6.0)

    @pytest.mark.parametrize("subcommand", ["fluid", "rate", "diffusion", "clt"])
    def test_other_subcommands(self, bd_config, tmp_path, subcommand):
        assert run_cli(subcommand, bd_config, tmp_path / "out") == 0
        assert (tmp_path / "out" / f"{subcommand}.csv").exists()
