"""Command-line entry: parse arguments, load the study, dispatch one subcommand."""

import argparse
import json
import logging
import os
import sys
import time
import uuid
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError

from cli.commands import COMMANDS, CommandContext
from cli.emitters import VERSION, OutputWriter
from dynamics.model import build_model
from models.schemas import DEFAULT_MASTER_SEED, SUBCOMMANDS, RunConfig, StudyConfig, SystemConfig
from utils.errors import ConfigParseError, HittingTimeError
from utils.logging_config import configure_logging, set_run_id


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def build_parser(default_workers: int = 4) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hittime",
        description="Hitting times of density-dependent Markov chains",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    subparsers = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    for name in SUBCOMMANDS:
        sub = subparsers.add_parser(name, help=f"run the {name} operation")
        sub.add_argument("--config", required=True, help="JSON study file")
        sub.add_argument("--output", default="results", help="output directory")
        sub.add_argument("--seed", type=int, default=DEFAULT_MASTER_SEED, help="master seed")
        sub.add_argument("--workers", type=int, default=default_workers, help="concurrent replica batches")
        sub.add_argument(
            "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
            help="override a config key, e.g. experiment.n=1000 (repeatable)",
        )
    return parser


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """
    Apply dotted ``key=value`` overrides to a raw config mapping.

    Values are parsed as JSON when they parse, otherwise kept as strings.
    Intermediate sections are created as needed.

    Args:
        raw: Config mapping as read from the file (modified in place)
        overrides: Items such as ``experiment.n=1000``

    Returns:
        The updated mapping
    """
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigParseError(f"override '{item}' is not key=value", {"override": item})
        *parents, leaf = key.strip().split(".")
        node = raw
        for part in parents:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigParseError(f"override '{item}' descends into a non-section", {"override": item})
            node = child
        node[leaf] = _parse_value(value.strip())
    return raw


def load_study(path: str, overrides: Sequence[str] = ()) -> StudyConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigParseError(f"cannot read config {path}: {e}", {"path": path}) from e
    if not isinstance(raw, dict):
        raise ConfigParseError(f"config {path} is not a JSON object", {"path": path})
    raw = apply_overrides(raw, overrides)
    try:
        return StudyConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigParseError(
            f"invalid config {path}: {e.error_count()} error(s)",
            {"path": path, "errors": [f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors()]},
        ) from e


def _prepare_output(output_dir: str) -> None:
    path = Path(output_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigParseError(f"cannot create output directory {output_dir}: {e}", {"output": output_dir}) from e
    if not os.access(path, os.W_OK):
        raise ConfigParseError(f"output directory {output_dir} is not writable", {"output": output_dir})


def _error_exit(record: Dict[str, Any], status: int) -> int:
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return status


def dispatch(run: RunConfig, system: Optional[SystemConfig] = None) -> int:
    """
    Run one subcommand and write its outputs.

    Args:
        run: Validated invocation
        system: Environment settings; read from the environment when omitted

    Returns:
        Exit status: 0 on success, 2 for configuration errors, 1 otherwise
    """
    set_run_id(str(uuid.uuid4()))
    system = system or SystemConfig.from_env()
    start = time.perf_counter()
    logger.info(f"Dispatching {run.subcommand} with config {run.config_path}, seed {run.master_seed}")

    try:
        study = load_study(run.config_path, run.overrides)
        _prepare_output(run.output_dir)
        model = build_model(study.model)
        context = CommandContext(
            run=run, study=study, model=model, writer=OutputWriter(run, study), system=system,
        )
        COMMANDS[run.subcommand](context)

    except ConfigParseError as e:
        logger.error(f"Configuration error: {e.details}")
        return _error_exit(e.to_record(), EXIT_CONFIG)

    except HittingTimeError as e:
        logger.error(f"{type(e).__name__} in {e.module}: {e.details}")
        return _error_exit(e.to_record(), EXIT_FAILURE)

    except Exception as e:
        logger.error(f"Unhandled exception: {e}", exc_info=True)
        return _error_exit(
            {"error": type(e).__name__, "module": "cli", "details": str(e), "context": {}},
            EXIT_FAILURE,
        )

    logger.info(f"{run.subcommand} finished in {time.perf_counter() - start:.2f}s")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    system = SystemConfig.from_env()
    configure_logging(system.logLevel)
    parser = build_parser(system.maxConcurrentWorkers)
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        run = RunConfig(
            subcommand=args.subcommand,
            config_path=args.config,
            output_dir=args.output,
            master_seed=args.seed,
            workers=args.workers,
            overrides=args.overrides,
        )
    except ValidationError as e:
        error = ConfigParseError(
            f"invalid invocation: {e.error_count()} error(s)",
            {"errors": [f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors()]},
        )
        return _error_exit(error.to_record(), EXIT_CONFIG)
    return dispatch(run, system)
