"""Tests for the structured log format and run-id propagation."""

import io
import logging

import pytest

from utils.logging_config import configure_logging, get_run_id, log_with_replica_context, set_run_id
from workers.replica_processor import run_replicas


@pytest.fixture(autouse=True)
def restore_root_logger():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


def test_run_id_and_replica_tag():
    stream = io.StringIO()
    configure_logging("INFO", stream=stream)
    set_run_id("run-123")
    logger = logging.getLogger("engines.ssa")
    log_with_replica_context(logger, logging.WARNING, "3 rate evaluations clamped to 0", replica=7)
    logger.info("plain message")
    first, second = stream.getvalue().splitlines()
    assert "[run-123] [R:7] - engines.ssa - WARNING - 3 rate evaluations clamped to 0" in first
    assert "[run-123] - engines.ssa - INFO - plain message" in second


def test_level_filters():
    stream = io.StringIO()
    configure_logging("WARNING", stream=stream)
    logging.getLogger("dynamics.fluid").info("hidden")
    assert stream.getvalue() == ""


def test_worker_threads_see_run_id():
    set_run_id("run-456")
    seen = run_replicas(lambda batch: [get_run_id() for _ in batch], 6, workers=3, batch_size=2)
    assert seen == ["run-456"] * 6
