"""Structured logging configuration for the hitting-time toolkit."""

import logging
import sys
from contextvars import ContextVar
from typing import IO, Optional


# One id per CLI dispatch; the replica processor copies it into worker threads
run_id_var: ContextVar[Optional[str]] = ContextVar('run_id', default=None)

QUIET_LOGGERS = ("numba",)


class StructuredFormatter(logging.Formatter):
    """Adds the run id and, when present, the replica index to every record."""

    def format(self, record: logging.LogRecord) -> str:
        record.run_id = run_id_var.get() or "no-run-id"
        replica = getattr(record, 'replica', None)
        record.replica_tag = f" [R:{replica}]" if replica is not None and replica != "" else ""
        return super().format(record)


def configure_logging(log_level: str = "INFO", stream: Optional[IO[str]] = None) -> None:
    """
    Configure structured logging for the toolkit.

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        stream: Destination of log lines; stderr by default since stdout carries results
    """
    formatter = StructuredFormatter(
        fmt='%(asctime)s - [%(run_id)s]%(replica_tag)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    console_handler = logging.StreamHandler(stream or sys.stderr)
    console_handler.setLevel(log_level)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)


def set_run_id(run_id: str) -> None:
    run_id_var.set(run_id)


def get_run_id() -> Optional[str]:
    """Get the run ID from the current context, or None."""
    return run_id_var.get()


def log_with_replica_context(
    logger: logging.Logger,
    level: int,
    message: str,
    replica: Optional[int] = None,
    **kwargs
) -> None:
    """
    Log a message tagged with the replica index it concerns.

    Args:
        logger: The logger instance
        level: Logging level (e.g., logging.WARNING)
        message: Log message
        replica: Replica index; rendered as ``[R:<index>]`` by ``StructuredFormatter``
        **kwargs: Additional keyword arguments for logging
    """
    extra = dict(kwargs.pop('extra', {}))
    if replica is not None:
        extra['replica'] = replica
    logger.log(level, message, extra=extra, **kwargs)
