"""Command-line surface: argument parsing, dispatch and CSV emission."""

from cli.dispatcher import apply_overrides, dispatch, load_study, main
from cli.emitters import OutputWriter, format_value

__all__ = ["OutputWriter", "apply_overrides", "dispatch", "format_value", "load_study", "main"]
