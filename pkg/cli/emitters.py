"""CSV and run-manifest emission."""

import csv
import json
import logging
import math
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

from models.schemas import RunConfig, StudyConfig
from utils.logging_config import get_run_id


logger = logging.getLogger(__name__)

VERSION = "1.0.0"


def format_value(value: Any) -> str:
    """Full-precision scientific notation for floats, ``inf`` for +inf, empty for None."""
    if value is None:
        return ""
    kind = getattr(getattr(value, "dtype", None), "kind", "")
    if isinstance(value, (bool, int)) or kind in ("b", "i", "u"):
        return str(int(value))
    if isinstance(value, str):
        return value
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return "%.16e" % value


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


class OutputWriter:
    """Writes CSVs into the output directory, each with its manifest."""

    def __init__(self, run: RunConfig, study: StudyConfig):
        self.run = run
        self.study = study
        self.output_dir = Path(run.output_dir)
        self.written: List[Path] = []

    def emit(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]], **extra: Any) -> Path:
        """
        Write ``<name>.csv`` and ``<name>.manifest.json``.

        Args:
            name: Base file name
            header: CSV header
            rows: CSV rows
            **extra: Summary values recorded in the manifest

        Returns:
            Path of the CSV
        """
        path = write_csv(self.output_dir / f"{name}.csv", header, rows)
        self.write_manifest(name, path, extra)
        self.written.append(path)
        logger.info(f"Wrote {path}")
        return path

    def write_manifest(self, name: str, path: Path, extra: Dict[str, Any]) -> Path:
        manifest = {
            "name": name,
            "file": path.name,
            "subcommand": self.run.subcommand,
            "command": " ".join(sys.argv),
            "version": VERSION,
            "master_seed": self.run.master_seed,
            "workers": self.run.workers,
            "config_path": self.run.config_path,
            "overrides": self.run.overrides,
            "config": self.study.model_dump(mode="json", by_alias=True),
            "summary": {k: _jsonable(v) for k, v in extra.items()},
            "run_id": get_run_id(),
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        target = self.output_dir / f"{name}.manifest.json"
        target.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return target


def _jsonable(value: Any) -> Any:
    if isinstance(value, (bool, str)) or value is None:
        return value
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "tolist"):
        return _jsonable(value.tolist())
    if isinstance(value, int):
        return value
    value = float(value)
    return value if math.isfinite(value) else format_value(value)
