"""Run orchestrator.

Dispatches one sub-command, then writes its table through a single
writer: CSV with 17 significant digits, or a JSON document. File output
goes to a ``.part`` sibling first and is moved into place once complete,
so an interrupted run never leaves a truncated file behind.
"""

import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, TextIO

import numpy as np

from commands import COMMANDS, Table
from config import Config

logger = logging.getLogger(__name__)


FLOAT_FORMAT = "%.17g"


@dataclass
class RunStats:
    """Statistics for one run."""
    command: str = ""
    rows_written: int = 0
    failures: int = 0
    elapsed: float = 0.0
    output: str = "<stdout>"
    meta: Dict[str, Any] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Formatting
# ---------------------------------------------------------------------------

def format_value(value: Any) -> str:
    """CSV cell text. Floats use 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % float(value)
    return str(value)


def _json_ready(value: Any) -> Any:
    """Plain JSON types; NaN and infinities become null."""
    if isinstance(value, dict):
        return {str(k): _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, complex):
        return [_json_ready(value.real), _json_ready(value.imag)]
    return value


def write_csv(table: Table, stream: TextIO) -> int:
    stream.write(",".join(table.columns) + "\n")
    for row in table.rows:
        stream.write(",".join(format_value(v) for v in row) + "\n")
    return len(table.rows)


def write_json(command: str, table: Table, stream: TextIO) -> int:
    document = {
        "command": command,
        "meta": table.meta,
        "columns": list(table.columns),
        "rows": [list(row) for row in table.rows],
    }
    json.dump(_json_ready(document), stream, indent=2, allow_nan=False)
    stream.write("\n")
    return len(table.rows)


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

class Pipeline:
    """Runs one command and writes its output."""

    def __init__(self, config: Config, stream: Optional[TextIO] = None):
        """Initialize pipeline.

        Args:
            config: Validated run configuration; ``config.command`` selects
                the sub-command.
            stream: Text stream used when no output path is configured
                (defaults to ``sys.stdout``).
        """
        if config.command not in COMMANDS:
            raise ValueError(f"unknown command {config.command!r}; valid: {sorted(COMMANDS)}")
        self.config = config
        self.stream = stream
        self.stats = RunStats(command=config.command)

    def run(self) -> RunStats:
        """Run the command, write its table and return the statistics."""
        start = time.perf_counter()
        command = self.config.command
        logger.info(f"Running {command}")

        table = COMMANDS[command](self.config)
        self.stats.failures = table.failures
        self.stats.meta = table.meta
        self.stats.rows_written = self._write(table)
        self.stats.elapsed = time.perf_counter() - start
        return self.stats

    # ------------------------------------------------------------------
    # Output
    # ------------------------------------------------------------------

    def _format(self) -> str:
        # the verification report is always a JSON document
        if self.config.command == "verify":
            return "json"
        return self.config.output.format

    def _emit(self, table: Table, stream: TextIO) -> int:
        if self._format() == "json":
            return write_json(self.config.command, table, stream)
        return write_csv(table, stream)

    def _write(self, table: Table) -> int:
        path: Optional[Path] = self.config.output.path
        if path is None:
            stream = self.stream if self.stream is not None else sys.stdout
            count = self._emit(table, stream)
            stream.flush()
            return count

        path.parent.mkdir(parents=True, exist_ok=True)
        partial = path.with_name(path.name + ".part")
        try:
            with open(partial, "w", encoding="utf-8", newline="\n") as f:
                count = self._emit(table, f)
            os.replace(partial, path)
        except BaseException:
            if partial.exists():
                partial.unlink()
            raise
        self.stats.output = str(path)
        logger.info(f"Wrote {count} row(s) to {path}")
        return count
