"""
Plumbing shared by the management commands.

- Run manifests: every artifact-producing command writes
  `<artifact>.manifest.json` (options, seeds, inputs, outputs, sha256 of each
  output, wall time) and, when `settings.PDSKETCH["RECORD_RUNS"]` is on, a
  `run_manifest` row. The database write is best-effort: a missing or
  unmigrated database only logs a warning.
- Exit codes: `PDSketchError`s become `CommandError`s with the toolkit's
  return codes (1 input error, 2 limit exceeded, 3 unsolvable).
"""

import hashlib
import json
import logging
import os
import tempfile
import time
from pathlib import Path

from django.core.management.base import CommandError
from django.db import DatabaseError

from .conf import record_runs
from .exceptions import LimitExceeded, PDSketchError, Unsolvable

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_LIMIT = 2
EXIT_UNSOLVABLE = 3


# ------------------------------------------------------------------------------
# FILES
# ------------------------------------------------------------------------------

def sha256_of(path):
    """Hex digest of a file, or None when it does not exist."""
    p = Path(path)
    if not p.is_file():
        return None
    digest = hashlib.sha256()
    with p.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_text_atomic(path, text):
    """Write `text` to `path` through a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


# ------------------------------------------------------------------------------
# MANIFESTS
# ------------------------------------------------------------------------------

class RunClock:
    """Wall-clock timer started at construction."""

    def __init__(self):
        self.start = time.perf_counter()

    def seconds(self):
        return time.perf_counter() - self.start


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    return str(value)


def build_manifest(command, options, seeds, inputs, outputs, wall_seconds):
    """Manifest dict; hashes cover every output path that exists."""
    outputs = {k: str(v) for k, v in outputs.items() if v}
    return {
        "command": command,
        "options": _jsonable(options),
        "seeds": _jsonable(seeds),
        "inputs": {k: str(v) for k, v in inputs.items() if v},
        "outputs": outputs,
        "artifact_hashes": {p: sha256_of(p) for p in outputs.values() if sha256_of(p)},
        "wall_seconds": round(float(wall_seconds), 3),
    }


def write_manifest(artifact, command, options, seeds, inputs, outputs, clock):
    """
    Write `<artifact>.manifest.json` and record the run in the database.

    Args:
        artifact (str | Path): Primary output; the manifest goes next to it.
        command (str): Command name.
        options (dict): Effective options.
        seeds (dict): Seeds used.
        inputs (dict): name -> input path.
        outputs (dict): name -> output path.
        clock (RunClock): Started when the command began.

    Returns:
        tuple[dict, run_manifest | None]: The manifest and the stored row.
    """
    manifest = build_manifest(command, options, seeds, inputs, outputs, clock.seconds())
    path = Path(f"{artifact}.manifest.json")
    write_text_atomic(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest, record_manifest(manifest)


def record_manifest(manifest):
    """Store a manifest row; None when recording is off or the database is unavailable."""
    if not record_runs():
        return None
    from .models import run_manifest

    try:
        return run_manifest.objects.create(**manifest)
    except DatabaseError as exc:
        logger.warning("run manifest not stored in the database: %s", exc)
        return None


def record_bench_rows(manifest_row, rows):
    """Store bench rows under a manifest row (best-effort)."""
    if manifest_row is None:
        return 0
    from .models import bench_result

    fields = ("task_id", "heuristic", "solved", "plan_len", "expanded", "generated", "wall_ms", "status")
    try:
        objs = [bench_result(manifest_id=manifest_row, **{f: r[f] for f in fields}) for r in rows]
        bench_result.objects.bulk_create(objs)
        return len(objs)
    except DatabaseError as exc:
        logger.warning("bench rows not stored in the database: %s", exc)
        return 0


# ------------------------------------------------------------------------------
# ERRORS
# ------------------------------------------------------------------------------

def exit_code_for(exc):
    if isinstance(exc, LimitExceeded):
        return EXIT_LIMIT
    if isinstance(exc, Unsolvable):
        return EXIT_UNSOLVABLE
    return EXIT_INPUT


def as_command_error(exc):
    """CommandError carrying the exit code of a toolkit error."""
    if isinstance(exc, PDSketchError):
        return CommandError(str(exc), returncode=exit_code_for(exc))
    return CommandError(str(exc), returncode=EXIT_INPUT)
