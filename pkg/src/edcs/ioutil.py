"""Small I/O helpers: strict mapping validation, deterministic CSV/JSON writers."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

from .errors import ConfigError


def check_keys(mapping: dict, allowed: set[str], path: str) -> None:
    """Reject unknown keys, reporting the full dotted path of the offender."""
    if not isinstance(mapping, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(mapping).__name__}")
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key")


def fnum(value) -> str:
    """Shortest round-trip decimal form of a float (numpy scalars included)."""
    return repr(float(value))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_of(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_csv(path, header: list[str], rows, comment: str | None = None) -> None:
    """Write rows deterministically; optional single '#' comment line on top."""
    with open(path, "w", newline="\n") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def read_csv_rows(path) -> tuple[list[str], list[dict]]:
    """Read a CSV written by :func:`write_csv`, skipping '#' comment lines."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    return list(reader.fieldnames or []), list(reader)
