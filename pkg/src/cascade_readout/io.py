"""CSV and run-manifest plumbing.

Every CSV starts with a ``# schema=v1`` line followed by ``# key=value``
metadata comments, a header row and data rows. Floats are serialized with
shortest round-trip repr so re-running a command reproduces files byte for
byte. A manifest JSON is written alongside every file output and records
enough to replay the command.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

SCHEMA = "v1"


class SchemaError(ValueError):
    """CSV does not declare a schema this package understands."""


def _format_value(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, columns, rows, meta: dict | None = None) -> None:
    """Write rows (sequences or dicts) under the v1 schema."""
    path = Path(path)
    lines = [f"# schema={SCHEMA}"]
    for k, v in (meta or {}).items():
        lines.append(f"# {k}={_format_value(v)}")
    lines.append(",".join(columns))
    for row in rows:
        if isinstance(row, dict):
            row = [row[c] for c in columns]
        lines.append(",".join(_format_value(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv(path):
    """Parse a v1 CSV; returns (meta, columns, rows-as-dicts of strings)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != f"# schema={SCHEMA}":
        found = lines[0].strip() if lines else "<empty file>"
        raise SchemaError(f"expected '# schema={SCHEMA}' header, found {found!r}")
    meta: dict[str, str] = {"schema": SCHEMA}
    body: list[str] = []
    for line in lines[1:]:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value
        elif line.strip():
            body.append(line)
    if not body:
        raise SchemaError("CSV has no header row")
    columns = body[0].split(",")
    rows = [dict(zip(columns, line.split(","))) for line in body[1:]]
    return meta, columns, rows


@dataclass
class RunManifest:
    """Record of one CLI invocation, sufficient to replay it."""

    command: str
    params: dict
    seeds: dict
    outputs: list[str]
    artifact_version: str
    wall_time_s: float = 0.0
    created_unix: float = field(default_factory=time.time)

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps(asdict(self), indent=2, sort_keys=True) + "\n",
            encoding="utf-8")

    @staticmethod
    def load(path) -> "RunManifest":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return RunManifest(**data)


def manifest_path_for(output_path) -> Path:
    return Path(str(output_path) + ".manifest.json")
