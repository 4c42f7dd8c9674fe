"""CSV and JSON report files with a deterministic layout.

Rows are sorted by the declared key columns, the header is always written
and floats use ``repr`` (the shortest string that round-trips).  The
resolved run configuration is echoed at the top of every file: as ``#``
comment lines in CSV, under ``"config"`` in JSON.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Sequence

from core.errors import ConfigError

logger = logging.getLogger(__name__)

FORMATS = ("csv", "json")


def _sort_key(row: dict[str, Any], keys: Sequence[str]) -> tuple:
    return tuple((row[k] is not None, row[k]) for k in keys)


def _json_value(value: Any) -> Any:
    if hasattr(value, "item"):  # numpy scalar
        return value.item()
    return value


def _cell(value: Any) -> str:
    value = _json_value(value)
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_report(
    rows: Iterable[dict[str, Any]],
    columns: Sequence[str],
    keys: Sequence[str] = (),
    fmt: str = "csv",
    config: dict[str, Any] | None = None,
) -> str:
    if fmt not in FORMATS:
        raise ConfigError(f"report format must be one of {FORMATS}, got {fmt!r}")
    rows = list(rows)
    for row in rows:
        missing = set(columns) - set(row)
        extra = set(row) - set(columns)
        if missing or extra:
            raise ConfigError(
                f"row does not match columns {list(columns)}: "
                f"missing {sorted(missing)}, unexpected {sorted(extra)}"
            )
    rows.sort(key=lambda row: _sort_key(row, keys))
    if fmt == "json":
        payload = {
            "config": config or {},
            "columns": list(columns),
            "rows": [{c: _json_value(row[c]) for c in columns} for row in rows],
        }
        return json.dumps(payload, indent=2, sort_keys=False) + "\n"
    buffer = io.StringIO()
    if config:
        for line in json.dumps(config, sort_keys=True).splitlines():
            buffer.write(f"# config: {line}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    return buffer.getvalue()


def emit_report(
    path: Path | str,
    rows: Iterable[dict[str, Any]],
    columns: Sequence[str],
    keys: Sequence[str] = (),
    fmt: str | None = None,
    config: dict[str, Any] | None = None,
) -> Path:
    """Write a report; the format defaults to the file suffix (CSV otherwise)."""

    path = Path(path)
    if fmt is None:
        fmt = "json" if path.suffix.lower() == ".json" else "csv"
    text = render_report(rows, columns, keys, fmt, config)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info("wrote %s report to %s", fmt, path)
    return path


def read_report(path: Path | str) -> tuple[list[str], list[dict[str, str]]]:
    """Columns and raw string rows of a CSV report, skipping ``#`` lines."""

    with Path(path).open("r", encoding="utf-8", newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    reader = csv.DictReader(lines)
    rows = list(reader)
    return list(reader.fieldnames or []), rows
