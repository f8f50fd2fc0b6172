"""CSV tables with a ``# key: value`` metadata header, plus a JSON mirror."""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path


def _flatten(meta, prefix=""):
    for key, value in meta.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            yield from _flatten(value, name + ".")
        else:
            yield name, value


def _cell(v):
    if hasattr(v, "item"):  # numpy scalar
        v = v.item()
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_value(v):
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _json_tree(meta):
    if isinstance(meta, dict):
        return {k: _json_tree(v) for k, v in meta.items()}
    if isinstance(meta, (list, tuple)):
        return [_json_tree(v) for v in meta]
    return _json_value(meta)


def format_csv(columns, rows, metadata) -> str:
    lines = [f"# {k}: {_cell(v) if not isinstance(v, (list, tuple)) else json.dumps(_json_tree(v))}"
             for k, v in _flatten(metadata)]
    lines.append(",".join(columns))
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def format_json(columns, rows, metadata) -> str:
    data = {c: [_json_value(r[i]) for r in rows] for i, c in enumerate(columns)}
    doc = {"metadata": _json_tree(metadata), "columns": list(columns), "data": data}
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def write_table(path, columns, rows, metadata):
    """Write ``path`` (CSV) and ``path`` with suffix ``.json``; ``None`` prints the CSV."""
    text = format_csv(columns, rows, metadata)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return None
    path = Path(path)
    if path.suffix.lower() == ".json":
        raise ValueError("output path names the CSV file; the JSON mirror is written next to it")
    path.write_text(text)
    mirror = path.with_suffix(".json")
    mirror.write_text(format_json(columns, rows, metadata))
    return path, mirror
