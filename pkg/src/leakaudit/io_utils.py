"""Deterministic file emission helpers.

Report files must be byte-identical across reruns: JSON is written with
sorted keys and no trailing whitespace, report floats are rendered with
fixed 6-decimal formatting, and timestamps never appear in content files
(they live in the separate run manifest).
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any


def round_floats(obj: Any, places: int = 6) -> Any:
    """Recursively round floats for report emission; leaves ints alone."""
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            return obj
        return round(obj, places)
    if isinstance(obj, dict):
        return {k: round_floats(v, places) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v, places) for v in obj]
    return obj


def write_json(path: str | Path, obj: Any, report_floats: bool = False) -> None:
    """Write JSON with sorted keys; report mode rounds floats to 6 places."""
    if report_floats:
        obj = round_floats(obj)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_json(path: str | Path) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def format_cell(value: Any) -> str:
    """Fixed-width float formatting for delimiter-separated tables."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_csv(path: str | Path, header: list[str], rows: list[list[Any]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_cell(v) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
