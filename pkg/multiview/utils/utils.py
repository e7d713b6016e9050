from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from multiview.errors import DataError


def rep_seed(seed: int, rep: int) -> int:
    # seed + rep keeps parallel and serial schedules identical
    return int(seed) + int(rep)


def dump_json(payload: Any, path: Path) -> Path:
    """
    Write `payload` as sorted, indented JSON. Floats go through json's repr,
    which is the shortest string that reads back to the same float64.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")
    return path


def load_json(path: Path) -> Any:
    """Read a JSON document; parse failures become DataError with line/column."""
    path = Path(path)
    if not path.exists():
        raise DataError("file not found", path=path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise DataError(f"invalid JSON at column {e.colno}: {e.msg}", path=path, line=e.lineno) from e
