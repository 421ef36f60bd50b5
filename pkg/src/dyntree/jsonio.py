"""Deterministic JSON writing.

Output is indented for diffability, but lists of scalars stay on one line so
that a 65x65 mask is 65 lines rather than 4,000.  Floats use ``repr`` which
round-trips exactly.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any


def _is_scalar(x: Any) -> bool:
    return x is None or isinstance(x, (bool, int, float, str))


def _encode(obj: Any, level: int) -> str:
    pad = "  " * (level + 1)
    end = "  " * level
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if all(_is_scalar(x) for x in obj):
            return "[" + ", ".join(json.dumps(x) for x in obj) + "]"
        items = [pad + _encode(x, level + 1) for x in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    return json.dumps(obj, allow_nan=False)


def dumps(obj: Any) -> str:
    return _encode(obj, 0) + "\n"


def dump(obj: Any, path: str | Path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def load(path: str | Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))
