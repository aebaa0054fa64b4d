"""JSON writing with floats spelled out to 17 significant digits."""
from __future__ import annotations

import json
import math


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialise non-finite value {x!r}")
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def dumps(obj: dict) -> str:
    """Serialise a flat mapping of str/int/float values, one key per line."""
    parts = []
    for key, value in obj.items():
        if isinstance(value, float):
            text = _fmt_float(value)
        else:
            text = json.dumps(value)
        parts.append(f"  {json.dumps(key)}: {text}")
    return "{\n" + ",\n".join(parts) + "\n}\n"
