"""Deterministic JSON serialization with 17-significant-digit floats."""

from __future__ import annotations

import numpy as np

__all__ = ["to_json17", "dump_json17"]


def _fmt_float(x: float) -> str:
    if np.isnan(x):
        return "NaN"
    if np.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(float(x), ".17g")


def to_json17(obj, indent: int = 0) -> str:
    pad = "  " * indent
    pad_in = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        import json

        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = sorted(obj.items(), key=lambda kv: str(kv[0]))
        body = ",\n".join(
            f"{pad_in}{to_json17(str(k))}: {to_json17(v, indent + 1)}" for k, v in items
        )
        return "{\n" + body + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        body = ",\n".join(f"{pad_in}{to_json17(v, indent + 1)}" for v in seq)
        return "[\n" + body + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def dump_json17(obj, path) -> None:
    with open(path, "w") as fh:
        fh.write(to_json17(obj))
        fh.write("\n")
