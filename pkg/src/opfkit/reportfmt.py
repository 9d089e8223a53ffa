"""Deterministic report rendering: canonical JSON and fixed-width text.

Identical inputs must produce byte-identical reports, so floats are printed
with 12 significant digits, dict insertion order is preserved, and no
locale-dependent formatting is used.
"""

from __future__ import annotations

import math


def fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if x == int(x) and abs(x) < 1e15:
        return f"{int(x)}.0"
    return format(x, ".12g")


def _render(obj, indent: int, out: list):
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for k, (key, val) in enumerate(obj.items()):
            out.append(f'{pad} "{key}": ')
            _render(val, indent + 1, out)
            out.append(",\n" if k < len(obj) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for k, val in enumerate(obj):
            out.append(pad + " ")
            _render(val, indent + 1, out)
            out.append(",\n" if k < len(obj) - 1 else "\n")
        out.append(pad + "]")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, float):
        out.append(fmt_float(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif obj is None:
        out.append("null")
    elif isinstance(obj, str):
        out.append('"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"')
    else:
        raise TypeError(f"cannot render {type(obj)} in a report")


def to_json(obj) -> str:
    out: list[str] = []
    _render(obj, 0, out)
    return "".join(out) + "\n"


def table(headers: list[str], rows: list[list], min_width: int = 8) -> str:
    """Fixed-width text table; numbers rendered with 6 significant digits."""
    def cell(v):
        if isinstance(v, bool):
            return "yes" if v else "no"
        if isinstance(v, float):
            if math.isinf(v):
                return "inf" if v > 0 else "-inf"
            return format(v, ".6g")
        return str(v)

    grid = [[cell(v) for v in row] for row in rows]
    widths = [max(min_width, len(h), *(len(r[i]) for r in grid)) if grid else
              max(min_width, len(h)) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for r in grid:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"
