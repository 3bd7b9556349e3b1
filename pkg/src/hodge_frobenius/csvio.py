"""CSV grids and ``key = value`` reports."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

HEADER = "x,y,value"


def format_grid_csv(grid, values) -> str:
    """Rows ``x,y,value`` ordered by y, then x, with 17 significant digits."""
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise ValueError(f"expected values of shape {grid.shape}, got {values.shape}")
    lines = [HEADER]
    for j, y in enumerate(grid.y):
        for i, x in enumerate(grid.x):
            lines.append(f"{x:.17g},{y:.17g},{values[j, i]:.17g}")
    return "\n".join(lines) + "\n"


def write_grid_csv(path, grid, values):
    Path(path).write_bytes(format_grid_csv(grid, values).encode("ascii"))


def read_grid_csv(path):
    """Return ``(x, y, values)`` with ``values`` shaped ``(len(y), len(x))``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    xs = np.unique(data[:, 0])
    ys = np.unique(data[:, 1])
    return xs, ys, data[:, 2].reshape(len(ys), len(xs))


def format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.10g}"
    if isinstance(value, (tuple, list)):
        return ", ".join(format_value(v) for v in value)
    return str(value)


def format_report(items) -> str:
    """``key = value`` lines, floats with 10 significant digits."""
    pairs = items.items() if isinstance(items, dict) else items
    return "".join(f"{k} = {format_value(v)}\n" for k, v in pairs)


def parse_report(text) -> dict:
    out = {}
    for line in text.splitlines():
        if " = " in line:
            k, v = line.split(" = ", 1)
            out[k.strip()] = v.strip()
    return out
