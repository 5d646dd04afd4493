"""Deterministic JSON and CSV output."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

DIGITS = 12


def plain(obj):
    """Convert to JSON-ready builtins, rounding floats to ``DIGITS`` significant digits."""
    if is_dataclass(obj) and not isinstance(obj, type):
        obj = obj.to_dict() if hasattr(obj, "to_dict") else asdict(obj)
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.{DIGITS}g}")
    return obj


def dumps(payload) -> str:
    return json.dumps(plain(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload))
    return path


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.{DIGITS}g}"
    return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(x) for x in row])
    return path


def write_field(path, grid, u) -> Path:
    """One row per interior node: coordinates then value."""
    names = [f"x{i + 1}" for i in range(grid.n)] + [f"y{j + 1}" for j in range(grid.dim - grid.n)]
    return write_csv(path, names + ["value"], (list(p) + [v] for p, v in zip(grid.points, np.ravel(u))))


def write_trace(path, trace) -> Path:
    return write_csv(path, ["iteration", "energy", "residual", "tau"],
                     ([k] + list(rec) for k, rec in enumerate(trace)))
