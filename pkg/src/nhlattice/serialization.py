"""Deterministic CSV and JSON writers.

CSV floats use fixed 17-significant-digit formatting and JSON floats use the
shortest round-trip repr; both give byte-identical files for identical
inputs. CSVs are UTF-8 with LF line endings and a header row; JSON keys are
sorted.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (complex, np.complexfloating)):
        return f"{format(value.real, '.17g')},{format(value.imag, '.17g')}"
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def jsonable(obj):
    """Recursively convert numpy scalars/arrays so json can serialize them."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    text = json.dumps(jsonable(obj), sort_keys=True, indent=2)
    path.write_text(text + "\n", encoding="utf-8", newline="\n")
    return path


def config_hash(obj) -> str:
    canon = json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def matrix_to_csv(path, matrix: np.ndarray) -> Path:
    """Row-major complex matrix dump with re,im pairs per entry."""
    m = np.asarray(matrix)
    header = []
    for j in range(m.shape[1]):
        header += [f"re{j}", f"im{j}"]
    rows = []
    for row in m:
        flat = []
        for v in row:
            flat += [float(np.real(v)), float(np.imag(v))]
        rows.append(flat)
    return write_csv(path, header, rows)
