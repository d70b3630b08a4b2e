"""Versioned JSON results, CSV dumps and atomic file writes."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .grid import FieldGrid
from .spectrum import EigenvalueRecord
from .zeros import ZeroRecord

SCHEMA = "pt-spectra/v1"


class SchemaError(ValueError):
    pass


def atomic_write(path: str | os.PathLike, text: str) -> Path:
    """Write text to a temporary file in the target directory, then rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def jsonable(obj: Any) -> Any:
    """Plain JSON types; complex -> {"re", "im"}, non-finite floats -> null."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, complex):
        return {"re": jsonable(obj.real), "im": jsonable(obj.imag)}
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dump_json(payload: dict, path) -> Path:
    """Attach the schema tag and write atomically.  Floats keep full precision (shortest repr)."""
    doc = {"schema": SCHEMA, **jsonable(payload)}
    return atomic_write(path, json.dumps(doc, indent=2, allow_nan=False) + "\n")


def load_json(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    tag = doc.get("schema") if isinstance(doc, dict) else None
    if tag != SCHEMA:
        raise SchemaError(f"{path}: schema {tag!r} is not supported (expected {SCHEMA!r})")
    return doc


def save_eigenvalues(records: Sequence[EigenvalueRecord], path, meta: dict | None = None) -> Path:
    return dump_json({"kind": "eigenvalues", "meta": meta or {},
                      "eigenvalues": [r.to_dict() for r in records]}, path)


def load_eigenvalues(path) -> tuple[list[EigenvalueRecord], dict]:
    doc = load_json(path)
    if "eigenvalues" not in doc:
        raise SchemaError(f"{path}: no eigenvalue list (is this a spectrum output?)")
    return [EigenvalueRecord.from_dict(d) for d in doc["eigenvalues"]], doc.get("meta", {})


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def write_field_csv(grid: FieldGrid, path) -> Path:
    """One row per sample: x, y, Re u, Im u, re_q, im_q (true values, may overflow to inf)."""
    rows = list(grid.rows())
    return atomic_write(path, _csv_text(["x", "y", "re_u", "im_u", "re_q", "im_q"], rows))


def write_zeros_csv(zeros: Sequence[ZeroRecord], path) -> Path:
    rows = [(z.z.real, z.z.imag, z.winding, z.which.value,
             z.a_region.value if z.a_region else "", z.b_region.value if z.b_region else "") for z in zeros]
    return atomic_write(path, _csv_text(["re", "im", "winding", "which", "a_region", "b_region"], rows))


def write_polylines_csv(lines: dict[str, list[np.ndarray]], path) -> Path:
    """Columns: curve name, polyline id, vertex x, vertex y."""
    rows = []
    for name, group in lines.items():
        for k, pts in enumerate(group):
            rows.extend((name, k, float(px), float(py)) for px, py in pts)
    return atomic_write(path, _csv_text(["curve", "polyline", "x", "y"], rows))


def write_table_csv(header: Sequence[str], rows: Iterable[Sequence], path) -> Path:
    return atomic_write(path, _csv_text(header, rows))
