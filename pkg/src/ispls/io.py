"""Matrix and manifest files.

Matrices are headerless comma-separated decimals, one observation per row,
written with 17 significant digits so that they round-trip exactly.  Study
manifests are JSON of the form::

    {"studies": [{"id": "a", "X": "a_X.csv", "Y": "a_Y.csv"}, ...]}

with paths resolved relative to the manifest file.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .data import DataError, MultiStudyData, StudyData


def format_number(v: float) -> str:
    return "%.17g" % v


def write_matrix(path, A) -> None:
    A = np.asarray(A)
    if A.ndim == 1:
        A = A[:, None]
    if A.dtype == bool:
        lines = [",".join("1" if v else "0" for v in row) for row in A]
    else:
        lines = [",".join(format_number(float(v)) for v in row) for row in A]
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path) -> np.ndarray:
    """Parse a headerless numeric CSV, reporting the first bad cell."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    rows = []
    width = None
    for i, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise DataError(f"{path}: row {i} has {len(cells)} columns, expected {width}")
        row = []
        for j, cell in enumerate(cells, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {i}, column {j}: not a number: {cell.strip()!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}: row {i}, column {j}: non-finite value")
            row.append(v)
        rows.append(row)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def read_manifest(path) -> MultiStudyData:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from None
    entries = doc.get("studies") if isinstance(doc, dict) else None
    if not isinstance(entries, list) or not entries:
        raise DataError(f"{path}: expected a nonempty 'studies' list")
    studies = []
    for k, entry in enumerate(entries):
        if not isinstance(entry, dict) or not {"X", "Y"} <= set(entry):
            raise DataError(f"{path}: study {k} needs 'X' and 'Y' paths")
        X = read_matrix(path.parent / entry["X"])
        Y = read_matrix(path.parent / entry["Y"])
        studies.append(StudyData(X, Y, str(entry.get("id", f"study{k + 1}"))))
    return MultiStudyData(studies)


def write_studies(out_dir, data: MultiStudyData, manifest_name="manifest.json") -> Path:
    """Write every study's X and Y plus a manifest that reads them back."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for study in data:
        xs, ys = f"{study.id}_X.csv", f"{study.id}_Y.csv"
        write_matrix(out_dir / xs, study.X)
        write_matrix(out_dir / ys, study.Y)
        entries.append({"id": study.id, "X": xs, "Y": ys})
    target = out_dir / manifest_name
    write_json(target, {"studies": entries})
    return target


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from None
