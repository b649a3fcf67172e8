"""CSV ingestion and atomic artifact writes."""
from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from typing import Optional, Tuple

import numpy as np


class DatasetError(ValueError):
    pass


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def parse_dataset(path) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Read an ``n x d`` numeric CSV.

    A header row is optional. If its last column is named ``label`` that
    column is returned separately as integers. NaN and infinite values are
    rejected with the offending line number.
    """
    with open(path, newline="") as fh:
        rows = [(i + 1, row) for i, row in enumerate(csv.reader(fh)) if row and any(c.strip() for c in row)]
    if not rows:
        raise DatasetError(f"{path}: empty dataset")
    has_label = False
    first_line, first = rows[0]
    if not all(_is_number(c) for c in first):
        header = [c.strip() for c in first]
        has_label = header[-1].lower() == "label"
        width = len(header)
        rows = rows[1:]
        if not rows:
            raise DatasetError(f"{path}: header but no data rows")
    else:
        width = len(first)

    feats, labels = [], []
    for line, row in rows:
        if len(row) != width:
            raise DatasetError(f"{path}:{line}: expected {width} columns, found {len(row)}")
        try:
            values = [float(c) for c in row]
        except ValueError:
            raise DatasetError(f"{path}:{line}: non-numeric value") from None
        if not all(math.isfinite(v) for v in values):
            raise DatasetError(f"{path}:{line}: NaN or infinite value")
        if has_label:
            lab = values.pop()
            if lab != int(lab):
                raise DatasetError(f"{path}:{line}: label must be an integer")
            labels.append(int(lab))
        feats.append(values)
    X = np.array(feats, dtype=float)
    if X.shape[1] == 0:
        raise DatasetError(f"{path}: no feature columns")
    return X, (np.array(labels, dtype=np.int64) if has_label else None)


def format_number(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 2**53 else f"{v:.17g}"


def dataset_to_csv(X: np.ndarray, labels: Optional[np.ndarray] = None) -> str:
    X = np.asarray(X)
    header = [f"x{j}" for j in range(X.shape[1])] + (["label"] if labels is not None else [])
    lines = [",".join(header)]
    for i, row in enumerate(X):
        cells = [format_number(v) for v in row]
        if labels is not None:
            cells.append(str(int(labels[i])))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def to_json(obj) -> str:
    # json emits the shortest round-tripping repr of each float
    return json.dumps(obj, indent=1, allow_nan=True) + "\n"


def write_atomic(path, text: str) -> None:
    """Write to a temporary sibling, then rename over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
