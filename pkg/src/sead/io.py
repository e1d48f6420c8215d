"""CSV ingestion and export, and a synthetic labeled stream generator."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import DataStream, SeededRng


@dataclass
class DatasetSpec:
    """Where a dataset lives and how to read it.

    Parameters
    ----------
    path : str
        CSV file, comma separated.
    label : str or int or None
        Label column by header name or by index (negative counts from the
        end). ``None`` reads every column as a feature.
    header : bool
        Whether the first line holds column names.
    name : str, optional
        Stream name used by pipeline bindings; defaults to the file stem.
    n, d : int, optional
        Declared sample count and dimension, checked after parsing.
    contamination : float, optional
        Outlier fraction for thresholding; taken from the labels if absent.
    """

    path: str
    label: Optional[Union[str, int]] = -1
    header: bool = True
    name: Optional[str] = None
    n: Optional[int] = None
    d: Optional[int] = None
    contamination: Optional[float] = None

    def __post_init__(self):
        if self.contamination is not None and not 0.0 < self.contamination < 1.0:
            raise ValueError("contamination must lie in (0, 1)")
        if self.name is None:
            self.name = os.path.splitext(os.path.basename(self.path))[0]


def _label_index(label, columns, width):
    if label is None:
        return None
    if isinstance(label, str) and not label.lstrip("-").isdigit():
        if columns is None:
            raise ValueError(f"label column {label!r} given by name but the file has no header")
        if label not in columns:
            raise ValueError(f"label column {label!r} not found in header")
        return columns.index(label)
    idx = int(label)
    if not -width <= idx < width:
        raise ValueError(f"label column index {idx} out of range for {width} columns")
    return idx % width


def load_csv(spec: Union[DatasetSpec, str], **kwargs) -> DataStream:
    """Read a numeric CSV into a :class:`DataStream`, keeping row order."""
    if isinstance(spec, str):
        spec = DatasetSpec(spec, **kwargs)
    if not os.path.exists(spec.path):
        raise FileNotFoundError(f"dataset not found: {spec.path}")
    with open(spec.path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    columns = None
    if spec.header:
        if not rows:
            raise ValueError(f"{spec.path}: empty file")
        columns = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{spec.path}: no samples")
    width = len(columns) if columns is not None else len(rows[0])
    data = np.empty((len(rows), width))
    for i, r in enumerate(rows):
        if len(r) != width:
            raise ValueError(f"{spec.path}: row {i} has {len(r)} fields, expected {width}")
        try:
            data[i] = [float(c) for c in r]
        except ValueError as e:
            raise ValueError(f"{spec.path}: row {i} is not numeric ({e})") from None
    li = _label_index(spec.label, columns, width)
    if li is None:
        X, y = data, None
    else:
        y = data[:, li]
        if not np.all((y == 0) | (y == 1)):
            raise ValueError(f"{spec.path}: label column is not binary")
        X = np.delete(data, li, axis=1)
        y = y.astype(np.int64)
    if X.shape[1] == 0:
        raise ValueError(f"{spec.path}: no feature columns")
    if spec.n is not None and X.shape[0] != spec.n:
        raise ValueError(f"{spec.path}: expected N={spec.n}, parsed {X.shape[0]}")
    if spec.d is not None and X.shape[1] != spec.d:
        raise ValueError(f"{spec.path}: expected d={spec.d}, parsed {X.shape[1]}")
    return DataStream(X, y, spec.name)


def write_csv(stream: DataStream, path, header: bool = True):
    """Write features then the label column (if any) to a path or open file.

    Floats are written with ``repr`` so values round-trip exactly.
    """
    if hasattr(path, "write"):
        _write_rows(stream, path, header)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(stream, fh, header)


def _write_rows(stream, fh, header):
    w = csv.writer(fh, lineterminator="\n")
    if header:
        names = [f"x{j}" for j in range(stream.dimension)]
        if stream.labels is not None:
            names.append("label")
        w.writerow(names)
    for i in range(len(stream)):
        row = [repr(float(v)) for v in stream.X[i]]
        if stream.labels is not None:
            row.append(str(int(stream.labels[i])))
        w.writerow(row)


def gen_synthetic(n: int, d: int, contamination: float, seed: int = 0,
                  spread: float = 4.0, name: str = "synthetic") -> DataStream:
    """Gaussian inliers plus uniformly scattered outliers.

    Inliers are standard normal. Exactly ``round(n * contamination)``
    outliers are drawn uniformly from the box ``[-spread, spread]^d`` and
    pushed outside the unit ball's 3-sigma shell. Positions are shuffled.
    """
    if n < 10:
        raise ValueError("n must be >= 10")
    if d < 1:
        raise ValueError("d must be >= 1")
    if not 0.0 < contamination < 1.0:
        raise ValueError("contamination must lie in (0, 1)")
    g = SeededRng(seed)
    n_out = int(round(n * contamination))
    X = g.normal((n, d))
    labels = np.zeros(n, dtype=np.int64)
    order = np.argsort(g.uniform(n), kind="stable")
    out_idx = np.sort(order[:n_out])
    box = g.uniform((n_out, d), low=-spread, high=spread)
    # Keep outliers clear of the inlier core so they are separable.
    radius = np.linalg.norm(box, axis=1, keepdims=True)
    push = np.maximum(1.0, 3.0 * np.sqrt(d) / np.maximum(radius, 1e-12))
    X[out_idx] = box * push
    labels[out_idx] = 1
    return DataStream(X, labels, name)
