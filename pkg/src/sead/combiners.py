"""Score normalization, contamination thresholding and ensemble combiners.

Score methods: ``averaging``, ``maximization``, ``weighted``.
Label methods: ``or``, ``voting``.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

SCORE_METHODS = ("averaging", "maximization", "weighted")
LABEL_METHODS = ("or", "voting")
NORMALIZE_EPS = 1e-12
WEIGHT_TOL = 1e-9


def normalize(scores) -> np.ndarray:
    """Min-max scale a score series: ``(s - min) / (max - min + 1e-12)``.

    A constant series maps to all zeros. The epsilon is absorbed by wide
    spans, so the maximum can round to exactly 1.0.
    """
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if s.size == 0:
        raise ValueError("cannot normalize an empty score series")
    if not np.all(np.isfinite(s)):
        raise ValueError("score series contains non-finite values")
    lo = s.min()
    return (s - lo) / (s.max() - lo + NORMALIZE_EPS)


def _stack(inputs, what) -> np.ndarray:
    if len(inputs) == 0:
        raise ValueError(f"at least one {what} series is required")
    arrs = [np.asarray(a).reshape(-1) for a in inputs]
    n = arrs[0].shape[0]
    for i, a in enumerate(arrs):
        if a.shape[0] != n:
            raise ValueError(
                f"length mismatch: input 0 has {n} samples, input {i} has {a.shape[0]}"
            )
    return np.stack(arrs)


def check_weights(weights, n_inputs: int) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.shape[0] != n_inputs:
        raise ValueError(f"expected {n_inputs} weights, got {w.shape[0]}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and non-negative")
    if abs(math.fsum(w.tolist()) - 1.0) > WEIGHT_TOL:
        raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
    return w


def combine_scores(method: str, inputs: Sequence, weights: Optional[Sequence] = None,
                   conventional: bool = False) -> np.ndarray:
    """Element-wise combination of equally long score series.

    ``weighted`` follows the reference formula ``sum(w_i * s_i) / N``; pass
    ``conventional=True`` for the plain weighted mean ``sum(w_i * s_i)``.
    """
    if method not in SCORE_METHODS:
        raise ValueError(f"unknown score combination {method!r}")
    S = _stack(inputs, "score").astype(np.float64)
    n = S.shape[0]
    if method == "weighted":
        if weights is None:
            raise ValueError("weighted combination needs weights")
        w = check_weights(weights, n)
    elif weights is not None:
        raise ValueError(f"{method} combination takes no weights")
    if method == "maximization":
        return S.max(axis=0)
    # Accumulate in input order so results do not depend on numpy's pairwise sum.
    total = np.zeros(S.shape[1])
    if method == "averaging":
        for row in S:
            total = total + row
        return total / n
    for wi, row in zip(w, S):
        total = total + wi * row
    return total if conventional else total / n


def combine_labels(method: str, inputs: Sequence) -> np.ndarray:
    """OR or majority vote over binary label series; vote ties go to 1."""
    if method not in LABEL_METHODS:
        raise ValueError(f"unknown label combination {method!r}")
    L = _stack(inputs, "label")
    if not np.all((L == 0) | (L == 1)):
        raise ValueError("labels must be 0 or 1")
    L = L.astype(np.int64)
    if method == "or":
        return L.max(axis=0)
    return (2 * L.sum(axis=0) >= L.shape[0]).astype(np.int64)


def threshold_labels(scores, contamination: float) -> np.ndarray:
    """Label 1 where the score exceeds the (1 - contamination) empirical quantile."""
    if not 0.0 < contamination < 1.0:
        raise ValueError(f"contamination must lie in (0, 1), got {contamination!r}")
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if s.size == 0:
        raise ValueError("cannot threshold an empty score series")
    thr = np.quantile(s, 1.0 - contamination)
    return (s > thr).astype(np.int64)
