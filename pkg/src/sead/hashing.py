"""Jenkins one-at-a-time hashing and sliding-window count tables."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ._accel import njit

M32 = 0xFFFFFFFF
INT32_MIN = -(1 << 31)
INT32_MAX = (1 << 31) - 1


def jenkins_hash(key: Sequence[int], seed: int) -> int:
    """32-bit Jenkins one-at-a-time code of an integer key.

    Elements are taken modulo 2^32 (two's complement for negatives). The
    caller applies the ``% MOD`` reduction.
    """
    if len(key) == 0:
        raise ValueError("empty hash key")
    h = seed & M32
    for e in key:
        h = (h + (int(e) & M32)) & M32
        h = (h + (h << 10)) & M32
        h ^= h >> 6
    h = (h + (h << 3)) & M32
    h ^= h >> 11
    h = (h + (h << 15)) & M32
    return h


@njit(inline="always")
def jenkins_kernel(key, n, seed):
    h = seed & M32
    for i in range(n):
        h = (h + (key[i] & M32)) & M32
        h = (h + (h << 10)) & M32
        h ^= h >> 6
    h = (h + (h << 3)) & M32
    h ^= h >> 11
    h = (h + (h << 15)) & M32
    return h


def jenkins_rows(keys: np.ndarray, seed: int) -> np.ndarray:
    """Vectorized hash of each row of an int64 key matrix (numpy path)."""
    h = np.full(keys.shape[0], seed & M32, dtype=np.int64)
    m = np.int64(M32)
    for i in range(keys.shape[1]):
        h = (h + (keys[:, i] & m)) & m
        h = (h + (h << 10)) & m
        h ^= h >> 6
    h = (h + (h << 3)) & m
    h ^= h >> 11
    h = (h + (h << 15)) & m
    return h


class SlidingCountTable:
    """A w x columns count table over exactly the last ``window`` admits.

    With ``rows=1`` this is a histogram; otherwise a count-min sketch. A
    ring buffer remembers which column each admitted sample touched in
    every row, so the oldest sample is removed exactly when the window is
    full.

    Admission order is evict, read, increment: the returned counts never
    include the sample being admitted, and when the window is full they
    cover the ``window - 1`` most recent samples.
    """

    def __init__(self, rows: int, columns: int, window: int):
        if rows < 1 or columns < 1 or window < 1:
            raise ValueError("rows, columns and window must be positive")
        self.rows = rows
        self.columns = columns
        self.window = window
        self.counts = np.zeros((rows, columns), dtype=np.int64)
        self.ring = np.zeros((window, rows), dtype=np.int64)
        self.head = 0
        self.occupancy = 0

    def _check(self, cols) -> np.ndarray:
        cols = np.asarray(cols, dtype=np.int64).reshape(-1)
        if cols.shape[0] != self.rows:
            raise ValueError(f"expected {self.rows} column indices, got {cols.shape[0]}")
        if np.any(cols < 0) or np.any(cols >= self.columns):
            raise IndexError("column index out of range")
        return cols

    def admit(self, cols) -> np.ndarray:
        """Admit one sample; return the per-row counts seen before the increment."""
        cols = self._check(cols)
        rows = np.arange(self.rows)
        if self.occupancy == self.window:
            self.counts[rows, self.ring[self.head]] -= 1
        before = self.counts[rows, cols].copy()
        self.counts[rows, cols] += 1
        self.ring[self.head] = cols
        self.head = (self.head + 1) % self.window
        self.occupancy = min(self.occupancy + 1, self.window)
        return before

    def query_min(self, cols) -> int:
        cols = self._check(cols)
        return int(self.counts[np.arange(self.rows), cols].min())

    def reset(self):
        self.counts[:] = 0
        self.ring[:] = 0
        self.head = 0
        self.occupancy = 0


def clamp_int32(v: np.ndarray) -> np.ndarray:
    """Floor real codes and clamp them into signed 32-bit range."""
    return np.floor(np.clip(v, INT32_MIN, INT32_MAX)).astype(np.int64)
