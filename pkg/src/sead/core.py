"""Samples, streams, the seeded generator and Q16.16 fixed point."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

MASK64 = (1 << 64) - 1
MASK32 = (1 << 32) - 1

# ---------------------------------------------------------------------------
# Samples and streams
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        if self.label is not None and self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


class DataStream:
    """An ordered, fixed-dimension sequence of samples.

    Parameters
    ----------
    X : array-like, shape (N, d)
        Feature matrix in arrival order.
    labels : array-like, shape (N,), optional
        Binary ground truth, 1 marks an anomaly.
    name : str
        Identifier used by pipeline bindings and reports.
    """

    def __init__(self, X, labels=None, name="stream"):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("a stream needs at least one sample of dimension >= 1")
        if not np.all(np.isfinite(X)):
            raise ValueError("stream contains non-finite feature values")
        if labels is not None:
            labels = np.asarray(labels)
            if labels.shape != (X.shape[0],):
                raise ValueError("labels must have one entry per sample")
            if not np.all((labels == 0) | (labels == 1)):
                raise ValueError("labels must be 0 or 1")
            labels = labels.astype(np.int64)
        self.X = X
        self.labels = labels
        self.name = name

    @property
    def dimension(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.X.shape[0]

    def __getitem__(self, i) -> Sample:
        label = None if self.labels is None else int(self.labels[i])
        return Sample(self.X[i], label)

    def __iter__(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield self[i]

    def slice(self, start, stop=None) -> "DataStream":
        labels = None if self.labels is None else self.labels[start:stop]
        return DataStream(self.X[start:stop], labels, self.name)

    @property
    def contamination(self) -> Optional[float]:
        if self.labels is None:
            return None
        return float(self.labels.mean())

    def __repr__(self):
        return f"DataStream(name={self.name!r}, N={len(self)}, d={self.dimension})"


# ---------------------------------------------------------------------------
# Deterministic generator (SplitMix64)
# ---------------------------------------------------------------------------

_GAMMA = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def derive_seed(master: int, index: int) -> int:
    """Sub-seed for sub-detector ``index``: the index-th SplitMix64 output of ``master``."""
    return _mix64((master + _GAMMA * (index + 1)) & MASK64)


class SeededRng:
    """SplitMix64 generator.

    Output ``i`` is ``mix(seed + (i + 1) * gamma)``, so array draws are
    computed in one vectorized pass and match scalar draws exactly.
    Normals use Box-Muller on consecutive uniform pairs (two uniforms per
    normal, the sine branch is discarded).
    """

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & MASK64
        return _mix64(self.state)

    def _u64_array(self, n: int) -> np.ndarray:
        with np.errstate(over="ignore"):
            steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GAMMA)
            z = np.uint64(self.state) + steps
            out = _mix64_array(z)
        self.state = (self.state + _GAMMA * n) & MASK64
        return out

    def uniform(self, size=None, low=0.0, high=1.0):
        """Uniform draws in ``[low, high)``; 53-bit resolution."""
        n = 1 if size is None else int(np.prod(size))
        u = (self._u64_array(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        u = low + (high - low) * u
        if size is None:
            return float(u[0])
        return u.reshape(size)

    def normal(self, size=None):
        n = 1 if size is None else int(np.prod(size))
        u = self.uniform(2 * n).reshape(n, 2)
        z = np.sqrt(-2.0 * np.log1p(-u[:, 0])) * np.cos(2.0 * np.pi * u[:, 1])
        if size is None:
            return float(z[0])
        return z.reshape(size)


# ---------------------------------------------------------------------------
# Q16.16 fixed point: truncation toward -inf, wraparound on overflow
# ---------------------------------------------------------------------------

Q_FRAC_BITS = 16
Q_ONE = 1 << Q_FRAC_BITS


def wrap32(raw):
    """Reduce an integer (or int64 array) into signed 32-bit two's complement."""
    if isinstance(raw, np.ndarray):
        raw = raw.astype(np.int64)
        return ((raw + (1 << 31)) & MASK32) - (1 << 31)
    return ((int(raw) + (1 << 31)) & MASK32) - (1 << 31)


def q_from_real(x):
    """Raw Q16.16 value(s) for real ``x``; floor at 2^-16, then wrap."""
    if isinstance(x, np.ndarray):
        return wrap32(np.floor(x * Q_ONE).astype(np.int64))
    return wrap32(math.floor(x * Q_ONE))


def q_to_real(raw):
    if isinstance(raw, np.ndarray):
        return raw.astype(np.float64) / Q_ONE
    return raw / Q_ONE


def q_add(a, b):
    return wrap32(a + b)


def q_sub(a, b):
    return wrap32(a - b)


def q_mul(a, b):
    # int64 holds the full product of two 32-bit raws; >> is arithmetic.
    return wrap32((a * b) >> Q_FRAC_BITS)


@dataclass(frozen=True)
class Q16:
    """A single Q16.16 value. ``raw`` is already wrapped to 32 bits."""

    raw: int

    def __post_init__(self):
        object.__setattr__(self, "raw", wrap32(self.raw))

    @classmethod
    def from_real(cls, x: float) -> "Q16":
        return cls(q_from_real(float(x)))

    def __float__(self):
        return q_to_real(self.raw)

    def __add__(self, other: "Q16") -> "Q16":
        return Q16(q_add(self.raw, other.raw))

    def __sub__(self, other: "Q16") -> "Q16":
        return Q16(q_sub(self.raw, other.raw))

    def __mul__(self, other: "Q16") -> "Q16":
        return Q16(q_mul(self.raw, other.raw))

    def __neg__(self) -> "Q16":
        return Q16(-self.raw)

    def __repr__(self):
        return f"Q16({float(self)!r})"
