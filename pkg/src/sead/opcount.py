"""Instrumented scalar reference detectors that count arithmetic operations.

Each counter replays a calibrated detector sample by sample in plain
Python, using its own :class:`SlidingCountTable` per sub-detector, and
tallies operations under one fixed policy:

* every arithmetic or bitwise operation on data (add, sub, mul, div,
  shift, xor, mod, compare-for-min) counts 1;
* a count-table read counts 1 and the windowed update (increment plus
  the eviction it implies) counts 1;
* a reduction counts 1 per element folded in (the ensemble sum);
* format conversions, floor, clamping, table lookups (log2, and the
  stored negated log2) and loop bookkeeping are free;
* per sample the ensemble mean's divide counts 1 and the window
  occupancy update counts 1.

The returned scores must equal the compiled kernels' real-mode scores,
which ties the tally to the arithmetic that actually runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hashing import INT32_MAX, INT32_MIN, M32, SlidingCountTable

_WINDOW_OPS = 2  # read + update


@dataclass
class OpTrace:
    ops: int
    scores: np.ndarray


class _Tally:
    def __init__(self):
        self.n = 0

    def __iadd__(self, k):
        self.n += k
        return self


def _code(v):
    return int(np.floor(min(max(v, INT32_MIN), INT32_MAX)))


def _hash(key, seed, t: _Tally):
    h = seed & M32
    for e in key:
        h = (h + (e & M32)) & M32
        h = (h + (h << 10)) & M32
        h ^= h >> 6
        t += 5  # add, shift, add, shift, xor; masks model 32-bit registers
    h = (h + (h << 3)) & M32
    h ^= h >> 11
    h = (h + (h << 15)) & M32
    t += 6
    return h


def _project(x, w, t: _Tally):
    p = 0.0
    for j in range(len(x)):
        p += x[j] * w[j]
        t += 2
    return p


def _mean(sub, t: _Tally):
    total = sub[0]
    t += 1
    for v in sub[1:]:
        total += v
        t += 1
    t += 1  # divide by R
    return total / len(sub)


def count_loda(det, X) -> OpTrace:
    R, W, bins = det.n_estimators, det.window, det.bins
    tables = [SlidingCountTable(1, bins, W) for _ in range(R)]
    lut, t = det.lut, _Tally()
    lo, scale, proj = det.params.lo, det._scale, det.params.proj
    out = []
    for occ_i, x in enumerate(np.atleast_2d(X)):
        occ = min(occ_i, W)
        n_in = W - 1 if occ == W else occ
        sub = []
        for r in range(R):
            p = _project(x, proj[r], t)
            v = (p - lo[r]) * scale[r]
            t += 2
            idx = int(np.floor(min(max(v, 0.0), bins - 1.0)))
            c = int(tables[r].admit([idx])[0])
            t += _WINDOW_OPS
            c1 = c + 1
            t += 1
            sub.append(lut[n_in + 1] - lut[c1])
            t += 1
        out.append(_mean(sub, t))
        t += 1  # occupancy
    return OpTrace(t.n, np.array(out))


def count_rshash(det, X) -> OpTrace:
    R, W, w, mod = det.n_estimators, det.window, det.rows, det.mod
    P = det.params
    tables = [SlidingCountTable(w, mod, W) for _ in range(R)]
    neg_lut, t = -det.lut, _Tally()
    out = []
    for x in np.atleast_2d(X):
        sub = []
        for r in range(R):
            key = []
            for j in range(det.dimension):
                norm = (x[j] - P.lo[j]) * det._inv_range[j]
                norm = min(max(norm, 0.0), 1.0)
                key.append(_code((norm + P.alpha[r, j]) * det._inv_f[r]))
                t += 4
            cols = []
            for row in range(w):
                cols.append(_hash(key, row + 1, t) % mod)
                t += 1
            counts = tables[r].admit(cols)
            best = None
            for c in counts:
                t += _WINDOW_OPS
                c1 = int(c) + 1
                t += 1
                best = c1 if best is None or c1 < best else best
                t += 1
            sub.append(neg_lut[best])
        out.append(_mean(sub, t))
        t += 1
    return OpTrace(t.n, np.array(out))


def count_xstream(det, X) -> OpTrace:
    R, W, w, mod, K = det.n_estimators, det.window, det.rows, det.mod, det.k
    P = det.params
    tables = [SlidingCountTable(w, mod, W) for _ in range(R)]
    lut, t = det.lut, _Tally()
    out = []
    for x in np.atleast_2d(X):
        sub = []
        for r in range(R):
            p = [_project(x, P.proj[r, :, k], t) for k in range(K)]
            cols = []
            for row in range(w):
                key = []
                for k in range(K):
                    key.append(_code((p[k] + P.shift[r, k]) * det._inv_delta[r, row, k]))
                    t += 2
                cols.append(_hash(key, row + 1, t) % mod)
                t += 1
            counts = tables[r].admit(cols)
            best = None
            for row, c in enumerate(counts):
                t += _WINDOW_OPS
                rs = lut[int(c) + 1] + (row + 1)
                t += 2
                best = rs if best is None or rs < best else best
                t += 1
            sub.append(0.0 - best)
            t += 1
        out.append(_mean(sub, t))
        t += 1
    return OpTrace(t.n, np.array(out))


COUNTERS = {"loda": count_loda, "rshash": count_rshash, "xstream": count_xstream}


def count_ops(det, X) -> OpTrace:
    """Replay ``X`` through a calibrated real-mode detector and tally operations.

    The detector itself is not advanced.
    """
    if det.fixed_point:
        raise ValueError("operation counting is defined for real mode only")
    if not det.calibrated:
        from .detectors import NotCalibratedError

        raise NotCalibratedError(f"{det.kind} detector is not calibrated")
    return COUNTERS[det.kind](det, np.asarray(X, dtype=np.float64))


def observed_formula(kind, N, R, d, w=1, k=1) -> int:
    """Closed form of what the counters tally (equals ``op_count`` for Loda and RS-Hash)."""
    if kind == "loda":
        return N * (2 * R * d + 7 * R + 2)
    if kind == "rshash":
        return N * (5 * R * d * w + 4 * R * d + 11 * R * w + R + 2)
    if kind == "xstream":
        return N * (2 * R * d * k + 7 * R * k * w + 12 * R * w + 2 * R + 2)
    raise ValueError(f"unknown detector kind {kind!r}")
