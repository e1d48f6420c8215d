"""Per-sample ensemble kernels compiled with numba.

Every ``*_step`` consumes one sample for all R sub-detectors, mutates the
count tables in place and returns the ensemble mean. ``*_run`` loops a
step over a whole matrix. The numpy twins in ``kernels_numpy`` perform the
same floating-point operations in the same order.

Table layout shared by all kernels::

    counts : int64 (R, w, columns)
    ring   : int64 (W, R, w)   column touched by each windowed sample
"""

import numpy as np

from ._accel import njit
from .hashing import INT32_MAX, INT32_MIN, jenkins_kernel

_M32 = 0xFFFFFFFF


@njit(inline="always")
def _wrap(v):
    return ((v + 2147483648) & _M32) - 2147483648


@njit(inline="always")
def _qmul(a, b):
    return _wrap((a * b) >> 16)


@njit(inline="always")
def _code(v):
    if v < INT32_MIN:
        v = INT32_MIN
    elif v > INT32_MAX:
        v = INT32_MAX
    return np.int64(np.floor(v))


@njit(inline="always")
def _admit(counts, ring, r, row, col, head, full):
    if full:
        counts[r, row, ring[head, r, row]] -= 1
    c = counts[r, row, col]
    counts[r, row, col] = c + 1
    ring[head, r, row] = col
    return c


@njit(inline="always")
def _ordered_sum(sub):
    total = sub[0]
    for r in range(1, sub.shape[0]):
        total += sub[r]
    return total


# --- real-valued ------------------------------------------------------------


@njit
def loda_step(x, proj, lo, scale, bins, counts, ring, head, occ, lut, sub):
    R, d = proj.shape
    W = ring.shape[0]
    full = occ == W
    n_in = W - 1 if full else occ
    for r in range(R):
        p = 0.0
        for j in range(d):
            p += x[j] * proj[r, j]
        t = (p - lo[r]) * scale[r]
        t = min(max(t, 0.0), bins - 1.0)
        c = _admit(counts, ring, r, 0, np.int64(np.floor(t)), head, full)
        sub[r] = lut[n_in + 1] - lut[c + 1]
    return _ordered_sum(sub) / R


@njit
def rshash_step(x, lo, inv_range, alpha, inv_f, mod, counts, ring, head, occ, lut, sub, key):
    R, d = alpha.shape
    w = counts.shape[1]
    full = occ == ring.shape[0]
    for r in range(R):
        for j in range(d):
            norm = (x[j] - lo[j]) * inv_range[j]
            norm = min(max(norm, 0.0), 1.0)
            key[j] = _code((norm + alpha[r, j]) * inv_f[r])
        minc = np.int64(1) << 62
        for row in range(w):
            col = jenkins_kernel(key, d, row + 1) % mod
            c = _admit(counts, ring, r, row, col, head, full)
            if c < minc:
                minc = c
        sub[r] = 0.0 - lut[minc + 1]
    return _ordered_sum(sub) / R


@njit
def xstream_step(x, proj, inv_delta, shift, mod, counts, ring, head, occ, lut, sub, p, key):
    R, d, K = proj.shape
    w = counts.shape[1]
    full = occ == ring.shape[0]
    for r in range(R):
        for k in range(K):
            p[k] = 0.0
        for j in range(d):
            for k in range(K):
                p[k] += x[j] * proj[r, j, k]
        best = np.inf
        for row in range(w):
            for k in range(K):
                key[k] = _code((p[k] + shift[r, k]) * inv_delta[r, row, k])
            col = jenkins_kernel(key, K, row + 1) % mod
            c = _admit(counts, ring, r, row, col, head, full)
            rs = lut[c + 1] + (row + 1)
            if rs < best:
                best = rs
        sub[r] = 0.0 - best
    return _ordered_sum(sub) / R


# --- Q16.16 -----------------------------------------------------------------


@njit(inline="always")
def _q_mean(sub, inv_r):
    total = np.int64(0)
    for r in range(sub.shape[0]):
        total = _wrap(total + sub[r])
    return _qmul(total, inv_r)


@njit
def loda_step_q(xq, projq, loq, scaleq, bins, counts, ring, head, occ, lutq, inv_r, sub):
    R, d = projq.shape
    W = ring.shape[0]
    full = occ == W
    n_in = W - 1 if full else occ
    for r in range(R):
        p = np.int64(0)
        for j in range(d):
            p = _wrap(p + _qmul(xq[j], projq[r, j]))
        idx = _qmul(_wrap(p - loq[r]), scaleq[r]) >> 16
        idx = min(max(idx, 0), bins - 1)
        c = _admit(counts, ring, r, 0, idx, head, full)
        sub[r] = _wrap(lutq[n_in + 1] - lutq[c + 1])
    return _q_mean(sub, inv_r)


@njit
def rshash_step_q(xq, loq, inv_rangeq, alphaq, inv_fq, mod, counts, ring, head, occ,
                  lutq, inv_r, sub, key):
    R, d = alphaq.shape
    w = counts.shape[1]
    full = occ == ring.shape[0]
    one = np.int64(1) << 16
    for r in range(R):
        for j in range(d):
            norm = _qmul(_wrap(xq[j] - loq[j]), inv_rangeq[j])
            norm = min(max(norm, 0), one)
            key[j] = _qmul(_wrap(norm + alphaq[r, j]), inv_fq[r]) >> 16
        minc = np.int64(1) << 62
        for row in range(w):
            col = jenkins_kernel(key, d, row + 1) % mod
            c = _admit(counts, ring, r, row, col, head, full)
            if c < minc:
                minc = c
        sub[r] = _wrap(-lutq[minc + 1])
    return _q_mean(sub, inv_r)


@njit
def xstream_step_q(xq, projq, inv_deltaq, shiftq, mod, counts, ring, head, occ, lutq, inv_r,
                   sub, p, key):
    R, d, K = projq.shape
    w = counts.shape[1]
    full = occ == ring.shape[0]
    for r in range(R):
        for k in range(K):
            p[k] = 0
        for j in range(d):
            for k in range(K):
                p[k] = _wrap(p[k] + _qmul(xq[j], projq[r, j, k]))
        best = np.int64(1) << 62
        for row in range(w):
            for k in range(K):
                key[k] = _qmul(_wrap(p[k] + shiftq[r, k]), inv_deltaq[r, row, k]) >> 16
            col = jenkins_kernel(key, K, row + 1) % mod
            c = _admit(counts, ring, r, row, col, head, full)
            rs = _wrap(lutq[c + 1] + ((row + 1) << 16))
            if rs < best:
                best = rs
        sub[r] = _wrap(-best)
    return _q_mean(sub, inv_r)


# --- whole-stream drivers ---------------------------------------------------


@njit(inline="always")
def _advance(head, occ, W):
    return (head + 1) % W, min(occ + 1, W)


@njit
def loda_run(X, proj, lo, scale, bins, counts, ring, head, occ, lut, out):
    sub = np.empty(proj.shape[0])
    W = ring.shape[0]
    for i in range(X.shape[0]):
        out[i] = loda_step(X[i], proj, lo, scale, bins, counts, ring, head, occ, lut, sub)
        head, occ = _advance(head, occ, W)
    return head, occ


@njit
def rshash_run(X, lo, inv_range, alpha, inv_f, mod, counts, ring, head, occ, lut, out):
    sub = np.empty(alpha.shape[0])
    key = np.empty(alpha.shape[1], dtype=np.int64)
    W = ring.shape[0]
    for i in range(X.shape[0]):
        out[i] = rshash_step(X[i], lo, inv_range, alpha, inv_f, mod, counts, ring, head, occ, lut,
                             sub, key)
        head, occ = _advance(head, occ, W)
    return head, occ


@njit
def xstream_run(X, proj, inv_delta, shift, mod, counts, ring, head, occ, lut, out):
    R, _, K = proj.shape
    sub = np.empty(R)
    p = np.empty(K)
    key = np.empty(K, dtype=np.int64)
    W = ring.shape[0]
    for i in range(X.shape[0]):
        out[i] = xstream_step(X[i], proj, inv_delta, shift, mod, counts, ring, head, occ, lut, sub,
                              p, key)
        head, occ = _advance(head, occ, W)
    return head, occ


@njit
def loda_run_q(XQ, projq, loq, scaleq, bins, counts, ring, head, occ, lutq, inv_r, out):
    sub = np.empty(projq.shape[0], dtype=np.int64)
    W = ring.shape[0]
    for i in range(XQ.shape[0]):
        out[i] = loda_step_q(XQ[i], projq, loq, scaleq, bins, counts, ring, head, occ,
                             lutq, inv_r, sub)
        head, occ = _advance(head, occ, W)
    return head, occ


@njit
def rshash_run_q(XQ, loq, inv_rangeq, alphaq, inv_fq, mod, counts, ring, head, occ, lutq,
                 inv_r, out):
    sub = np.empty(alphaq.shape[0], dtype=np.int64)
    key = np.empty(alphaq.shape[1], dtype=np.int64)
    W = ring.shape[0]
    for i in range(XQ.shape[0]):
        out[i] = rshash_step_q(XQ[i], loq, inv_rangeq, alphaq, inv_fq, mod, counts, ring,
                               head, occ, lutq, inv_r, sub, key)
        head, occ = _advance(head, occ, W)
    return head, occ


@njit
def xstream_run_q(XQ, projq, inv_deltaq, shiftq, mod, counts, ring, head, occ, lutq, inv_r, out):
    R, _, K = projq.shape
    sub = np.empty(R, dtype=np.int64)
    p = np.empty(K, dtype=np.int64)
    key = np.empty(K, dtype=np.int64)
    W = ring.shape[0]
    for i in range(XQ.shape[0]):
        out[i] = xstream_step_q(XQ[i], projq, inv_deltaq, shiftq, mod, counts, ring, head, occ,
                                lutq, inv_r, sub, p, key)
        head, occ = _advance(head, occ, W)
    return head, occ
