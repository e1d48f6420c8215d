"""Pure-numpy twins of ``kernels_numba``, vectorized over sub-detectors.

Signatures and results match the numba kernels bit for bit: projections
accumulate sequentially over the input dimension, the ensemble sum runs
in sub-detector order and log2 comes from the shared lookup table.
"""

import numpy as np

from .hashing import INT32_MAX, INT32_MIN, jenkins_rows

_M32 = np.int64(0xFFFFFFFF)
_HALF = np.int64(1 << 31)


def _wrap(v):
    return ((v + _HALF) & _M32) - _HALF


def _qmul(a, b):
    return _wrap((a * b) >> 16)


def _code(v):
    return np.floor(np.clip(v, INT32_MIN, INT32_MAX)).astype(np.int64)


def _admit(counts, ring, row, cols, head, full):
    ar = np.arange(counts.shape[0])
    if full:
        counts[ar, row, ring[head, :, row]] -= 1
    c = counts[ar, row, cols]
    counts[ar, row, cols] = c + 1
    ring[head, :, row] = cols
    return c


def _ordered_mean(sub):
    return np.add.accumulate(sub)[-1] / sub.shape[0]


# --- real-valued ------------------------------------------------------------


def loda_step(x, proj, lo, scale, bins, counts, ring, head, occ, lut, sub):
    R, d = proj.shape
    W = ring.shape[0]
    full = occ == W
    n_in = W - 1 if full else occ
    p = np.zeros(R)
    for j in range(d):
        p += x[j] * proj[:, j]
    t = np.clip((p - lo) * scale, 0.0, bins - 1.0)
    c = _admit(counts, ring, 0, np.floor(t).astype(np.int64), head, full)
    sub[:] = lut[n_in + 1] - lut[c + 1]
    return _ordered_mean(sub)


def rshash_step(x, lo, inv_range, alpha, inv_f, mod, counts, ring, head, occ, lut, sub, key=None):
    w = counts.shape[1]
    full = occ == ring.shape[0]
    norm = np.clip((x - lo) * inv_range, 0.0, 1.0)
    keys = _code((norm[None, :] + alpha) * inv_f[:, None])
    minc = None
    for row in range(w):
        cols = jenkins_rows(keys, row + 1) % mod
        c = _admit(counts, ring, row, cols, head, full)
        minc = c if minc is None else np.minimum(minc, c)
    sub[:] = 0.0 - lut[minc + 1]
    return _ordered_mean(sub)


def xstream_step(x, proj, inv_delta, shift, mod, counts, ring, head, occ, lut, sub, p=None, key=None):
    R, d, K = proj.shape
    w = counts.shape[1]
    full = occ == ring.shape[0]
    pr = np.zeros((R, K))
    for j in range(d):
        pr += x[j] * proj[:, j, :]
    best = None
    for row in range(w):
        keys = _code((pr + shift) * inv_delta[:, row, :])
        cols = jenkins_rows(keys, row + 1) % mod
        c = _admit(counts, ring, row, cols, head, full)
        rs = lut[c + 1] + (row + 1)
        best = rs if best is None else np.minimum(best, rs)
    sub[:] = 0.0 - best
    return _ordered_mean(sub)


# --- Q16.16 -----------------------------------------------------------------


def _q_mean(sub, inv_r):
    return int(_qmul(_wrap(np.int64(sub.sum())), np.int64(inv_r)))


def loda_step_q(xq, projq, loq, scaleq, bins, counts, ring, head, occ, lutq, inv_r, sub):
    R, d = projq.shape
    W = ring.shape[0]
    full = occ == W
    n_in = W - 1 if full else occ
    p = np.zeros(R, dtype=np.int64)
    for j in range(d):
        p = _wrap(p + _qmul(xq[j], projq[:, j]))
    idx = np.clip(_qmul(_wrap(p - loq), scaleq) >> 16, 0, bins - 1)
    c = _admit(counts, ring, 0, idx, head, full)
    sub[:] = _wrap(lutq[n_in + 1] - lutq[c + 1])
    return _q_mean(sub, inv_r)


def rshash_step_q(xq, loq, inv_rangeq, alphaq, inv_fq, mod, counts, ring, head, occ,
                  lutq, inv_r, sub, key=None):
    w = counts.shape[1]
    full = occ == ring.shape[0]
    norm = np.clip(_qmul(_wrap(xq - loq), inv_rangeq), 0, 1 << 16)
    keys = _qmul(_wrap(norm[None, :] + alphaq), inv_fq[:, None]) >> 16
    minc = None
    for row in range(w):
        cols = jenkins_rows(keys, row + 1) % mod
        c = _admit(counts, ring, row, cols, head, full)
        minc = c if minc is None else np.minimum(minc, c)
    sub[:] = _wrap(-lutq[minc + 1])
    return _q_mean(sub, inv_r)


def xstream_step_q(xq, projq, inv_deltaq, shiftq, mod, counts, ring, head, occ, lutq, inv_r,
                   sub, p=None, key=None):
    R, d, K = projq.shape
    w = counts.shape[1]
    full = occ == ring.shape[0]
    pr = np.zeros((R, K), dtype=np.int64)
    for j in range(d):
        pr = _wrap(pr + _qmul(xq[j], projq[:, j, :]))
    best = None
    for row in range(w):
        keys = _qmul(_wrap(pr + shiftq), inv_deltaq[:, row, :]) >> 16
        cols = jenkins_rows(keys, row + 1) % mod
        c = _admit(counts, ring, row, cols, head, full)
        rs = _wrap(lutq[c + 1] + ((row + 1) << 16))
        best = rs if best is None else np.minimum(best, rs)
    sub[:] = _wrap(-best)
    return _q_mean(sub, inv_r)


# --- whole-stream drivers ---------------------------------------------------


def _drive(step, X, out, ring, head, occ, sub, args_before, args_after):
    W = ring.shape[0]
    for i in range(X.shape[0]):
        out[i] = step(X[i], *args_before, head, occ, *args_after, sub)
        head = (head + 1) % W
        occ = min(occ + 1, W)
    return head, occ


def loda_run(X, proj, lo, scale, bins, counts, ring, head, occ, lut, out):
    sub = np.empty(proj.shape[0])
    return _drive(loda_step, X, out, ring, head, occ, sub,
                  (proj, lo, scale, bins, counts, ring), (lut,))


def rshash_run(X, lo, inv_range, alpha, inv_f, mod, counts, ring, head, occ, lut, out):
    sub = np.empty(alpha.shape[0])
    return _drive(rshash_step, X, out, ring, head, occ, sub,
                  (lo, inv_range, alpha, inv_f, mod, counts, ring), (lut,))


def xstream_run(X, proj, inv_delta, shift, mod, counts, ring, head, occ, lut, out):
    sub = np.empty(proj.shape[0])
    return _drive(xstream_step, X, out, ring, head, occ, sub,
                  (proj, inv_delta, shift, mod, counts, ring), (lut,))


def loda_run_q(XQ, projq, loq, scaleq, bins, counts, ring, head, occ, lutq, inv_r, out):
    sub = np.empty(projq.shape[0], dtype=np.int64)
    return _drive(loda_step_q, XQ, out, ring, head, occ, sub,
                  (projq, loq, scaleq, bins, counts, ring), (lutq, inv_r))


def rshash_run_q(XQ, loq, inv_rangeq, alphaq, inv_fq, mod, counts, ring, head, occ, lutq,
                 inv_r, out):
    sub = np.empty(alphaq.shape[0], dtype=np.int64)
    return _drive(rshash_step_q, XQ, out, ring, head, occ, sub,
                  (loq, inv_rangeq, alphaq, inv_fq, mod, counts, ring), (lutq, inv_r))


def xstream_run_q(XQ, projq, inv_deltaq, shiftq, mod, counts, ring, head, occ, lutq, inv_r, out):
    sub = np.empty(projq.shape[0], dtype=np.int64)
    return _drive(xstream_step_q, XQ, out, ring, head, occ, sub,
                  (projq, inv_deltaq, shiftq, mod, counts, ring), (lutq, inv_r))
