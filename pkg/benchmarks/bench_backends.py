"""Time the numba kernels against the pure-numpy fallback.

Both backends must produce identical scores; the script checks that before
reporting. Usage::

    python benchmarks/bench_backends.py [--n 4000] [--d 21] [--repeat 3]
"""
import argparse
import time

import numpy as np

from sead.detectors import CAPACITY, DETECTORS
from sead.io import gen_synthetic


def time_one(kind, backend, X, fixed_point, repeat, window):
    det = DETECTORS[kind](X.shape[1], n_estimators=CAPACITY[kind], window=window,
                          fixed_point=fixed_point, backend=backend)
    det.calibrate(X[:window])
    det.score_stream(X[:window])  # warm up (numba compile / cache load)
    best = np.inf
    for _ in range(repeat):
        det.reset()
        t0 = time.perf_counter()
        scores = det.score_stream(X)
        best = min(best, time.perf_counter() - t0)
    return best, scores


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=4000)
    ap.add_argument("--d", type=int, default=21)
    ap.add_argument("--window", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    X = gen_synthetic(args.n, args.d, 0.1, seed=0).X
    print(f"N={args.n} d={args.d} W={args.window}, best of {args.repeat}")
    print(f"{'detector':<9} {'mode':<5} {'numba s':>9} {'numpy s':>9} {'speedup':>8} {'equal':>6}")
    for kind in DETECTORS:
        for fq in (False, True):
            tn, sn = time_one(kind, "numba", X, fq, args.repeat, args.window)
            tp, sp = time_one(kind, "numpy", X, fq, args.repeat, args.window)
            mode = "q16" if fq else "real"
            print(f"{kind:<9} {mode:<5} {tn:9.4f} {tp:9.4f} {tp / tn:8.1f} "
                  f"{str(np.array_equal(sn, sp)):>6}")


if __name__ == "__main__":
    main()
