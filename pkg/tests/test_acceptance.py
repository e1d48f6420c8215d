"""Acceptance criteria, one test (or parametrized family) per criterion.

Each test records a PASS/FAIL line at the criterion's stated tolerance; the
lines are printed in the terminal summary. Cardio-based criteria need the
dataset (``SEAD_CARDIO`` or ``data/cardio.csv``) and skip otherwise.
"""

from collections import Counter, deque

import numpy as np
import pytest

from sead.detectors import Loda, RSHash, XStream, op_count
from sead.evaluation import auc_pairwise, auc_roc, bench, evaluate_outputs, sweep_ensemble
from sead.hashing import SlidingCountTable, jenkins_hash
from sead.io import gen_synthetic
from sead.opcount import count_ops
from sead.pipeline import (IDENTITY, DetectorSpec, Pipeline, RoutingTable, Slot, config_path,
                           load_config, stream_names)

SEEDS = list(range(10))
LODA_REF, RSHASH_REF, XSTREAM_REF = 0.931, 0.852, 0.922


def mean_auc(kind, stream, R, seeds=SEEDS, **opts):
    return float(sweep_ensemble(kind, stream, [R], seeds, options=opts).mean[0])


def test_c01_cardio_loda_accuracy(cardio, criterion):
    m = mean_auc("loda", cardio, 245, bins=20)
    ok = abs(m - LODA_REF) <= 0.04
    criterion("test_c01_cardio_loda_accuracy", ok,
              f"Loda R=245 mean AUC {m:.4f} vs {LODA_REF} (tol 0.04)")
    assert ok


def test_c02_cardio_rshash_xstream_accuracy(cardio, criterion):
    lo = mean_auc("loda", cardio, 245)
    rs = mean_auc("rshash", cardio, 175)
    xs = mean_auc("xstream", cardio, 140)
    within = abs(rs - RSHASH_REF) <= 0.06 and abs(xs - XSTREAM_REF) <= 0.06
    ordered = lo > xs > rs
    ok = within or ordered
    criterion("test_c02_cardio_rshash_xstream_accuracy", ok,
              f"RS-Hash {rs:.4f} vs {RSHASH_REF}, xStream {xs:.4f} vs {XSTREAM_REF} "
              f"(tol 0.06; fallback order Loda {lo:.4f} > xStream > RS-Hash: {ordered})")
    assert ok


def test_c03_cardio_ensemble_convergence(cardio, criterion):
    res = sweep_ensemble("loda", cardio, [5, 100], SEEDS)
    (m5, m100), (v5, v100) = res.mean, res.variance
    ok = v100 < v5 and m100 >= m5 - 0.005
    criterion("test_c03_cardio_ensemble_convergence", ok,
              f"var R=100 {v100:.2e} < R=5 {v5:.2e}; mean {m100:.4f} >= {m5:.4f} - 0.005")
    assert ok


def test_c04_or_labels_superset(criterion):
    s = gen_synthetic(1500, 6, 0.07, seed=4, name="data")
    p = load_config(config_path("combo/C223")).with_mode("sequential", block=250)
    res = p.run({"data": s})
    _, labels = evaluate_outputs(p, res, s.contamination)
    # COMBO-3 ORs COMBO-1 (RP-1..4) and COMBO-2 (RP-5..7), which OR their slots.
    final = labels["COMBO-3"]
    pos = s.labels == 1
    rec = lambda lab: lab[pos].mean()
    superset = all(np.all(final >= labels[f"RP-{i}"]) for i in range(1, 8))
    ok = superset and all(rec(final) >= rec(labels[f"RP-{i}"]) for i in range(1, 8))
    criterion("test_c04_or_labels_superset", ok,
              f"OR labels superset of all 7 slots; recall {rec(final):.3f} >= "
              f"max constituent {max(rec(labels[f'RP-{i}']) for i in range(1, 8)):.3f} (exact)")
    assert ok


@pytest.mark.parametrize("w", [1, 2])
def test_c05_cms_oracle(w, criterion):
    g = np.random.default_rng(100 + w)
    W, MOD = 128, 128
    keys = [tuple(int(v) for v in g.integers(-1000, 1000, size=3)) for _ in range(500)]
    key_cols = {k: [jenkins_hash(list(k), row + 1) % MOD for row in range(w)] for k in keys}
    table = SlidingCountTable(w, MOD, W)
    window = deque(maxlen=W)
    n_equal_checked = 0
    bad = 0
    for _ in range(10_000):
        k = keys[int(g.integers(0, len(keys)))]
        table.admit(key_cols[k])
        window.append(k)
        exact = Counter(window)
        q = table.query_min(key_cols[k])
        if q < exact[k]:
            bad += 1
        # Collision only if, in every row, another windowed key shares the column.
        free_row = any(all(key_cols[o][row] != key_cols[k][row] for o in exact if o != k)
                       for row in range(w))
        if free_row:
            n_equal_checked += 1
            if q != exact[k]:
                bad += 1
    ok = bad == 0
    criterion(f"test_c05_cms_oracle[w={w}]", ok,
              f"10000 admits, 500 keys, MOD=128, W=128: {bad} violations; "
              f"{n_equal_checked} collision-free queries exact")
    assert ok


MICRO = [(1, 1, 1, 1, 1), (3, 2, 4, 2, 5), (10, 5, 3, 2, 20), (7, 1, 21, 3, 2), (10, 35, 6, 2, 20)]


def micro_stream(N, d, seed):
    return np.random.default_rng(seed).normal(size=(N + 16, d))


@pytest.mark.parametrize("kind", ["loda", "rshash"])
def test_c06_op_count_matches_counter(kind, criterion):
    mism = []
    for N, R, d, w, k in MICRO:
        X = micro_stream(N, d, N * 7 + R)
        det = (Loda(d, R, window=16) if kind == "loda"
               else RSHash(d, R, window=16, rows=w)).calibrate(X[:16])
        got = count_ops(det, X[16:]).ops
        want = op_count(kind, N, R, d, 1 if kind == "loda" else w)
        if got != want:
            mism.append((N, R, d, w, got, want))
    ok = not mism
    criterion(f"test_c06_op_count_matches_counter[{kind}]", ok,
              f"{len(MICRO)} micro-streams N<=10: instrumented == formula" + (f"; {mism}" if mism else ""))
    assert ok


@pytest.mark.xfail(strict=True, reason="analytic xStream formula (5Rdw + 15Rw) does not count the "
                   "length-K hash key the detector actually hashes")
def test_c06_op_count_matches_counter_xstream(criterion):
    mism = []
    for N, R, d, w, k in MICRO:
        X = micro_stream(N, d, N * 7 + R)
        det = XStream(d, R, window=16, rows=w, k=k).calibrate(X[:16])
        got = count_ops(det, X[16:]).ops
        want = op_count("xstream", N, R, d, w, k)
        if got != want:
            mism.append((N, R, d, w, k, got, want))
    ok = not mism
    criterion("test_c06_op_count_matches_counter[xstream]", ok,
              f"{len(MICRO) - len(mism)}/{len(MICRO)} micro-streams match; counted "
              f"N(2RdK+7RKw+12Rw+2R+2) vs analytic N(2Rdk+5Rdw+15Rw+2R+2)")
    assert ok


@pytest.mark.parametrize("fig", ["fig-a", "fig-b", "fig-c", "fig-d"])
def test_c07_parallel_equals_sequential(fig, criterion):
    p = load_config(config_path(fig))
    streams = {n: gen_synthetic(500 + 31 * i, 5, 0.08, seed=i, name=n)
               for i, n in enumerate(stream_names(p))}
    seq = p.run(streams)
    par = p.with_mode("parallel", threads=4).run(streams)
    ok = all(np.array_equal(seq.sinks[c], par.sinks[c]) for c in seq.sinks)
    criterion(f"test_c07_parallel_equals_sequential[{fig}]", ok,
              f"{len(seq.sinks)} sink series bit-identical (no tolerance)")
    assert ok


def test_c08_slot_partition_equivalence(criterion):
    s = gen_synthetic(1000, 6, 0.08, seed=8, name="data")
    p = load_config(config_path("fig-c"))
    out = p.run({"data": s}).sinks["score"]
    mono = Loda(6, n_estimators=245).calibrate(s.X[:128]).score_stream(s.X)
    err = float(np.max(np.abs(out - mono)))
    ok = err <= 1e-9
    criterion("test_c08_slot_partition_equivalence", ok,
              f"7x35 Loda slots vs one 245 ensemble: max |diff| {err:.2e} (tol 1e-9)")
    assert ok


def test_c09_cardio_fixed_point_parity(cardio, criterion):
    W = 128
    real = Loda(cardio.dimension, 245).calibrate(cardio.X[:W]).score_stream(cardio.X)
    q = Loda(cardio.dimension, 245, fixed_point=True).calibrate(cardio.X[:W]).score_stream(cardio.X)
    d = abs(auc_roc(real, cardio.labels) - auc_roc(q, cardio.labels))
    ok = d < 0.01
    criterion("test_c09_cardio_fixed_point_parity", ok,
              f"Loda Q16.16 vs real Score-AUC diff {d:.5f} (tol 0.01)")
    assert ok


def test_c10_auc_oracle(criterion):
    g = np.random.default_rng(10)
    bad = 0
    for _ in range(1000):
        n = int(g.integers(2, 201))
        s = g.integers(0, int(g.integers(1, 20)), size=n).astype(float)
        y = g.integers(0, 2, size=n)
        y[:2] = [0, 1]
        g.shuffle(y)
        if auc_roc(s, y) != auc_pairwise(s, y):
            bad += 1
    ok = bad == 0
    criterion("test_c10_auc_oracle", ok, f"1000 instances, length <= 200, ties 0.5: {bad} mismatches (exact)")
    assert ok


def test_c11_hot_swap_suffix_equivalence(criterion):
    s = gen_synthetic(900, 4, 0.08, seed=11, name="data")
    p = load_config(config_path("fig-c"))
    t = 333
    new = DetectorSpec("loda", 30, seed=77)
    p.start({"data": s})
    p.advance(t)
    p.swap_slot("RP-4", new)
    res = p.finish()
    fresh = Pipeline([Slot("RP-4", "rp", new)], RoutingTable([], {"RP-4": "o"}),
                     {"RP-4": "data"}).run({"data": s.slice(t)})
    ok = np.array_equal(res.outputs["RP-4"][t:], fresh.sinks["o"])
    # Identity -> detector on a pass-through channel as well.
    q = Pipeline([Slot("RP-1", "rp", IDENTITY)], RoutingTable([], {"RP-1": "o"}), {"RP-1": "data"})
    q.start({"data": s})
    q.advance(t)
    q.swap_slot("RP-1", new)
    out = q.finish().sinks["o"]
    ok = ok and np.array_equal(out[:t], s.X[:t, 0]) and np.array_equal(out[t:], fresh.sinks["o"])
    criterion("test_c11_hot_swap_suffix_equivalence", ok,
              f"swap at t={t}: post-swap outputs equal a fresh pipeline on the suffix (exact)")
    assert ok


def test_c12_report_only_metrics(criterion):
    s = gen_synthetic(4000, 3, 0.05, seed=12, name="data")
    p = load_config(config_path("fig-c"))
    res = bench(p, {"data": s}, threads=[2], block=256)
    seq = res.reports[0]
    q = Pipeline([Slot("RP-1", "rp", IDENTITY)], RoutingTable([], {"RP-1": "o"}), {"RP-1": "data"})
    q.start({"data": s})
    q.advance(100)
    cost = q.measure_swap_cost("RP-1", DetectorSpec("loda", 35))
    criterion("test_c12_report_only_metrics", "REPORTED",
              f"fig-c N=4000 d=3: {seq.gops:.3f} GOPS sequential; swap identity->Loda(35) "
              f"{cost * 1e3:.2f} ms (no gate)")
