import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sead.detectors import (CAPACITY, DetectorSpec, Loda, NotCalibratedError, RSHash, XStream,
                            log2_table, make_detector, op_count)
from sead.hashing import jenkins_hash

CLASSES = [Loda, RSHash, XStream]


def calibrated(cls, X, **kw):
    kw.setdefault("n_estimators", 4)
    kw.setdefault("window", 32)
    return cls(X.shape[1], **kw).calibrate(X[:kw["window"]])


@pytest.fixture(scope="module")
def X():
    g = np.random.default_rng(3)
    X = g.normal(size=(300, 5))
    X[::37] += 5.0
    return X


def test_log2_table():
    lut = log2_table(128)
    assert lut.shape == (130,) and lut[1] == 0.0 and lut[128] == 7.0


# --- spec examples ---------------------------------------------------------


def test_loda_first_sample_scores_zero(X):
    d = calibrated(Loda, X, n_estimators=1)
    assert d.process(X[0]) == 0.0


def test_loda_empty_bin_with_127_in_window():
    # 127 samples at one extreme, then a sample at the other: c=0, occupancy 127.
    d = Loda(1, n_estimators=1, window=128).calibrate(np.array([[0.0], [1.0]]))
    sign = np.sign(d.params.proj[0, 0])
    for _ in range(127):
        d.process([-10.0 * sign])
    assert d.process([10.0 * sign]) == 7.0


def test_loda_full_bin_scores_zero():
    d = Loda(1, n_estimators=1, window=128).calibrate(np.array([[0.0], [1.0]]))
    for _ in range(200):
        s = d.process([0.5])
    assert s == 0.0  # -log2(128/128) once the window is full of the same bin


def test_rshash_first_sample_and_repeats():
    d = RSHash(3, n_estimators=1, window=64).calibrate(np.random.default_rng(0).normal(size=(64, 3)))
    x = np.array([0.1, -0.2, 0.3])
    scores = [d.process(x) for _ in range(8)]
    assert scores[0] == 0.0
    # Identical sample admitted 7 times: min count 7 -> -log2(8).
    assert scores[7] == -3.0


def test_xstream_first_sample_minus_one(X):
    d = calibrated(XStream, X, n_estimators=3, k=4)
    assert d.process(X[0]) == -1.0


def test_identical_subdetectors_mean(X):
    # A sub-detector's parameters depend only on (seed, index).
    one = calibrated(RSHash, X, n_estimators=1, first_index=2)
    also = calibrated(RSHash, X, n_estimators=3)
    s1 = one.score_stream(X[:50])
    _, subs = zip(*[also.process_sub(x) for x in X[:50]])
    assert np.array_equal(s1, np.array(subs)[:, 2])


# --- invariants ------------------------------------------------------------


@pytest.mark.parametrize("cls", CLASSES)
@pytest.mark.parametrize("fixed_point", [False, True])
def test_backends_bit_identical(cls, fixed_point, X):
    a = calibrated(cls, X, backend="numba", fixed_point=fixed_point).score_stream(X)
    b = calibrated(cls, X, backend="numpy", fixed_point=fixed_point).score_stream(X)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("cls", CLASSES)
@pytest.mark.parametrize("fixed_point", [False, True])
def test_stream_equals_per_sample(cls, fixed_point, X, backend):
    d = calibrated(cls, X, backend=backend, fixed_point=fixed_point)
    a = d.score_stream(X)
    d.reset()
    b = np.array([d.process(x) for x in X])
    assert np.array_equal(a, b)


@pytest.mark.parametrize("cls", CLASSES)
def test_determinism(cls, X):
    a = calibrated(cls, X, seed=9).score_stream(X)
    b = calibrated(cls, X, seed=9).score_stream(X)
    c = calibrated(cls, X, seed=10).score_stream(X)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


@pytest.mark.parametrize("cls", CLASSES)
def test_score_is_mean_of_subscores(cls, X):
    d = calibrated(cls, X, n_estimators=7)
    for x in X[:60]:
        s, sub = d.process_sub(x)
        assert abs(s - sub.mean()) <= 4 * np.spacing(max(abs(s), 1.0))


@pytest.mark.parametrize("cls", CLASSES)
def test_repeated_sample_non_increasing(cls, X):
    d = calibrated(cls, X, n_estimators=3)
    subs = np.array([d.process_sub(X[5])[1] for _ in range(100)])
    assert np.all(np.diff(subs, axis=0) <= 0)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40))
@settings(max_examples=60, deadline=None)
def test_loda_bins_in_range(values):
    d = Loda(1, n_estimators=2, window=8, bins=5).calibrate(np.array([[0.0], [1.0]]))
    for v in values:
        d.process([v])
        assert d.counts.min() >= 0 and d.counts.sum() <= 2 * 8
    assert d.counts.shape == (2, 1, 5)


def test_xstream_degenerate_k1():
    X = np.linspace(-1, 1, 64).reshape(-1, 1)
    a = XStream(1, n_estimators=1, k=1, window=16)
    a.params.proj[:] = 1.0
    b = XStream(1, n_estimators=1, k=1, window=16)
    b.params.proj[:] = 1.0
    sa = a.calibrate(X[:16]).score_stream(X)
    sb = b.calibrate(X[:16]).score_stream(X)
    assert np.array_equal(sa, sb)
    assert sa[0] == -1.0


def test_xstream_shift_off_matches_plain_flooring():
    X = np.random.default_rng(2).normal(size=(40, 3))
    d = XStream(3, n_estimators=1, k=2, rows=2, window=16, shift=False).calibrate(X[:16])
    assert np.all(d.params.shift == 0)
    p = d.project(X[:1])[0, 0]
    for row in range(2):
        key = np.floor(p * d._inv_delta[0, row]).astype(np.int64)
        ref = np.floor(p / (d.params.delta[0] / 2 ** row)).astype(np.int64)
        assert np.array_equal(key, ref)
    assert jenkins_hash(key.tolist(), 1) >= 0


def test_xstream_shift_in_bin_width():
    X = np.random.default_rng(2).normal(size=(40, 3))
    d = XStream(3, n_estimators=5, window=16).calibrate(X[:16])
    assert np.all(d.params.shift >= 0) and np.all(d.params.shift < d.params.delta)


@pytest.mark.parametrize("cls", CLASSES)
def test_fixed_point_close_to_real(cls):
    X = np.random.default_rng(8).normal(size=(400, 4))
    r = cls(4, window=64).calibrate(X[:64]).score_stream(X)
    q = cls(4, window=64, fixed_point=True).calibrate(X[:64]).score_stream(X)
    assert np.mean(np.abs(r - q) < 0.05) >= 0.95


# --- errors and calibration -------------------------------------------------


@pytest.mark.parametrize("cls", CLASSES)
def test_errors(cls, X):
    d = cls(5, n_estimators=2, window=16)
    with pytest.raises(NotCalibratedError):
        d.process(X[0])
    with pytest.raises(ValueError, match="empty"):
        d.calibrate(np.zeros((0, 5)))
    with pytest.raises(ValueError, match="dimension mismatch"):
        d.calibrate(np.zeros((20, 4)))
    with pytest.warns(UserWarning, match="shorter than the window"):
        d.calibrate(X[:5])
    with pytest.raises(ValueError, match="dimension mismatch"):
        d.process(np.zeros(3))
    with pytest.raises(ValueError):
        cls(5, n_estimators=0)


@pytest.mark.parametrize("cls", CLASSES)
def test_constant_prefix_calibrates(cls):
    d = cls(2, n_estimators=2, window=8).calibrate(np.full((8, 2), 3.0))
    s = d.score_stream(np.full((20, 2), 3.0))
    assert np.all(np.isfinite(s))


def test_calibration_bounds_and_determinism(X):
    d = RSHash(5, n_estimators=2, window=32).calibrate(X)
    span = X.max(0) - X.min(0)
    assert np.allclose(d.params.lo, X.min(0) - 0.05 * span)
    assert np.allclose(d.params.hi, X.max(0) + 0.05 * span)
    e = RSHash(5, n_estimators=2, window=32).calibrate(X)
    assert np.array_equal(d.params.lo, e.params.lo)


def test_rshash_parameter_ranges():
    d = RSHash(6, n_estimators=50, window=128)
    lo = 1 / np.sqrt(128)
    assert np.all((d.params.f >= lo) & (d.params.f <= 1 - lo))
    assert np.all((d.params.alpha >= 0) & (d.params.alpha < d.params.f[:, None]))


def test_out_of_range_values_clamped(X):
    for cls in CLASSES:
        d = calibrated(cls, X)
        s = d.score_stream(np.array([[1e9] * 5, [-1e9] * 5, [0.0] * 5]))
        assert np.all(np.isfinite(s))


def test_spec_and_factory():
    spec = DetectorSpec("xstream", 20, options={"k": 7, "rows": 3})
    d = spec.build(4)
    assert isinstance(d, XStream) and d.k == 7 and d.rows == 3 and spec.rows == 3
    assert DetectorSpec("loda", 35).rows == 1
    assert isinstance(make_detector("loda", 3), Loda)
    with pytest.raises(ValueError):
        DetectorSpec("tree", 3)
    assert CAPACITY == {"loda": 35, "rshash": 25, "xstream": 20}


# --- op_count formulas --------------------------------------------------------


def test_op_count_table_examples():
    assert op_count("loda", 1, 1, 1) == 11
    assert op_count("rshash", 1, 1, 1, 1) == 23
    assert op_count("xstream", 1, 1, 1, 1, 1) == 26
    assert op_count("loda", 567498, 245, 3) == 567498 * (2 * 245 * 3 + 7 * 245 + 2)
    with pytest.raises(ValueError):
        op_count("loda", 0, 1, 1)
    with pytest.raises(ValueError):
        op_count("tree", 1, 1, 1)
