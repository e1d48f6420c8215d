import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st
from scipy.stats import spearmanr

from sead.combiners import combine_labels, combine_scores, normalize, threshold_labels
from sead.evaluation import auc_roc


def test_normalize_examples():
    n = normalize([1, 2, 3])
    assert n[0] == 0 and n[1] == pytest.approx(0.5) and 0.999 < n[2] < 1
    assert normalize([5, 5, 5]).tolist() == [0, 0, 0]
    with pytest.raises(ValueError):
        normalize([])


def test_score_examples():
    ins = [[0.2], [0.4], [0.6]]
    assert combine_scores("averaging", ins)[0] == pytest.approx(0.4)
    assert combine_scores("maximization", ins)[0] == 0.6
    # Printed weighted formula divides by N.
    assert combine_scores("weighted", ins, [0.5, 0.25, 0.25])[0] == pytest.approx(0.35 / 3)
    assert combine_scores("weighted", ins, [0.5, 0.25, 0.25], conventional=True)[0] == pytest.approx(0.35)


def test_score_errors():
    with pytest.raises(ValueError, match="length mismatch"):
        combine_scores("averaging", [[1, 2], [1]])
    with pytest.raises(ValueError, match="needs weights"):
        combine_scores("weighted", [[1], [2]])
    with pytest.raises(ValueError, match="sum to 1"):
        combine_scores("weighted", [[1], [2]], [0.5, 0.6])
    with pytest.raises(ValueError):
        combine_scores("weighted", [[1], [2]], [1.0])
    with pytest.raises(ValueError):
        combine_scores("median", [[1]])


def test_label_examples():
    assert combine_labels("or", [[0], [1], [0]]).tolist() == [1]
    assert combine_labels("voting", [[1], [1], [0]]).tolist() == [1]
    assert combine_labels("voting", [[1], [0]]).tolist() == [1]
    assert combine_labels("voting", [[1], [0], [0]]).tolist() == [0]
    with pytest.raises(ValueError, match="length mismatch"):
        combine_labels("or", [[0, 1], [1]])
    with pytest.raises(ValueError):
        combine_labels("or", [[2]])


def test_threshold_examples():
    lab = threshold_labels(np.linspace(0.1, 1.0, 10), 0.2)
    assert lab.tolist() == [0] * 8 + [1, 1]
    assert threshold_labels(np.full(10, 0.3), 0.1).sum() == 0
    s = np.random.default_rng(0).random(1831)
    assert abs(int(threshold_labels(s, 0.0961).sum()) - 176) <= 1
    for c in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            threshold_labels(s, c)


series = st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=60)


@given(series)
@example([-1.0, -1.480389387142401e-21, 0.0])
def test_normalize_range_and_order(s):
    n = normalize(s)
    # The epsilon keeps the top value below 1 only for spans near 1e-12 or less;
    # for wide spans the quotient rounds to exactly 1.0.
    assert np.all((n >= 0) & (n <= 1))
    # Near-equal values can round together after the shift, so order is weak
    # and the original maximum need only attain the normalized maximum.
    assert n[np.argmax(s)] == n.max()
    a = np.asarray(s)
    i, j = np.nonzero(a[:, None] < a[None, :])
    assert np.all(n[i] <= n[j])


@given(st.integers(2, 40), st.integers(0, 2 ** 32 - 1))
@settings(max_examples=40, deadline=None)
def test_normalized_auc_equals_raw_auc(n, seed):
    g = np.random.default_rng(seed)
    s = g.normal(size=n) * 1e3
    y = np.zeros(n, dtype=int)
    y[: n // 2] = 1
    g.shuffle(y)
    assert auc_roc(normalize(s), y) == auc_roc(s, y)


@given(st.integers(1, 6), st.integers(1, 30), st.integers(0, 2 ** 32 - 1))
@settings(max_examples=40, deadline=None)
def test_combiner_properties(k, n, seed):
    g = np.random.default_rng(seed)
    ins = [g.random(n) for _ in range(k)]
    perm = g.permutation(k)
    for m in ("averaging", "maximization"):
        a = combine_scores(m, ins)
        b = combine_scores(m, [ins[i] for i in perm])
        assert np.allclose(a, b, rtol=0, atol=1e-15)
    # N identical inputs under averaging is exactly the identity for N = 1, 2, 4.
    for reps in (1, 2, 4):
        assert np.array_equal(combine_scores("averaging", [ins[0]] * reps), ins[0])
    assert np.allclose(combine_scores("averaging", [ins[0]] * k), ins[0], rtol=1e-15)
    labs = [(g.random(n) < 0.3).astype(int) for _ in range(k)]
    o = combine_labels("or", labs)
    for l in labs:
        assert np.all(o >= l)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=200), st.floats(0.01, 0.99))
def test_threshold_fraction_bound(s, c):
    lab = threshold_labels(s, c)
    assert lab.mean() <= c + 1 / len(s) + 1e-12
