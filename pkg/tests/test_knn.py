import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diagkit.dataset import kfold
from diagkit.knn import knn_fit, knn_predict, knn_scores, knn_select_k, knn_train_scores


def _oracle_scores(X, y, Q, k, exclude_self=False):
    out = []
    for qi, q in enumerate(Q):
        cands = []
        for i, x in enumerate(X):
            if exclude_self and i == qi:
                continue
            cands.append((float(np.sum((q - x) ** 2)), i))
        cands.sort()
        out.append(sum(y[i] for _, i in cands[:k]) / k)
    return np.array(out)


def test_query_equal_to_training_point():
    X = np.array([[0.0, 0.0], [3.0, 1.0], [5.0, 5.0]])
    model = knn_fit(X, [0, 1, 1], k=1)
    assert knn_predict(model, [3.0, 1.0]) == (1, 1.0)
    assert knn_predict(model, [0.0, 0.0]) == (0, 0.0)


def test_three_point_majority():
    model = knn_fit(np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 5.0]]), [0, 0, 1], k=3)
    label, score = knn_predict(model, [0.4, 0.0])
    assert label == 0 and score == pytest.approx(1 / 3)


def test_vote_tie_goes_negative():
    model = knn_fit(np.array([[0.0], [1.0]]), [1, 0], k=2)
    assert knn_predict(model, [0.5]) == (0, 0.5)


def test_distance_tie_prefers_lower_index():
    X = np.array([[1.0], [-1.0], [1.0]])
    assert knn_predict(knn_fit(X, [1, 0, 0], k=1), [0.0]) == (1, 1.0)
    assert knn_predict(knn_fit(X, [0, 1, 1], k=1), [0.0]) == (0, 0.0)


def test_matches_exhaustive_oracle():
    r = np.random.default_rng(0)
    X = np.round(r.normal(size=(40, 3)), 1)  # rounding creates distance ties
    y = (r.random(40) < 0.4).astype(int)
    Q = np.round(r.normal(size=(25, 3)), 1)
    model = knn_fit(X, y, k=5)
    np.testing.assert_array_equal(knn_scores(model, Q), _oracle_scores(X, y, Q, 5))
    np.testing.assert_array_equal(knn_train_scores(model, leave_one_out=True), _oracle_scores(X, y, X, 5, True))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 30), st.integers(1, 4))
def test_oracle_property(seed, n, p):
    r = np.random.default_rng(seed)
    X = r.integers(-2, 3, size=(n, p)).astype(float)
    y = r.integers(0, 2, size=n)
    k = int(r.integers(1, n + 1))
    Q = r.integers(-2, 3, size=(7, p)).astype(float)
    np.testing.assert_array_equal(knn_scores(knn_fit(X, y, k), Q), _oracle_scores(X, y, Q, k))


def test_self_mode_counts_own_point():
    X = np.array([[0.0], [10.0]])
    model = knn_fit(X, [1, 0], k=1)
    np.testing.assert_array_equal(knn_train_scores(model), [1.0, 0.0])
    np.testing.assert_array_equal(knn_train_scores(model, leave_one_out=True), [0.0, 1.0])


def test_invalid_k_and_dimensions():
    with pytest.raises(ValueError):
        knn_fit(np.zeros((3, 2)), [0, 1, 0], k=4)
    with pytest.raises(ValueError):
        knn_fit(np.zeros((3, 2)), [0, 1, 0], k=0)
    with pytest.raises(ValueError):
        knn_scores(knn_fit(np.zeros((3, 2)), [0, 1, 0], k=1), np.zeros((1, 3)))


def test_chunking_does_not_change_scores():
    r = np.random.default_rng(2)
    X = r.normal(size=(500, 30))
    y = r.integers(0, 2, size=500)
    Q = r.normal(size=(400, 30))
    model = knn_fit(X, y, k=7)
    full = np.array([knn_scores(model, q[None, :])[0] for q in Q])
    np.testing.assert_array_equal(knn_scores(model, Q), full)


def test_select_k_single_and_tie():
    r = np.random.default_rng(1)
    X = r.normal(size=(30, 2))
    y = (X[:, 0] > 0).astype(int)
    folds = kfold(30, 5, 0)
    assert knn_select_k(X, y, [3], folds)[0] == 3
    # all-one labels: every k has zero error, so the smallest wins
    best, errors = knn_select_k(X, np.ones(30, dtype=int), [7, 1, 3], folds)
    assert best == 1 and set(errors) == {1, 3, 7}
    with pytest.raises(ValueError):
        knn_select_k(X, y, [], folds)
