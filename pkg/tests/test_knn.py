import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gibbsel.knn import DEFAULT_K_GRID, KnnModelChoice, calibrate_k, error_curve, prior_error_rate
from gibbsel.reftable import scales


def brute_neighbors(Xtr, Xq, s, k):
    """Full sort of (distance, index) pairs; same float arithmetic as the classifier."""
    out = []
    Ts, Qs = Xtr / s, Xq / s
    for q in Qs:
        d = []
        for i, x in enumerate(Ts):
            dist = 0.0
            for a, b in zip(q, x):
                dist += (a - b) * (a - b)
            d.append((dist, i))
        out.append([i for _, i in sorted(d)[:k]])
    return np.array(out)


def test_hand_computed_vote():
    X = np.array([[0.0], [1.0], [2.0]])
    y = np.array([1, 1, 2])
    clf = KnnModelChoice(k=2, stats=[0]).fit(X, y)
    assert clf.scales_.tolist() == [1.0]
    vote = clf.vote([0.9])
    assert vote.frequencies.tolist() == [1.0, 0.0]
    assert vote.predicted == 1


def test_exact_match_k1():
    X = np.random.default_rng(0).normal(size=(30, 6))
    y = np.repeat([1, 2], 15)
    clf = KnnModelChoice(k=1).fit(X, y)
    assert np.array_equal(clf.predict(X), y)
    assert prior_error_rate(clf, X, y) == 0.0


def test_vote_tie_goes_to_smaller_model():
    X = np.array([[0.0], [1.0], [3.0], [4.0]])
    y = np.array([2, 1, 1, 2])
    clf = KnnModelChoice(k=2, stats=[0]).fit(X, y)
    assert clf.predict([[0.5]])[0] == 1
    assert clf.vote([0.5]).frequencies.tolist() == [0.5, 0.5]


def test_distance_ties_broken_by_index():
    X = np.array([[1.0], [-1.0], [1.0], [5.0]])
    y = np.array([2, 1, 1, 2])
    clf = KnnModelChoice(k=1, stats=[0]).fit(X, y)
    assert clf.kneighbors([[0.0]], 3).tolist() == [[0, 1, 2]]
    assert clf.predict([[0.0]])[0] == 2


def test_matches_brute_force_with_ties():
    rng = np.random.default_rng(1)
    X = rng.integers(0, 4, size=(200, 3)).astype(float)
    y = rng.integers(1, 3, size=200)
    Q = rng.integers(0, 4, size=(40, 3)).astype(float)
    clf = KnnModelChoice(k=17, stats=[0, 1, 2], chunk_size=7).fit(X, y)
    assert np.array_equal(clf.kneighbors(Q), brute_neighbors(X, Q, clf.scales_, 17))
    assert np.array_equal(clf.kneighbors(Q, 200), brute_neighbors(X, Q, clf.scales_, 200))


def test_subset_and_projected_queries():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 6))
    y = rng.integers(1, 3, size=50)
    clf = KnnModelChoice(k=5, stats="2d").fit(X, y)
    assert np.array_equal(clf.predict(X[:10]), clf.predict(X[:10, :2]))
    with pytest.raises(ValueError):
        clf.predict(X[:3, :3])


def test_invalid_k():
    X = np.zeros((3, 6)) + np.arange(3)[:, None]
    with pytest.raises(ValueError):
        KnnModelChoice(k=4).fit(X, [1, 2, 1])
    clf = KnnModelChoice(k=2).fit(X, [1, 2, 1])
    with pytest.raises(ValueError):
        clf.kneighbors(X, 4)


def test_sklearn_params():
    clf = KnnModelChoice(k=7, stats="4d")
    assert clf.get_params() == {"k": 7, "stats": "4d", "chunk_size": 256}
    assert clf.set_params(k=3).k == 3


@settings(max_examples=40, deadline=None)
@given(
    arrays(np.int64, (40, 3), elements=st.integers(0, 6)),
    st.integers(-3, 3),
    st.integers(0, 2),
    st.integers(1, 10),
)
def test_scale_invariance(Xint, log2c, col, k):
    X = Xint.astype(float)
    y = np.arange(40) % 2 + 1
    Q = X[::3] + 0.5
    base = KnnModelChoice(k=k, stats=[0, 1, 2]).fit(X, y)
    Xc, Qc = X.copy(), Q.copy()
    c = 2.0**log2c
    Xc[:, col] *= c
    Qc[:, col] *= c
    scaled = KnnModelChoice(k=k, stats=[0, 1, 2]).fit(Xc, y)
    assert np.array_equal(base.predict_proba(Q), scaled.predict_proba(Qc))


def test_neighbor_sets_nested():
    rng = np.random.default_rng(3)
    X = rng.integers(0, 5, size=(100, 2)).astype(float)
    clf = KnnModelChoice(k=1, stats=[0, 1]).fit(X, rng.integers(1, 3, size=100))
    Q = rng.integers(0, 5, size=(20, 2)).astype(float)
    full = clf.kneighbors(Q, 60)
    for k in (1, 5, 30):
        assert np.array_equal(clf.kneighbors(Q, k), full[:, :k])


def test_random_labels_error_half():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(4000, 2))
    Xv = rng.normal(size=(10_000, 2))
    clf = KnnModelChoice(k=25, stats=[0, 1]).fit(X, rng.integers(1, 3, size=4000))
    assert abs(prior_error_rate(clf, Xv, rng.integers(1, 3, size=10_000)) - 0.5) < 0.02


def test_error_curve_matches_direct():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(300, 2))
    y = (X[:, 0] + 0.7 * rng.normal(size=300) > 0).astype(int) + 1
    Xv = rng.normal(size=(100, 2))
    yv = (Xv[:, 0] > 0).astype(int) + 1
    clf = KnnModelChoice(k=1, stats=[0, 1]).fit(X, y)
    grid = [1, 2, 5, 16, 40]
    curve = error_curve(clf, Xv, yv, grid)
    direct = [prior_error_rate(KnnModelChoice(k=k, stats=[0, 1]).fit(X, y), Xv, yv) for k in grid]
    assert np.allclose(curve, direct)


def test_calibrate_separated():
    X = np.vstack([np.zeros((50, 2)), np.full((50, 2), 10.0)]) + np.random.default_rng(0).normal(0, 0.1, (100, 2))
    y = np.repeat([1, 2], 50)
    cal = calibrate_k(X, y, X + 0.01, y, stats=[0, 1], k_grid=[3, 10, 40])
    assert cal.k == 3
    assert cal.errors == (0.0, 0.0, 0.0)
    again = calibrate_k(X, y, X + 0.01, y, stats=[0, 1], k_grid=[3, 10, 40])
    assert again == cal


def test_calibrate_default_grid_and_errors():
    X = np.random.default_rng(0).normal(size=(120, 6))
    y = np.random.default_rng(1).integers(1, 3, size=120)
    cal = calibrate_k(X, y, X[:20], y[:20])
    assert cal.grid == tuple(k for k in DEFAULT_K_GRID if k <= 120)
    with pytest.raises(ValueError):
        calibrate_k(X, y, X, y, k_grid=[5, 500])
    with pytest.raises(ValueError):
        prior_error_rate(KnnModelChoice(k=1).fit(X, y), X[:0], y[:0])


def test_scales_used_from_training():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(80, 6)) * [1, 10, 100, 1, 1, 1]
    clf = KnnModelChoice(k=3).fit(X, rng.integers(1, 3, size=80))
    assert np.allclose(clf.scales_, scales(X))
