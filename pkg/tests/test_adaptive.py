import numpy as np
import pytest

from gibbsel.adaptive import AdaptiveModelChoice, FisherLDA, contrast_trait, fit_lda
from gibbsel.exceptions import DegenerateTraitError
from gibbsel.knn import KnnModelChoice, prior_error_rate


class Fixed:
    """Classifier returning predetermined labels."""

    classes_ = np.array([1, 2])

    def __init__(self, labels):
        self.labels = np.asarray(labels)

    def predict(self, X):
        return self.labels[: len(X)]


class TauStub(AdaptiveModelChoice):
    """Adaptive classifier with hand-set local errors."""

    def __init__(self, classifiers, tau):
        super().__init__(classifiers)
        self.tau = tau

    def local_errors(self, X):
        return np.tile(self.tau, (len(X), 1))


def fisher_ratio(z, y):
    classes = np.unique(y)
    within = sum(((z[y == c] - z[y == c].mean()) ** 2).sum() for c in classes)
    between = sum((y == c).sum() * (z[y == c].mean() - z.mean()) ** 2 for c in classes)
    return between / within


def test_trait_definition():
    y = np.array([1, 2, 1, 2, 1])
    a = Fixed([1, 2, 2, 1, 1])
    b = Fixed([1, 1, 1, 2, 1])
    assert contrast_trait([a, b], np.zeros((5, 1)), y).tolist() == [0, 1, 2, 2, 0]
    assert contrast_trait([a, a], np.zeros((5, 1)), y).tolist() == [0] * 5
    c = Fixed([3, 3, 3, 3, 3])
    # a and b both wrong on record 3 would be impossible with M = 2; with three labels it gets 0
    y3 = np.array([2, 2, 2, 2, 2])
    assert contrast_trait([Fixed([1, 1, 2, 1, 3]), c], np.zeros((5, 1)), y3).tolist() == [0, 0, 1, 0, 0]
    with pytest.raises(ValueError):
        contrast_trait([a, b], np.zeros((0, 1)), [])


def test_trait_binary_disagreement_labels():
    rng = np.random.default_rng(0)
    y = rng.integers(1, 3, size=200)
    a, b = Fixed(rng.integers(1, 3, size=200)), Fixed(rng.integers(1, 3, size=200))
    t = contrast_trait([a, b], np.zeros((200, 1)), y)
    disagree = a.labels != b.labels
    assert set(t[disagree].tolist()) <= {1, 2} and np.all(t[~disagree] == 0)


def test_lda_axes_and_direction():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(600, 6))
    y = np.repeat([0, 1], 300)
    X[y == 1, 0] += 3.0
    lda = fit_lda(X, y)
    assert lda.components_.shape == (6, 1)
    w = lda.components_[:, 0] / lda.scale_  # direction in raw coordinates
    assert abs(w[0]) / np.linalg.norm(w) > 0.99
    z = lda.transform(X)[:, 0]
    assert fisher_ratio(z, y) >= max(fisher_ratio(X[:, j], y) for j in range(6)) - 1e-12
    y3 = np.repeat([0, 1, 2], 200)
    assert fit_lda(X, y3).components_.shape == (6, 2)


def test_lda_fisher_optimal_against_random_directions():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(900, 4)) @ rng.normal(size=(4, 4))
    y = np.repeat([0, 1, 2], 300)
    X[y == 1] += [1, 0.5, 0, 0]
    X[y == 2] += [0, -0.5, 1, 0]
    lda = FisherLDA().fit(X, y)
    best = fisher_ratio(lda.transform(X)[:, 0], y)
    for _ in range(200):
        assert fisher_ratio(X @ rng.normal(size=4), y) <= best + 1e-9


def test_lda_single_class_and_constant_axis():
    with pytest.raises(DegenerateTraitError):
        fit_lda(np.random.default_rng(0).normal(size=(10, 3)), np.zeros(10))
    X = np.random.default_rng(0).normal(size=(40, 3))
    X[:, 1] = 5.0
    lda = fit_lda(X, np.arange(40) % 2)
    assert np.all(np.isfinite(lda.transform(X)))


def knn_tables(seed, n_train=3000, n_valid=3000, n_test=3000):
    rng = np.random.default_rng(seed)

    def draw(n):
        m = rng.integers(1, 3, size=n)
        X = rng.normal(size=(n, 6))
        X[:, 0] += 1.5 * (m - 1.5)
        X[:, 1] += 1.5 * (m - 1.5)
        return X, m

    return draw(n_train), draw(n_valid), draw(n_test), rng


def test_identical_classifiers_reduce_to_first():
    (Xt, yt), (Xv, yv), (Xs, _), _ = knn_tables(3, 800, 400, 300)
    clf = KnnModelChoice(k=15, stats="2d").fit(Xt, yt)
    ada = AdaptiveModelChoice([clf, clf]).fit(Xv, yv)
    pred, lam = ada.predict_with_choice(Xs)
    assert np.all(lam == 1) and np.array_equal(pred, clf.predict(Xs))


def test_single_classifier_delegates():
    (Xt, yt), (Xv, yv), (Xs, _), _ = knn_tables(4, 500, 200, 100)
    clf = KnnModelChoice(k=9, stats="4d").fit(Xt, yt)
    ada = AdaptiveModelChoice([clf]).fit(Xv, yv)
    assert np.array_equal(ada.predict(Xs), clf.predict(Xs))


def test_degraded_classifier_rarely_chosen():
    (Xt, yt), (Xv, yv), (Xs, ys), rng = knn_tables(5)
    good = KnnModelChoice(k=25, stats="2d").fit(Xt, yt)
    coin = KnnModelChoice(k=25, stats="4d").fit(Xt, rng.integers(1, 3, size=len(yt)))
    ada = AdaptiveModelChoice([good, coin]).fit(Xv, yv)
    _, lam = ada.predict_with_choice(Xs)
    assert np.mean(lam == 1) >= 0.95
    assert ada.choice_shares(Xs)[0] == np.mean(lam == 1)
    assert prior_error_rate(ada, Xs, ys) <= prior_error_rate(good, Xs, ys) + 0.01
    assert ada.project(Xs).shape == (len(Xs), 2)


def test_argmin_and_ties():
    a, b, c = Fixed([1, 1]), Fixed([2, 2]), Fixed([1, 2])
    X = np.zeros((2, 6))
    pred, lam = TauStub([a, b, c], [0.3, 0.1, 0.2]).predict_with_choice(X)
    assert lam.tolist() == [2, 2] and pred.tolist() == [2, 2]
    _, lam = TauStub([a, b, c], [0.2, 0.2, 0.2]).predict_with_choice(X)
    assert lam.tolist() == [1, 1]
    # a strictly increasing transform of all surfaces keeps the decision
    _, lam = TauStub([a, b, c], np.exp(3 * np.array([0.3, 0.1, 0.2]))).predict_with_choice(X)
    assert lam.tolist() == [2, 2]
