"""k-nearest-neighbor ABC model choice.

The classifier keeps the training summaries divided by their per-coordinate
standard deviations; a query is compared with every record by Euclidean
distance on the selected coordinates, and the ``k`` closest records vote.
Distance ties are broken by record index and vote ties by the smaller model
index, so every decision is deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from gibbsel.reftable import scales
from gibbsel.summaries import subset_columns

DEFAULT_K_GRID = (1, 2, 3, 5, 7, 10, 16, 25, 40, 63, 100, 158, 251, 398, 631, 1000)


@dataclass(frozen=True, eq=False)
class ModelVote:
    classes: np.ndarray
    frequencies: np.ndarray
    predicted: int


class KnnModelChoice(ClassifierMixin, BaseEstimator):
    """ABC model choice as a kNN classifier on scaled summary statistics.

    Parameters
    ----------
    k : int
        Number of nearest reference records that vote.
    stats : str or sequence of int
        ``"2d"``, ``"4d"``, ``"6d"`` or explicit column indices of ``X``
        (e.g. to append ancillary columns).
    chunk_size : int
        Queries processed per distance block.
    """

    def __init__(self, k=10, stats="6d", chunk_size=256):
        self.k = k
        self.stats = stats
        self.chunk_size = chunk_size

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        cols = np.array(subset_columns(self.stats))
        if cols.max() >= X.shape[1]:
            raise ValueError(f"statistic columns {cols.tolist()} exceed the {X.shape[1]} available")
        if not 1 <= self.k <= X.shape[0]:
            raise ValueError(f"k={self.k} must lie in [1, {X.shape[0]}]")
        self.columns_ = cols
        self.n_features_in_ = X.shape[1]
        self.scales_ = scales(X[:, cols], on_constant="one")
        self.classes_, self.train_labels_ = np.unique(y, return_inverse=True)
        self.train_scaled_ = np.ascontiguousarray(X[:, cols] / self.scales_)
        return self

    def _scaled_queries(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=float)
        if X.shape[1] == self.n_features_in_:
            X = X[:, self.columns_]
        elif X.shape[1] != len(self.columns_):
            raise ValueError(
                f"queries have {X.shape[1]} columns; expected {self.n_features_in_} or {len(self.columns_)}"
            )
        return X / self.scales_

    def kneighbors(self, X, n_neighbors=None):
        """Indices of the nearest training records, ordered by (distance, index)."""
        kk = self.k if n_neighbors is None else int(n_neighbors)
        T = self.train_scaled_
        n = T.shape[0]
        if not 1 <= kk <= n:
            raise ValueError(f"cannot request {kk} neighbors from {n} records")
        Q = self._scaled_queries(X)
        out = np.empty((Q.shape[0], kk), dtype=np.int64)
        for start in range(0, Q.shape[0], self.chunk_size):
            q = Q[start : start + self.chunk_size]
            d = np.zeros((q.shape[0], n))
            for j in range(T.shape[1]):
                diff = q[:, j, None] - T[None, :, j]
                d += diff * diff
            if kk == n:
                out[start : start + q.shape[0]] = np.argsort(d, axis=1, kind="stable")
                continue
            part = np.argpartition(d, kk - 1, axis=1)[:, :kk]
            cutoff = np.take_along_axis(d, part, axis=1).max(axis=1)
            for i in range(q.shape[0]):
                # every record at or below the k-th distance, then a stable sort keeps index order on ties
                cand = np.flatnonzero(d[i] <= cutoff[i])
                order = np.argsort(d[i, cand], kind="stable")[:kk]
                out[start + i] = cand[order]
        return out

    def _counts(self, neighbors):
        labels = self.train_labels_[neighbors]
        return np.stack([(labels == c).sum(axis=1) for c in range(len(self.classes_))], axis=1)

    def predict_proba(self, X):
        return self._counts(self.kneighbors(X)) / self.k

    def predict(self, X):
        counts = self._counts(self.kneighbors(X))
        # argmax returns the first maximum, i.e. the smallest model index
        return self.classes_[np.argmax(counts, axis=1)]

    def vote(self, s_obs) -> ModelVote:
        freq = self.predict_proba(np.atleast_2d(s_obs))[0]
        return ModelVote(self.classes_.copy(), freq, int(self.classes_[np.argmax(freq)]))


def prior_error_rate(clf, X, y) -> float:
    """Fraction of records whose model index the classifier gets wrong."""
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("empty evaluation table")
    return float(np.mean(clf.predict(X) != y))


@dataclass(frozen=True)
class KCalibration:
    k: int
    grid: tuple[int, ...]
    errors: tuple[float, ...]

    def to_dict(self) -> dict:
        return {"k": self.k, "grid": list(self.grid), "errors": list(self.errors)}


def error_curve(clf: KnnModelChoice, X, y, k_grid) -> np.ndarray:
    """Validation error for every k of the grid from a single neighbor search."""
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("empty evaluation table")
    grid = np.asarray(sorted(set(int(k) for k in k_grid)))
    neighbors = clf.kneighbors(X, n_neighbors=int(grid.max()))
    labels = clf.train_labels_[neighbors]
    cum = np.stack([np.cumsum(labels == c, axis=1, dtype=np.int32) for c in range(len(clf.classes_))], axis=2)
    errors = []
    for k in grid:
        pred = clf.classes_[np.argmax(cum[:, k - 1, :], axis=1)]
        errors.append(float(np.mean(pred != y)))
    return np.array(errors)


def calibrate_k(X_train, y_train, X_valid, y_valid, stats="6d", k_grid=None) -> KCalibration:
    """Pick k minimizing the validation error (smallest k on ties)."""
    n_train = len(y_train)
    if k_grid is None:
        grid = [k for k in DEFAULT_K_GRID if k <= n_train] or [1]
    else:
        grid = sorted(set(int(k) for k in k_grid))
        if not grid:
            raise ValueError("empty k grid")
        if grid[0] < 1 or grid[-1] > n_train:
            raise ValueError(f"k grid must lie in [1, {n_train}]")
    clf = KnnModelChoice(k=grid[0], stats=stats).fit(X_train, y_train)
    errors = error_curve(clf, X_valid, y_valid, grid)
    best = int(np.argmin(errors))
    return KCalibration(grid[best], tuple(grid), tuple(float(e) for e in errors))
