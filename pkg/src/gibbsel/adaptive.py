"""Adaptive model choice across several fitted classifiers.

For each query the classifier with the smallest estimated local error wins.
Local errors are Nadaraya-Watson regressions of each classifier's error
indicators on a shared low-dimensional projection ``S0``. ``S0`` comes from a
Fisher discriminant analysis of an error-contrast trait that records which
classifier, if any, was uniquely right.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from gibbsel.exceptions import DegenerateTraitError
from gibbsel.local_error import NadarayaWatson
from gibbsel.summaries import subset_columns


def contrast_trait(classifiers, X, y) -> np.ndarray:
    """Label ``lam`` (1-based) where only classifier ``lam`` is correct, else 0."""
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("empty table")
    if len(classifiers) < 2:
        raise ValueError("the contrast trait needs at least two classifiers")
    preds = np.stack([np.asarray(c.predict(X)) for c in classifiers])
    correct = preds == y[None, :]
    unique = correct.sum(axis=0) == 1
    agree = np.all(preds == preds[0], axis=0)
    trait = np.where(unique & ~agree, np.argmax(correct, axis=0) + 1, 0)
    return trait.astype(np.int64)


class FisherLDA(TransformerMixin, BaseEstimator):
    """Fisher discriminant axes on standardized inputs.

    The within-class scatter gets a ridge of ``ridge * trace / dim`` before
    solving the generalized eigenproblem; at most ``C - 1`` axes are kept.
    Each axis is signed so that its largest-magnitude loading is positive.
    """

    def __init__(self, ridge=1e-6, n_components=None):
        self.ridge = ridge
        self.n_components = n_components

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise DegenerateTraitError(f"only one trait class observed ({self.classes_.tolist()})")
        d = X.shape[1]
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0, ddof=1)
        self.scale_ = np.where(std > 0, std, 1.0)
        Z = (X - self.mean_) / self.scale_
        sw = np.zeros((d, d))
        sb = np.zeros((d, d))
        for c in self.classes_:
            Zc = Z[y == c]
            mc = Zc.mean(axis=0)
            D = Zc - mc
            sw += D.T @ D
            sb += len(Zc) * np.outer(mc, mc)  # Z is centered, so the grand mean is 0
        sw += self.ridge * max(np.trace(sw), 1.0) / d * np.eye(d)
        evals, evecs = scipy.linalg.eigh(sb, sw)
        n_axes = min(len(self.classes_) - 1, d)
        if self.n_components is not None:
            n_axes = min(n_axes, int(self.n_components))
        order = np.argsort(evals)[::-1][:n_axes]
        W = evecs[:, order]
        lead = np.argmax(np.abs(W), axis=0)
        W *= np.sign(W[lead, np.arange(n_axes)])
        self.components_ = W
        self.eigenvalues_ = evals[order]
        self.n_features_in_ = d
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=float)
        return ((X - self.mean_) / self.scale_) @ self.components_


def fit_lda(X, trait, ridge=1e-6) -> FisherLDA:
    return FisherLDA(ridge=ridge).fit(X, trait)


class AdaptiveModelChoice(ClassifierMixin, BaseEstimator):
    """Pick, per query, the constituent classifier with the lowest local error.

    Parameters
    ----------
    classifiers : list
        Prefitted classifiers, indexed ``lam = 1 .. len(classifiers)`` in the
        given order (lower-dimensional ones first, since ties go to the
        smallest ``lam``).
    lda_stats : str or sequence of int
        Columns of ``X`` the discriminant analysis sees.
    multipliers : array-like, optional
        Bandwidth multipliers for the local-error regressions.

    ``fit`` must receive a table disjoint from the classifiers' training data.
    """

    def __init__(self, classifiers, lda_stats="6d", multipliers=None, ridge=1e-6):
        self.classifiers = classifiers
        self.lda_stats = lda_stats
        self.multipliers = multipliers
        self.ridge = ridge

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        if len(self.classifiers) == 0:
            raise ValueError("no classifiers")
        self.classes_ = np.unique(np.concatenate([np.asarray(c.classes_) for c in self.classifiers]))
        self.n_features_in_ = X.shape[1]
        self.lda_columns_ = np.array(subset_columns(self.lda_stats))
        self.lda_ = None
        self.surfaces_ = []
        if len(self.classifiers) == 1:
            self.trait_ = np.zeros(len(y), dtype=np.int64)
            return self
        self.trait_ = contrast_trait(self.classifiers, X, y)
        if np.all(self.trait_ == 0):
            # every classifier makes the same predictions here, so all local
            # errors coincide and the tie-break always routes to lam = 1
            return self
        self.lda_ = FisherLDA(ridge=self.ridge).fit(X[:, self.lda_columns_], self.trait_)
        S0 = self.lda_.transform(X[:, self.lda_columns_])
        for clf in self.classifiers:
            delta = (np.asarray(clf.predict(X)) != y).astype(float)
            self.surfaces_.append(NadarayaWatson(multipliers=self.multipliers).fit(S0, delta))
        return self

    def project(self, X):
        """The common projection ``S0`` of full summary rows."""
        check_is_fitted(self, "trait_")
        if self.lda_ is None:
            raise DegenerateTraitError("no projection: the contrast trait had a single class")
        X = check_array(X, dtype=float)
        return self.lda_.transform(X[:, self.lda_columns_])

    def local_errors(self, X):
        """Estimated local error of every constituent, shape ``(n, lam)``."""
        check_is_fitted(self, "trait_")
        X = check_array(X, dtype=float)
        if not self.surfaces_:
            return np.zeros((X.shape[0], len(self.classifiers)))
        S0 = self.project(X)
        return np.column_stack([nw.predict(S0) for nw in self.surfaces_])

    def predict_with_choice(self, X):
        """Predicted model and the 1-based index of the classifier used."""
        X = check_array(X, dtype=float)
        tau = self.local_errors(X)
        lam = np.argmin(tau, axis=1)  # first minimum, i.e. the smallest lam
        preds = None
        for j in np.unique(lam):
            rows = lam == j
            part = np.asarray(self.classifiers[j].predict(X[rows]))
            if preds is None:
                preds = np.empty(X.shape[0], dtype=part.dtype)
            preds[rows] = part
        return preds, lam + 1

    def predict(self, X):
        return self.predict_with_choice(X)[0]

    def choice_shares(self, X) -> np.ndarray:
        """Fraction of queries routed to each classifier."""
        _, lam = self.predict_with_choice(X)
        return np.bincount(lam - 1, minlength=len(self.classifiers)) / len(lam)
