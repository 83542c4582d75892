"""Geometric summary statistics of discrete fields.

For each of the G4 and G8 induced graphs on a field the summary records the
number of monochrome edges (R), of connected components (T) and the size of
the largest component (U), in the fixed order
``(r4, r8, t4, t8, u4, u8)``. Continuous fields are first quantized by a
one-dimensional k-means that ignores the spatial layout.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from gibbsel import _kernels
from gibbsel.exceptions import DegenerateInputError
from gibbsel.lattice import build_graph

SUMMARY_NAMES = ("r4", "r8", "t4", "t8", "u4", "u8")
SUBSETS = {"2d": 2, "4d": 4, "6d": 6}


def geometric_summaries(field) -> np.ndarray:
    """6D summary vector of an integer-colored field."""
    field = np.asarray(field)
    if field.ndim != 2 or not np.issubdtype(field.dtype, np.integer):
        raise ValueError("expected a 2D integer-colored field")
    colors = np.ascontiguousarray(field.ravel(), dtype=np.int64)
    out = np.empty(6, dtype=np.int64)
    for j, kind in enumerate(("G4", "G8")):
        g = build_graph(field.shape, kind)
        r, t, u = _kernels.component_stats(colors, np.ascontiguousarray(g.edges[:, 0]), np.ascontiguousarray(g.edges[:, 1]))
        out[j], out[2 + j], out[4 + j] = r, t, u
    return out


def subset_columns(subset) -> list[int]:
    """Column indices for ``"2d"``/``"4d"``/``"6d"`` or an explicit index list."""
    if isinstance(subset, str):
        key = subset.lower()
        if key not in SUBSETS:
            raise ValueError(f"unknown statistic subset {subset!r}; expected one of {sorted(SUBSETS)}")
        return list(range(SUBSETS[key]))
    cols = [int(c) for c in subset]
    if not cols or len(set(cols)) != len(cols) or min(cols) < 0:
        raise ValueError(f"invalid column subset {subset!r}")
    return cols


def project(v, subset) -> np.ndarray:
    """Nested projection onto the first 2, 4 or 6 coordinates."""
    v = np.asarray(v)
    return v[..., subset_columns(subset)]


# -- quantization ----------------------------------------------------------------------


def _kmeans_pp(values, k, rng):
    centers = np.empty(k)
    centers[0] = values[rng.integers(values.size)]
    d2 = (values - centers[0]) ** 2
    for j in range(1, k):
        total = d2.sum()
        if total == 0:
            centers[j] = values[rng.integers(values.size)]
        else:
            cdf = np.cumsum(d2)
            centers[j] = values[min(np.searchsorted(cdf, rng.random() * total, side="right"), values.size - 1)]
        d2 = np.minimum(d2, (values - centers[j]) ** 2)
    return centers


def _assign(values, centers):
    # 1D: nearest center by thresholding at midpoints of the sorted centers
    order = np.argsort(centers, kind="stable")
    mids = (centers[order][1:] + centers[order][:-1]) / 2
    return order[np.searchsorted(mids, values, side="left")]


def _lloyd(values, centers, max_iter):
    k = centers.size
    for _ in range(max_iter):
        labels = _assign(values, centers)
        counts = np.bincount(labels, minlength=k)
        sums = np.bincount(labels, weights=values, minlength=k)
        new = centers.copy()
        filled = counts > 0
        new[filled] = sums[filled] / counts[filled]
        for j in np.nonzero(~filled)[0]:
            # reseed an empty cluster at the point farthest from its center
            dist = np.abs(values - new[labels])
            far = int(np.argmax(dist))
            new[j] = values[far]
            labels[far] = j
        if np.array_equal(new, centers):
            break
        centers = new
    labels = _assign(values, centers)
    inertia = float(((values - centers[labels]) ** 2).sum())
    return centers, labels, inertia


def kmeans_1d(values, k: int, rng: np.random.Generator, n_init: int = 10, max_iter: int = 100):
    """One-dimensional k-means (k-means++ seeding, best of ``n_init`` restarts).

    Returns ``(labels, centers)`` with labels ordered by ascending center.
    """
    values = np.asarray(values, dtype=float).ravel()
    if k < 1:
        raise ValueError("k must be positive")
    if np.unique(values).size < k:
        raise DegenerateInputError(f"fewer than {k} distinct values to cluster")
    best = None
    for _ in range(n_init):
        centers, labels, inertia = _lloyd(values, _kmeans_pp(values, k, rng), max_iter)
        if best is None or inertia < best[2]:
            best = (centers, labels, inertia)
    centers, labels, _ = best
    order = np.argsort(centers, kind="stable")
    rank = np.empty(k, dtype=np.int64)
    rank[order] = np.arange(k)
    return rank[labels], centers[order]


def kmeans_quantize(y, k: int, rng: np.random.Generator, n_init: int = 10, max_iter: int = 100) -> np.ndarray:
    """Quantize a continuous field into ``k`` colors, ranked by cluster center."""
    y = np.asarray(y)
    labels, _ = kmeans_1d(y, k, rng, n_init=n_init, max_iter=max_iter)
    return labels.reshape(y.shape)


class GeometricSummaries(TransformerMixin, BaseEstimator):
    """Map a stack of fields ``(n, height, width)`` to ``(n, 6)`` summaries.

    Continuous stacks are quantized first with ``n_colors`` k-means groups.
    """

    def __init__(self, n_colors=2, random_state=None):
        self.n_colors = n_colors
        self.random_state = random_state

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        X = np.asarray(X)
        if X.ndim == 2:
            X = X[None]
        rng = np.random.default_rng(self.random_state)
        out = np.empty((X.shape[0], 6), dtype=np.int64)
        for i, field in enumerate(X):
            if not np.issubdtype(field.dtype, np.integer):
                field = kmeans_quantize(field, self.n_colors, rng)
            out[i] = geometric_summaries(field)
        return out
