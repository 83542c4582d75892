"""Local misclassification rates of a model-choice classifier.

The error indicators ``1{predicted != true model}`` of a fitted classifier on
a table independent of its training data are regressed on a projection of the
summaries with a Nadaraya-Watson estimator (Gaussian product kernel). The
bandwidth is one multiplier times a per-axis baseline, chosen by
leave-one-out squared error.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from gibbsel.exceptions import DegenerateScaleError

DEFAULT_MULTIPLIERS = np.logspace(-1, 1, 15)
LOW_SUPPORT = 1e-6


def baseline_bandwidth(X) -> np.ndarray:
    """Per-axis ``std * n**(-1 / (4 + d))``."""
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    std = X.std(axis=0, ddof=1)
    if not np.all(std > 0):
        raise DegenerateScaleError(f"constant projection axes {np.nonzero(~(std > 0))[0].tolist()}")
    return std * n ** (-1.0 / (4 + d))


def _half_sq_dist(A, B, h):
    q = np.zeros((A.shape[0], B.shape[0]))
    for a in range(A.shape[1]):
        u = (A[:, a, None] - B[None, :, a]) / h[a]
        q += u * u
    return 0.5 * q


def _nw_rows(q, y, lo, hi):
    """NW estimates from half squared distances; nearest-point fallback on underflow."""
    w = np.exp(-q)
    den = w.sum(axis=1)
    num = w @ y
    out = np.empty(q.shape[0])
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    if not ok.all():
        out[~ok] = y[np.argmin(q[~ok], axis=1)]
    return np.clip(out, lo, hi), den


def loo_scores(X, y, multipliers=None, base=None, chunk_size=512) -> np.ndarray:
    """Leave-one-out mean squared error for each bandwidth multiplier."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    multipliers = DEFAULT_MULTIPLIERS if multipliers is None else np.asarray(multipliers, dtype=float)
    base = baseline_bandwidth(X) if base is None else base
    lo, hi = y.min(), y.max()
    sse = np.zeros(len(multipliers))
    n = X.shape[0]
    for start in range(0, n, chunk_size):
        stop = min(start + chunk_size, n)
        q0 = _half_sq_dist(X[start:stop], X, base)
        q0[np.arange(stop - start), np.arange(start, stop)] = np.inf
        for j, m in enumerate(multipliers):
            pred, _ = _nw_rows(q0 / (m * m), y, lo, hi)
            sse[j] += np.sum((pred - y[start:stop]) ** 2)
    return sse / n


def calibrate_bandwidth(X, y, multipliers=None) -> np.ndarray:
    """Leave-one-out bandwidth; the smallest candidate wins ties."""
    X = check_array(X, dtype=float)
    if X.shape[0] < 10:
        raise ValueError("bandwidth calibration needs at least 10 points")
    multipliers = np.sort(DEFAULT_MULTIPLIERS if multipliers is None else np.asarray(multipliers, dtype=float))
    base = baseline_bandwidth(X)
    scores = loo_scores(X, y, multipliers, base)
    return base * multipliers[int(np.argmin(scores))]


class NadarayaWatson(RegressorMixin, BaseEstimator):
    """Gaussian-kernel Nadaraya-Watson regression.

    With ``bandwidth=None`` the per-axis bandwidth is chosen on the training
    data by leave-one-out over ``multipliers`` times the baseline.
    """

    def __init__(self, bandwidth=None, multipliers=None, chunk_size=512):
        self.bandwidth = bandwidth
        self.multipliers = multipliers
        self.chunk_size = chunk_size

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        self.X_ = X
        self.y_ = y
        self.n_features_in_ = X.shape[1]
        if self.bandwidth is None:
            mult = np.sort(DEFAULT_MULTIPLIERS if self.multipliers is None else np.asarray(self.multipliers, float))
            if X.shape[0] < 10:
                raise ValueError("bandwidth calibration needs at least 10 points")
            base = baseline_bandwidth(X)
            self.loo_scores_ = loo_scores(X, y, mult, base, self.chunk_size)
            self.multiplier_ = float(mult[int(np.argmin(self.loo_scores_))])
            self.bandwidth_ = base * self.multiplier_
        else:
            h = np.broadcast_to(np.asarray(self.bandwidth, dtype=float), (X.shape[1],)).copy()
            if not np.all(h > 0):
                raise ValueError("bandwidth must be positive")
            self.bandwidth_ = h
        return self

    def _evaluate(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        lo, hi = self.y_.min(), self.y_.max()
        est = np.empty(X.shape[0])
        weight = np.empty(X.shape[0])
        for start in range(0, X.shape[0], self.chunk_size):
            q = _half_sq_dist(X[start : start + self.chunk_size], self.X_, self.bandwidth_)
            est[start : start + q.shape[0]], weight[start : start + q.shape[0]] = _nw_rows(q, self.y_, lo, hi)
        return est, weight

    def predict(self, X):
        return self._evaluate(X)[0]

    def kernel_weight(self, X):
        """Total kernel weight at each query (low values flag extrapolation)."""
        return self._evaluate(X)[1]


# -- error indicators and surfaces ------------------------------------------------


@dataclass(frozen=True, eq=False)
class ErrorIndicatorSet:
    points: np.ndarray
    delta: np.ndarray


def apply_projection(projection, X) -> np.ndarray:
    """Apply a projection given as column indices, a transformer or a callable."""
    X = np.asarray(X, dtype=float)
    if projection is None:
        return X
    if hasattr(projection, "transform"):
        out = projection.transform(X)
    elif callable(projection):
        out = projection(X)
    else:
        out = X[:, list(projection)]
    out = np.asarray(out, dtype=float)
    return out[:, None] if out.ndim == 1 else out


def error_indicators(clf, X, y, projection=None) -> ErrorIndicatorSet:
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("empty table")
    delta = (clf.predict(X) != y).astype(float)
    return ErrorIndicatorSet(apply_projection(projection, X), delta)


def nw_estimate(indicators: ErrorIndicatorSet, bandwidth, query) -> float:
    nw = NadarayaWatson(bandwidth=bandwidth).fit(indicators.points, indicators.delta)
    return float(nw.predict(np.atleast_2d(np.asarray(query, dtype=float)))[0])


def plug_in_local_error(vote) -> float:
    """One minus the vote share of the predicted model."""
    freq = np.asarray(vote.frequencies)
    return float(1.0 - freq[int(np.argmax(freq))])


@dataclass(frozen=True, eq=False)
class LocalErrorSurface:
    points: np.ndarray
    tau: np.ndarray
    grid: np.ndarray
    grid_tau: np.ndarray
    grid_support: np.ndarray
    bandwidth: np.ndarray
    provenance: dict

    def to_csv(self, path) -> None:
        lines = ["s2_1,s2_2,tau,support"]
        for g, t, s in zip(self.grid, self.grid_tau, self.grid_support):
            second = repr(float(g[1])) if g.shape[0] > 1 else "0.0"
            lines.append(f"{float(g[0])!r},{second},{float(t)!r},{int(s)}")
        Path(path).write_text("\n".join(lines) + "\n")


def error_surface(clf, X, y, projection=None, grid: int = 64, multipliers=None, provenance=None) -> LocalErrorSurface:
    """Local error of ``clf`` over a 1D or 2D projection of a validation/test table."""
    ind = error_indicators(clf, X, y, projection)
    d = ind.points.shape[1]
    if d > 2:
        raise ValueError(f"surface grids need a 1D or 2D projection, got {d} axes")
    nw = NadarayaWatson(multipliers=multipliers).fit(ind.points, ind.delta)
    tau = nw.predict(ind.points)
    axes = [np.linspace(ind.points[:, a].min(), ind.points[:, a].max(), grid) for a in range(d)]
    mesh = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    grid_tau, weight = nw._evaluate(mesh)
    support = weight >= LOW_SUPPORT * len(ind.delta)
    return LocalErrorSurface(ind.points, tau, mesh, grid_tau, support, nw.bandwidth_, dict(provenance or {}))
