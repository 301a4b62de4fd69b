"""Weighted binary regression tree, grown greedily on weighted squared error."""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .errors import DataError
from .validation import as_float_matrix, as_float_vector

_MIN_GAIN = 1e-12


@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    value: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None

    @property
    def is_leaf(self):
        return self.left is None


def _weighted_sse(y, w):
    sw = w.sum()
    if sw <= 0:
        return float(np.sum((y - y.mean()) ** 2)) if y.size else 0.0
    mean = float(np.dot(w, y) / sw)
    return float(np.dot(w, (y - mean) ** 2))


def _leaf_value(y, w):
    sw = w.sum()
    if sw <= 0:
        return float(y.mean()) if y.size else 0.0
    return float(np.dot(w, y) / sw)


def _best_split(X, y, w):
    """Best (feature, threshold, gain) by weighted SSE reduction, or None.

    Deterministic: ties keep the lowest feature index and the first threshold
    encountered in sorted order.
    """
    n, p = X.shape
    parent = _weighted_sse(y, w)
    best = None
    for feat in range(p):
        order = np.argsort(X[:, feat], kind="mergesort")
        xs = X[order, feat]
        ys = y[order]
        ws = w[order]
        cw = np.cumsum(ws)
        cwy = np.cumsum(ws * ys)
        cwyy = np.cumsum(ws * ys * ys)
        total_w, total_wy, total_wyy = cw[-1], cwy[-1], cwyy[-1]
        # candidate cut after position k (between xs[k] and xs[k+1])
        cuts = np.flatnonzero(xs[:-1] < xs[1:])
        if cuts.size == 0:
            continue
        lw = cw[cuts]
        rw = total_w - lw
        valid = (lw > 0) & (rw > 0)
        if not valid.any():
            continue
        cuts = cuts[valid]
        lw = lw[valid]
        rw = rw[valid]
        lwy = cwy[cuts]
        lwyy = cwyy[cuts]
        sse_left = lwyy - lwy ** 2 / lw
        sse_right = (total_wyy - lwyy) - (total_wy - lwy) ** 2 / rw
        gain = parent - (sse_left + sse_right)
        k = int(np.argmax(gain))
        if gain[k] > _MIN_GAIN and (best is None or gain[k] > best[2]):
            threshold = 0.5 * (xs[cuts[k]] + xs[cuts[k] + 1])
            best = (feat, float(threshold), float(gain[k]))
    return best


class WeightedTreeRegressor(BaseEstimator, RegressorMixin):
    """CART-style regression tree with per-sample weights.

    Splits minimize the weighted sum of squared errors; leaves predict the
    weighted mean. ``min_samples_split`` is the smallest node size eligible
    for splitting and ``max_depth=0`` yields a single leaf.

    Attributes
    ----------
    feature_importances_ : array
        Per-feature weighted impurity decrease, normalized to sum to 1 when
        any split was made.
    depth_ : int
        Realized depth of the fitted tree.
    """

    def __init__(self, max_depth=3, min_samples_split=2):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split

    def fit(self, X, y, sample_weight=None):
        X = as_float_matrix(X, "X")
        y = as_float_vector(y, "y")
        if y.shape[0] != X.shape[0]:
            raise DataError("X and y disagree on the number of samples")
        if sample_weight is None:
            w = np.ones(X.shape[0])
        else:
            w = as_float_vector(sample_weight, "sample_weight")
            if w.shape[0] != X.shape[0]:
                raise DataError("sample_weight length mismatch")
            if np.any(w < 0):
                raise DataError("sample weights must be nonnegative")
        if int(self.max_depth) < 0:
            raise DataError("max_depth must be >= 0")
        if int(self.min_samples_split) < 2:
            raise DataError("min_samples_split must be >= 2")

        self._importance = np.zeros(X.shape[1])
        self.depth_ = 0
        self.root_ = self._grow(X, y, w, depth=0)
        total = self._importance.sum()
        self.feature_importances_ = (
            self._importance / total if total > 0 else self._importance.copy()
        )
        return self

    def _grow(self, X, y, w, depth):
        node = _Node(value=_leaf_value(y, w))
        self.depth_ = max(self.depth_, depth)
        if (
            depth >= int(self.max_depth)
            or X.shape[0] < int(self.min_samples_split)
            or np.all(y == y[0])
        ):
            return node
        split = _best_split(X, y, w)
        if split is None:
            return node
        feat, threshold, gain = split
        mask = X[:, feat] <= threshold
        node.feature = feat
        node.threshold = threshold
        self._importance[feat] += gain
        node.left = self._grow(X[mask], y[mask], w[mask], depth + 1)
        node.right = self._grow(X[~mask], y[~mask], w[~mask], depth + 1)
        return node

    def predict(self, X):
        X = as_float_matrix(X, "X")
        out = np.empty(X.shape[0])
        for s in range(X.shape[0]):
            node = self.root_
            while not node.is_leaf:
                node = node.left if X[s, node.feature] <= node.threshold else node.right
            out[s] = node.value
        return out
