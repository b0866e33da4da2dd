"""Least-squares linear regression, a CART regression tree, and RMSE."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyInput, LengthMismatch, NonFinite, ShapeMismatch, UsageError


def _as_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ShapeMismatch(f"X {X.shape} and y {y.shape} are not aligned")
    if X.shape[0] < 1:
        raise EmptyInput("cannot fit on zero rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFinite("regression input contains non-finite values")
    return X, y


def rmse(predicted, actual) -> float:
    predicted = np.asarray(predicted, dtype=np.float64).ravel()
    actual = np.asarray(actual, dtype=np.float64).ravel()
    if predicted.size != actual.size:
        raise LengthMismatch(f"lengths {predicted.size} and {actual.size} differ")
    if predicted.size == 0:
        raise EmptyInput("rmse of empty vectors")
    return float(np.sqrt(np.mean((predicted - actual) ** 2)))


# ---------------------------------------------------------------------------
# linear regression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearModel:
    intercept: float
    coefficients: np.ndarray

    def to_dict(self) -> dict:
        return {"intercept": self.intercept, "coefficients": self.coefficients.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(float(d["intercept"]), np.asarray(d["coefficients"], dtype=np.float64))


def fit_linear(X, y) -> LinearModel:
    """Ordinary least squares with an intercept.

    The intercept is absorbed by centring, and the centred system is solved by
    SVD-based ``lstsq`` so that collinear columns get the minimum-norm
    coefficient vector.
    """
    X, y = _as_xy(X, y)
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    coef, *_ = np.linalg.lstsq(X - x_mean, y - y_mean, rcond=None)
    return LinearModel(float(y_mean - x_mean @ coef), coef)


def predict_linear(model: LinearModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.coefficients.size:
        raise ShapeMismatch(f"expected {model.coefficients.size} columns, got shape {X.shape}")
    return X @ model.coefficients + model.intercept


# ---------------------------------------------------------------------------
# regression tree
# ---------------------------------------------------------------------------

@dataclass
class TreeConfig:
    max_depth: int | None = None
    min_samples_leaf: int = 5
    min_samples_split: int = 10

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise UsageError("max_depth must be >= 0 or None")
        if self.min_samples_leaf < 1:
            raise UsageError("min_samples_leaf must be >= 1")
        if self.min_samples_split < 2:
            raise UsageError("min_samples_split must be >= 2")


@dataclass
class TreeModel:
    """Flat node arrays; ``feature[i] == -1`` marks a leaf."""

    n_features: int
    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    value: list = field(default_factory=list)
    count: list = field(default_factory=list)

    def _add(self, value, count) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        self.count.append(int(count))
        return len(self.feature) - 1

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def leaves(self):
        return [i for i, f in enumerate(self.feature) if f < 0]

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            i, d = stack.pop()
            best = max(best, d)
            if self.feature[i] >= 0:
                stack += [(self.left[i], d + 1), (self.right[i], d + 1)]
        return best

    def to_dict(self) -> dict:
        """Pre-order nested nodes with explicit ``leaf`` markers."""

        def node(i):
            if self.feature[i] < 0:
                return {"leaf": True, "value": self.value[i], "count": self.count[i]}
            return {
                "leaf": False,
                "feature": self.feature[i],
                "threshold": self.threshold[i],
                "left": node(self.left[i]),
                "right": node(self.right[i]),
            }

        return {"n_features": self.n_features, "root": node(0)}

    @classmethod
    def from_dict(cls, d: dict) -> "TreeModel":
        tree = cls(int(d["n_features"]))

        def build(nd):
            if nd["leaf"]:
                return tree._add(nd["value"], nd["count"])
            i = tree._add(0.0, 0)
            tree.feature[i] = int(nd["feature"])
            tree.threshold[i] = float(nd["threshold"])
            tree.left[i] = build(nd["left"])
            tree.right[i] = build(nd["right"])
            tree.count[i] = tree.count[tree.left[i]] + tree.count[tree.right[i]]
            return i

        build(d["root"])
        return tree

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")


def _best_split(X, y, min_leaf):
    """Best (gain, feature, threshold) over all features, or None.

    Gains are computed for every boundary between distinct sorted values via
    prefix sums.  ``argmax`` over the feature-major flattening returns the first
    maximum, i.e. the lowest feature index and then the lowest threshold.
    """
    n, p = X.shape
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    ys = y[order]
    csum = np.cumsum(ys, axis=0)[:-1]
    csq = np.cumsum(ys**2, axis=0)[:-1]
    total, total_sq = y.sum(), (y**2).sum()
    n_left = np.arange(1, n)[:, None].astype(np.float64)
    n_right = n - n_left
    sse_left = csq - csum**2 / n_left
    sse_right = (total_sq - csq) - (total - csum) ** 2 / n_right
    parent = total_sq - total**2 / n
    gain = parent - sse_left - sse_right

    valid = xs[1:] > xs[:-1]
    valid &= (n_left >= min_leaf) & (n_right >= min_leaf)
    gain = np.where(valid, gain, -np.inf)
    flat = gain.T.ravel()
    best = int(np.argmax(flat))
    if not np.isfinite(flat[best]):
        return None
    j, pos = divmod(best, n - 1)
    thr = 0.5 * (xs[pos, j] + xs[pos + 1, j])
    if not thr < xs[pos + 1, j]:  # midpoint rounded up onto the right value
        thr = xs[pos, j]
    return float(flat[best]), j, float(thr)


def _sse(y) -> float:
    return float(np.sum((y - y.mean()) ** 2))


def fit_tree(X, y, cfg: TreeConfig | None = None) -> TreeModel:
    """Greedy top-down CART on squared error.

    A node becomes a leaf when the depth limit is reached, it has fewer than
    ``min_samples_split`` rows, no split leaves ``min_samples_leaf`` rows on
    both sides, or the best split does not lower the sum of squared deviations.
    """
    cfg = cfg or TreeConfig()
    X, y = _as_xy(X, y)
    tree = TreeModel(X.shape[1])
    root = tree._add(y.mean(), len(y))
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, rows, depth = stack.pop()
        yn = y[rows]
        if (cfg.max_depth is not None and depth >= cfg.max_depth) or len(rows) < cfg.min_samples_split:
            continue
        parent_sse = _sse(yn)
        if parent_sse <= 0:
            continue
        found = _best_split(X[rows], yn, cfg.min_samples_leaf)
        if found is None:
            continue
        _, j, thr = found
        go_left = X[rows, j] <= thr
        lrows, rrows = rows[go_left], rows[~go_left]
        # recheck the reduction directly, prefix-sum gains can carry rounding noise
        if not _sse(y[lrows]) + _sse(y[rrows]) < parent_sse * (1 - 1e-12):
            continue
        tree.feature[node] = j
        tree.threshold[node] = thr
        tree.left[node] = tree._add(y[lrows].mean(), len(lrows))
        tree.right[node] = tree._add(y[rrows].mean(), len(rrows))
        stack.append((tree.right[node], rrows, depth + 1))
        stack.append((tree.left[node], lrows, depth + 1))
    return tree


def predict_tree(model: TreeModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeMismatch(f"expected {model.n_features} columns, got shape {X.shape}")
    feature = np.asarray(model.feature)
    threshold = np.asarray(model.threshold)
    left = np.asarray(model.left)
    right = np.asarray(model.right)
    node = np.zeros(X.shape[0], dtype=np.int64)
    active = feature[node] >= 0
    while np.any(active):
        idx = np.nonzero(active)[0]
        nd = node[idx]
        go_left = X[idx, feature[nd]] <= threshold[nd]
        node[idx] = np.where(go_left, left[nd], right[nd])
        active = feature[node] >= 0
    return np.asarray(model.value)[node]
