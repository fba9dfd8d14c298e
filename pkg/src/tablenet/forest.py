"""Random forest classifier (bootstrap + random feature subsets + Gini splits).

Trees are stored as flat arrays so that a model serializes to plain JSON and
predictions are vectorized over samples.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass
class ForestParams:
    num_trees: int = 100
    min_samples_split: int = 2
    max_features: int | None = None  # None -> ceil(sqrt(d))
    seed: int = 0


@dataclass
class Tree:
    feature: np.ndarray  # -1 for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (nodes, classes) class counts at build time

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of X."""
        node = np.zeros(len(X), dtype=int)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            n = node[idx]
            go_left = X[idx, self.feature[n]] <= self.threshold[n]
            node[idx] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return node

    def to_json(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_json(cls, obj) -> "Tree":
        return cls(
            np.asarray(obj["feature"], dtype=int),
            np.asarray(obj["threshold"], dtype=float),
            np.asarray(obj["left"], dtype=int),
            np.asarray(obj["right"], dtype=int),
            np.asarray(obj["counts"], dtype=float).reshape(len(obj["feature"]), -1),
        )


@dataclass
class RandomForestModel:
    trees: list[Tree]
    params: ForestParams
    n_classes: int
    feature_means: np.ndarray
    feature_names: list[str] = field(default_factory=list)

    def impute(self, X) -> np.ndarray:
        X = np.array(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        bad = ~np.isfinite(X)
        if bad.any():
            X[bad] = np.broadcast_to(self.feature_means, X.shape)[bad]
        return X

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)
            fh.write("\n")

    def to_json(self) -> dict:
        return {
            "format": "tablenet-forest",
            "version": FORMAT_VERSION,
            "params": vars(self.params),
            "n_classes": self.n_classes,
            "feature_means": self.feature_means.tolist(),
            "feature_names": list(self.feature_names),
            "trees": [t.to_json() for t in self.trees],
        }

    @classmethod
    def from_json(cls, obj) -> "RandomForestModel":
        if obj.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported forest format version {obj.get('version')}")
        return cls(
            trees=[Tree.from_json(t) for t in obj["trees"]],
            params=ForestParams(**obj["params"]),
            n_classes=int(obj["n_classes"]),
            feature_means=np.asarray(obj["feature_means"], dtype=float),
            feature_names=list(obj.get("feature_names", [])),
        )

    @classmethod
    def load(cls, path) -> "RandomForestModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _gini_children(counts_left: np.ndarray, total: np.ndarray) -> np.ndarray:
    """Weighted Gini impurity of both children for every candidate split."""
    counts_right = total[None, :] - counts_left
    nl = counts_left.sum(axis=1)
    nr = counts_right.sum(axis=1)
    gl = 1.0 - ((counts_left / np.maximum(nl, 1)[:, None]) ** 2).sum(axis=1)
    gr = 1.0 - ((counts_right / np.maximum(nr, 1)[:, None]) ** 2).sum(axis=1)
    return (nl * gl + nr * gr) / (nl + nr)


def _best_split(X, y, n_classes, features):
    total = np.bincount(y, minlength=n_classes).astype(float)
    n = len(y)
    parent = 1.0 - ((total / n) ** 2).sum()
    best = (0.0, -1, 0.0)
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y[order]] = 1.0
        cum = np.cumsum(onehot, axis=0)[:-1]
        valid = xs[1:] > xs[:-1]
        if not valid.any():
            continue
        imp = _gini_children(cum[valid], total)
        k = int(np.argmin(imp))
        gain = parent - imp[k]
        if gain > best[0] + 1e-12:
            pos = np.nonzero(valid)[0][k]
            thr = 0.5 * (xs[pos] + xs[pos + 1])
            if not xs[pos] <= thr < xs[pos + 1]:
                thr = xs[pos]  # midpoint of adjacent floats can round up
            best = (gain, int(f), float(thr))
    return best


def build_tree(X, y, n_classes, min_samples_split, max_features, rng, rows=None) -> Tree:
    """Grow one tree on (X, y).

    ``rows`` maps each sample to its original training row; bootstrap
    duplicates count once towards ``min_samples_split`` and act as weights
    in the impurity and the leaf counts.
    """
    d = X.shape[1]
    rows = np.arange(len(y)) if rows is None else np.asarray(rows)
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(np.bincount(y[idx], minlength=n_classes).astype(float))
        return len(feature) - 1

    root = new_node(np.arange(len(y)))
    stack = [(root, np.arange(len(y)))]
    while stack:
        node, idx = stack.pop()
        c = counts[node]
        if np.count_nonzero(c) <= 1 or len(np.unique(rows[idx])) < min_samples_split:
            continue
        feats = rng.choice(d, size=max_features, replace=False)
        gain, f, thr = _best_split(X[idx], y[idx], n_classes, np.sort(feats))
        if f < 0:
            continue
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri))
        stack.append((left[node], li))
    return Tree(
        np.asarray(feature, dtype=int),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=int),
        np.asarray(right, dtype=int),
        np.vstack(counts),
    )


def _fit_tree(args):
    X, y, n_classes, params, max_features, index = args
    rng = np.random.default_rng([params.seed, index])
    boot = rng.integers(0, len(y), size=len(y))
    return build_tree(X[boot], y[boot], n_classes, params.min_samples_split, max_features, rng, rows=boot)


def train_rf(X, y, params: ForestParams = None, feature_names=(), n_classes=None, workers: int = 1) -> RandomForestModel:
    """Fit a forest; NaN entries are imputed with the training column means.

    Every tree draws from its own generator seeded with ``(seed, tree index)``
    so that the result does not depend on ``workers``.
    """
    params = params or ForestParams()
    X = np.array(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or len(X) != len(y) or len(y) == 0:
        raise ValueError("X must be (n, d) with one label per row")
    n_classes = int(n_classes or (y.max() + 1))
    with np.errstate(all="ignore"):
        means = np.nanmean(np.where(np.isfinite(X), X, np.nan), axis=0)
    means = np.where(np.isfinite(means), means, 0.0)
    model = RandomForestModel([], params, n_classes, means, list(feature_names))
    X = model.impute(X)
    if len(np.unique(y)) < 2:
        log.warning("single-class training data; forest degenerates to a constant predictor")
    max_features = params.max_features or math.ceil(math.sqrt(X.shape[1]))
    max_features = min(max_features, X.shape[1])
    jobs = [(X, y, n_classes, params, max_features, i) for i in range(params.num_trees)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            model.trees = list(pool.map(_fit_tree, jobs))
    else:
        model.trees = [_fit_tree(j) for j in jobs]
    return model


def rf_predict_proba(model: RandomForestModel, X) -> np.ndarray:
    """Mean over trees of the normalized leaf class distributions."""
    X = model.impute(X)
    out = np.zeros((len(X), model.n_classes))
    for tree in model.trees:
        leaf = tree.counts[tree.apply(X)]
        out += leaf / leaf.sum(axis=1, keepdims=True)
    return out / len(model.trees)


def rf_predict(model: RandomForestModel, X) -> np.ndarray:
    return np.argmax(rf_predict_proba(model, X), axis=1)
