"""CART classification trees with Gini splits, and bagged random forests.

Split thresholds are rounded to the nearest float32 that still separates
the two neighbouring training values, so a forest can be written to the
32-bit flat format without changing a single decision.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .. import _kernels
from ..dataio import N_CLASSES, make_rng
from ._base import Classifier, as_matrix, check_labels, register

GAIN_EPS = 1e-12


def gini(counts) -> float:
    """Gini impurity ``1 - sum p_k^2`` from integer class counts."""
    counts = np.asarray(counts, dtype=np.int64)
    n = int(counts.sum())
    if n == 0:
        return 0.0
    return (n * n - int(np.dot(counts, counts))) / (n * n)


def split_thresholds(xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint thresholds between consecutive sorted values.

    Returns ``(thresholds, valid)`` for the n-1 gaps. A gap is valid when the
    values differ and some float32 ``t`` satisfies ``xs[i] <= t < xs[i+1]``.
    """
    lo, hi = xs[:-1], xs[1:]
    t32 = ((lo + hi) / 2.0).astype(np.float32)
    too_high = t32.astype(np.float64) >= hi
    t32[too_high] = np.nextafter(t32[too_high], np.float32(-np.inf))
    t = t32.astype(np.float64)
    valid = (lo < hi) & (t >= lo) & (t < hi)
    return t, valid


def best_gini_split(X: np.ndarray, y: np.ndarray, features, n_classes: int = N_CLASSES):
    """Best (feature, threshold, gain) over ``features``, or None if no gain > 0."""
    n = len(y)
    total = np.bincount(y, minlength=n_classes).astype(np.float64)
    parent = float(np.dot(total, total)) / n
    onehot = np.eye(n_classes)[y]
    nl = np.arange(1, n, dtype=np.float64)
    nr = n - nl
    best = None
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        cl = np.cumsum(onehot[order], axis=0)[:-1]
        cr = total - cl
        score = (cl * cl).sum(axis=1) / nl + (cr * cr).sum(axis=1) / nr
        gain = (score - parent) / n
        thr, valid = split_thresholds(xs)
        gain = np.where(valid, gain, -np.inf)
        i = int(np.argmax(gain))
        if gain[i] > GAIN_EPS and (best is None or gain[i] > best[2]):
            best = (int(f), float(thr[i]), float(gain[i]))
    return best


@dataclass
class TreeConfig:
    max_depth: int | None = None
    min_samples_split: int = 2
    max_features: int | None = None
    n_classes: int = N_CLASSES


@dataclass
class Tree:
    """Array-backed binary tree in preorder; node 0 is the root.

    ``feature[i] == -1`` marks a leaf. ``counts[i]`` holds the training class
    counts that reached node ``i`` (leaves and splits alike).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    @property
    def leaf_class(self) -> np.ndarray:
        return np.argmax(self.counts, axis=1)

    def depth(self) -> int:
        d = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                d[self.left[i]] = d[self.right[i]] = d[i] + 1
        return int(d.max())

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row of ``X``."""
        X = as_matrix(X)
        idx = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[idx] >= 0
        while active.any():
            a = rows[active]
            node = idx[a]
            go_left = X[a, self.feature[node]] <= self.threshold[node]
            idx[a] = np.where(go_left, self.left[node], self.right[node])
            active = self.feature[idx] >= 0
        return idx

    def predict(self, X) -> np.ndarray:
        return self.leaf_class[self.apply(X)]

    def predict_proba(self, X) -> np.ndarray:
        c = self.counts[self.apply(X)].astype(np.float64)
        return c / c.sum(axis=1, keepdims=True)


def train_tree(X, y, cfg: TreeConfig | None = None, rng: np.random.Generator | None = None) -> Tree:
    """Greedy Gini tree. Nodes become leaves when pure, at the depth cap,
    below ``min_samples_split``, or when no candidate split has positive gain."""
    cfg = cfg or TreeConfig()
    X = as_matrix(X)
    y = check_labels(y, cfg.n_classes, require_all=False)
    if len(y) == 0:
        raise ValueError("cannot train a tree on zero samples")
    n_features = X.shape[1]
    k = n_features if cfg.max_features is None else min(int(cfg.max_features), n_features)
    if k < n_features and rng is None:
        raise ValueError("feature subsampling requires an rng")

    feature, threshold, left, right, counts = [], [], [], [], []
    # (sample indices, depth, parent node, is_left_child)
    stack = [(np.arange(len(y)), 0, -1, False)]
    while stack:
        idx, depth, parent, is_left = stack.pop()
        node = len(feature)
        if parent >= 0:
            (left if is_left else right)[parent] = node
        yn = y[idx]
        c = np.bincount(yn, minlength=cfg.n_classes)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(c)

        if np.count_nonzero(c) <= 1 or len(idx) < cfg.min_samples_split:
            continue
        if cfg.max_depth is not None and depth >= cfg.max_depth:
            continue
        feats = np.arange(n_features) if k == n_features else np.sort(rng.choice(n_features, k, replace=False))
        split = best_gini_split(X[idx], yn, feats, cfg.n_classes)
        if split is None:
            continue
        f, t, _ = split
        feature[node] = f
        threshold[node] = t
        mask = X[idx, f] <= t
        stack.append((idx[~mask], depth + 1, node, False))
        stack.append((idx[mask], depth + 1, node, True))

    return Tree(np.array(feature, dtype=np.int64), np.array(threshold, dtype=np.float64),
                np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                np.array(counts, dtype=np.int64).reshape(-1, cfg.n_classes))


# ---------------------------------------------------------------------- forest

@dataclass
class ForestConfig:
    n_trees: int = 100
    seed: int = 1738
    max_depth: int | None = None
    min_samples_split: int = 2
    max_features: int | None = 2
    n_jobs: int = 1


@register("forest")
@dataclass(eq=False)
class Forest(Classifier):
    trees: list[Tree]
    n_classes: int = N_CLASSES
    n_features: int = 4
    config: ForestConfig = field(default_factory=ForestConfig)

    @cached_property
    def _packed(self):
        offsets = np.cumsum([0] + [t.n_nodes for t in self.trees])[:-1]
        feature = np.concatenate([t.feature for t in self.trees])
        threshold = np.concatenate([t.threshold for t in self.trees])
        left = np.concatenate([np.where(t.left >= 0, t.left + o, -1) for t, o in zip(self.trees, offsets)])
        right = np.concatenate([np.where(t.right >= 0, t.right + o, -1) for t, o in zip(self.trees, offsets)])
        leaf_class = np.concatenate([t.leaf_class for t in self.trees]).astype(np.int64)
        dist = np.concatenate([t.counts for t in self.trees]).astype(np.float64)
        dist /= dist.sum(axis=1, keepdims=True)
        return (feature, threshold, left, right, leaf_class, dist, offsets.astype(np.int64))

    @property
    def node_count(self) -> int:
        return sum(t.n_nodes for t in self.trees)

    def predict_one(self, v) -> int:
        f, t, l, r, lc, _, roots = self._packed
        x = np.asarray(v, dtype=np.float64)
        return int(_kernels.forest_vote_one(x, f, t, l, r, lc, roots, self.n_classes))

    def predict(self, X) -> np.ndarray:
        f, t, l, r, lc, _, roots = self._packed
        return _kernels.forest_vote_batch(np.ascontiguousarray(as_matrix(X)), f, t, l, r, lc, roots,
                                          self.n_classes)

    def predict_proba(self, X) -> np.ndarray:
        f, t, l, r, _, dist, roots = self._packed
        return _kernels.forest_proba_batch(np.ascontiguousarray(as_matrix(X)), f, t, l, r, dist, roots)

    def votes(self, v) -> np.ndarray:
        f, t, l, r, lc, _, roots = self._packed
        return _kernels.forest_votes(np.asarray(v, dtype=np.float64), f, t, l, r, lc, roots, self.n_classes)


def _fit_one_tree(X, y, cfg: ForestConfig, b: int) -> Tree:
    # one independent PCG64 stream per tree so thread scheduling cannot matter
    rng = make_rng(cfg.seed + b)
    boot = rng.integers(0, len(y), size=len(y))
    tcfg = TreeConfig(cfg.max_depth, cfg.min_samples_split, cfg.max_features)
    return train_tree(X[boot], y[boot], tcfg, rng)


def train_forest(X, y, cfg: ForestConfig | None = None) -> Forest:
    cfg = cfg or ForestConfig()
    if cfg.n_trees < 1:
        raise ValueError("n_trees must be at least 1")
    X = as_matrix(X)
    y = check_labels(y, require_all=False)
    if len(y) == 0:
        raise ValueError("cannot train a forest on zero samples")
    if cfg.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
            trees = list(pool.map(lambda b: _fit_one_tree(X, y, cfg, b), range(cfg.n_trees)))
    else:
        trees = [_fit_one_tree(X, y, cfg, b) for b in range(cfg.n_trees)]
    return Forest(trees, N_CLASSES, X.shape[1], cfg)


def forest_predict(f: Forest, v) -> int:
    """Modal per-tree class; ties go to the smallest class code."""
    return f.predict_one(v)


def forest_proba(f: Forest, v) -> np.ndarray:
    """Mean of the per-tree leaf class frequencies."""
    return f.predict_proba(v)[0]
