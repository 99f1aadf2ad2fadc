"""Second-order gradient boosting for softmax cross-entropy.

Each round fits one regression tree per class to the per-sample gradient
``g = p - y`` and hessian ``h = p (1 - p)`` of the softmax loss. A leaf's
weight is ``-G / (H + lambda)``; a split is kept when

    0.5 * (G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)) - gamma > 0

which is the regularizer ``gamma * T + 0.5 * lambda * ||w||^2`` applied
greedily. No row or column subsampling is done.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dataio import N_CLASSES
from ._base import Classifier, as_matrix, check_labels, register, softmax
from .trees import GAIN_EPS, split_thresholds

HESS_FLOOR = 1e-16


@dataclass
class GbtConfig:
    n_rounds: int = 50
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    gamma: float = 0.0
    max_depth: int = 3


@dataclass
class RegTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
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

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def depth(self) -> int:
        d = np.zeros(len(self.feature), dtype=np.int64)
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                d[self.left[i]] = d[self.right[i]] = d[i] + 1
        return int(d.max())


def _leaf_score(G, H, lam):
    return G * G / (H + lam)


def _best_split(X, g, h, lam, gamma):
    G, H = g.sum(), h.sum()
    parent = _leaf_score(G, H, lam)
    best = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        GL = np.cumsum(g[order])[:-1]
        HL = np.cumsum(h[order])[:-1]
        gain = 0.5 * (_leaf_score(GL, HL, lam) + _leaf_score(G - GL, H - HL, lam) - parent) - gamma
        thr, valid = split_thresholds(xs)
        gain = np.where(valid, gain, -np.inf)
        i = int(np.argmax(gain)) if len(gain) else 0
        if len(gain) and gain[i] > GAIN_EPS and (best is None or gain[i] > best[2]):
            best = (f, float(thr[i]), float(gain[i]))
    return best


def build_reg_tree(X, g, h, cfg: GbtConfig) -> RegTree:
    feature, threshold, left, right, value = [], [], [], [], []
    stack = [(np.arange(len(g)), 0, -1, False)]
    while stack:
        idx, depth, parent, is_left = stack.pop()
        node = len(feature)
        if parent >= 0:
            (left if is_left else right)[parent] = node
        gi, hi = g[idx], h[idx]
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(-gi.sum() / (hi.sum() + cfg.reg_lambda))
        if depth >= cfg.max_depth or len(idx) < 2:
            continue
        split = _best_split(X[idx], gi, hi, cfg.reg_lambda, cfg.gamma)
        if split is None:
            continue
        f, t, _ = split
        feature[node] = f
        threshold[node] = t
        mask = X[idx, f] <= t
        stack.append((idx[~mask], depth + 1, node, False))
        stack.append((idx[mask], depth + 1, node, True))
    return RegTree(np.array(feature, dtype=np.int64), np.array(threshold, dtype=np.float64),
                   np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                   np.array(value, dtype=np.float64))


def log_loss(P: np.ndarray, y: np.ndarray) -> float:
    return float(-np.mean(np.log(np.maximum(P[np.arange(len(y)), y], 1e-300))))


@register("gbt")
@dataclass(eq=False)
class GbtModel(Classifier):
    """``trees[r][k]`` is the round-``r`` tree for class ``k``."""

    trees: list[list[RegTree]]
    base_score: np.ndarray
    config: GbtConfig = field(default_factory=GbtConfig)
    train_loss: list[float] = field(default_factory=list)

    def decision_function(self, X) -> np.ndarray:
        X = as_matrix(X)
        F = np.tile(self.base_score, (len(X), 1))
        for round_trees in self.trees:
            for k, tree in enumerate(round_trees):
                F[:, k] += self.config.learning_rate * tree.predict(X)
        return F

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.decision_function(X))


def train_gbt(X, y, cfg: GbtConfig | None = None) -> GbtModel:
    cfg = cfg or GbtConfig()
    if cfg.n_rounds < 0 or not 0 < cfg.learning_rate <= 1 or cfg.reg_lambda < 0 or cfg.gamma < 0:
        raise ValueError("invalid boosting configuration")
    X = as_matrix(X)
    y = check_labels(y)
    K = N_CLASSES
    Y = np.eye(K)[y]
    base = np.zeros(K)
    F = np.tile(base, (len(y), 1))
    P = softmax(F)
    losses = [log_loss(P, y)]
    rounds = []
    for _ in range(cfg.n_rounds):
        round_trees = []
        for k in range(K):
            g = P[:, k] - Y[:, k]
            h = np.maximum(P[:, k] * (1.0 - P[:, k]), HESS_FLOOR)
            round_trees.append(build_reg_tree(X, g, h, cfg))
        for k, tree in enumerate(round_trees):
            F[:, k] += cfg.learning_rate * tree.predict(X)
        P = softmax(F)
        losses.append(log_loss(P, y))
        rounds.append(round_trees)
    return GbtModel(rounds, base, cfg, losses)


def gbt_proba(m: GbtModel, v) -> np.ndarray:
    return m.predict_proba(v)[0]
