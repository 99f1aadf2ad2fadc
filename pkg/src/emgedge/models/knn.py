from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataio import N_CLASSES
from ..features import Standardizer, fit_standardizer
from ._base import Classifier, as_matrix, check_labels, register


@register("knn")
@dataclass(eq=False)
class KnnModel(Classifier):
    """k-nearest neighbours over standardized features.

    Neighbours are ordered by Euclidean distance with ties kept in training
    order; the vote goes to the most frequent label, smallest code on ties.
    """

    k: int
    X: np.ndarray
    y: np.ndarray
    standardizer: Standardizer | None = None

    def __post_init__(self):
        if not 1 <= self.k <= len(self.y):
            raise ValueError(f"k={self.k} must be between 1 and the training size {len(self.y)}")

    def neighbours(self, Q) -> np.ndarray:
        Q = as_matrix(Q)
        if self.standardizer is not None:
            Q = self.standardizer.apply(Q)
        d2 = ((Q[:, None, :] - self.X[None, :, :]) ** 2).sum(axis=2)
        return np.argsort(d2, axis=1, kind="stable")[:, : self.k]

    def predict(self, X) -> np.ndarray:
        nb = self.neighbours(X)
        return np.array([np.argmax(np.bincount(self.y[row], minlength=N_CLASSES)) for row in nb])

    def predict_proba(self, X) -> np.ndarray:
        nb = self.neighbours(X)
        return np.array([np.bincount(self.y[row], minlength=N_CLASSES) / self.k for row in nb])


def train_knn(X, y, k: int = 5, standardize: bool = True) -> KnnModel:
    X = as_matrix(X)
    y = check_labels(y, require_all=False)
    std = fit_standardizer(X) if standardize else None
    return KnnModel(k, std.apply(X) if std is not None else X.copy(), y.copy(), std)


def knn_predict(m: KnnModel, v) -> int:
    return int(m.predict(v)[0])
