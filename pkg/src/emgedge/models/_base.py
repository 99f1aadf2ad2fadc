from __future__ import annotations

import numpy as np

from ..dataio import N_CLASSES

MODEL_REGISTRY: dict[str, type] = {}


def register(kind: str):
    def deco(cls):
        cls.kind = kind
        MODEL_REGISTRY[kind] = cls
        return cls
    return deco


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return X[None, :] if X.ndim == 1 else X


def check_labels(y, n_classes: int = N_CLASSES, require_all: bool = True) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    if y.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    if len(y) and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError("label outside the class range")
    if require_all:
        missing = [c for c in range(n_classes) if not np.any(y == c)]
        if missing:
            raise ValueError(f"class(es) {missing} absent from training data")
    return y


class Classifier:
    """Mixin: batch ``predict`` from ``predict_proba`` with smallest-code ties."""

    kind = "base"
    n_classes = N_CLASSES

    def predict_proba(self, X) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(as_matrix(X)), axis=1)

    def predict_one(self, v) -> int:
        return int(self.predict(np.asarray(v, dtype=np.float64)[None, :])[0])
