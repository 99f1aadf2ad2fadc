from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._base import Classifier, register

PROBA_TOL = 1e-6


@register("ensemble")
@dataclass(eq=False)
class EnsembleModel(Classifier):
    """Soft-voting ensemble: weighted mean of member class probabilities.

    ``adapters[i]`` maps the ensemble input to the representation member
    ``i`` was trained on; ``None`` passes the input through unchanged.
    """

    members: Sequence[Classifier]
    weights: np.ndarray | None = None
    adapters: Sequence[Callable | None] | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError("an ensemble needs at least two members")
        if self.weights is None:
            self.weights = np.full(len(self.members), 1.0 / len(self.members))
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (len(self.members),) or np.any(self.weights < 0):
            raise ValueError("weights must be one non-negative value per member")
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        if self.adapters is None:
            self.adapters = [None] * len(self.members)

    def member_probas(self, X) -> list[np.ndarray]:
        out = []
        for i, (m, adapt) in enumerate(zip(self.members, self.adapters)):
            P = np.asarray(m.predict_proba(X if adapt is None else adapt(X)), dtype=np.float64)
            if np.any(np.abs(P.sum(axis=1) - 1.0) > PROBA_TOL):
                raise ValueError(f"member {i} probabilities do not sum to 1")
            out.append(P)
        return out

    def predict_proba(self, X) -> np.ndarray:
        P = sum(w * P for w, P in zip(self.weights, self.member_probas(X)))
        return P / P.sum(axis=1, keepdims=True)


def ensemble_proba(e: EnsembleModel, x) -> np.ndarray:
    P = e.predict_proba(x)
    return P[0] if np.ndim(x) == 1 else P


def ensemble_predict(e: EnsembleModel, x):
    P = e.predict_proba(x)
    pred = np.argmax(P, axis=1)
    return int(pred[0]) if np.ndim(x) == 1 else pred
