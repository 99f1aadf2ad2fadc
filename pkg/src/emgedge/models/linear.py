"""Multinomial logistic regression and PCA projection."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dataio import N_CLASSES
from ..features import Standardizer, fit_standardizer
from ._base import Classifier, as_matrix, check_labels, register, softmax


@dataclass
class LogRegConfig:
    learning_rate: float = 0.5
    n_iter: int = 3000
    l2: float = 1e-3
    tol: float = 1e-9
    standardize: bool = True


def logreg_loss_grad(W: np.ndarray, b: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float):
    """Mean cross-entropy plus ``l2/2 * ||W||^2`` and its gradient ``(dW, db)``."""
    n = len(y)
    P = softmax(X @ W.T + b)
    loss = -np.mean(np.log(np.maximum(P[np.arange(n), y], 1e-300))) + 0.5 * l2 * np.sum(W * W)
    D = P.copy()
    D[np.arange(n), y] -= 1.0
    D /= n
    return loss, D.T @ X + l2 * W, D.sum(axis=0)


@register("logreg")
@dataclass(eq=False)
class LogRegModel(Classifier):
    W: np.ndarray
    b: np.ndarray
    standardizer: Standardizer | None = None
    n_iter_run: int = 0

    def predict_proba(self, X) -> np.ndarray:
        X = as_matrix(X)
        if self.standardizer is not None:
            X = self.standardizer.apply(X)
        return softmax(X @ self.W.T + self.b)


def train_logreg(X, y, cfg: LogRegConfig | None = None) -> LogRegModel:
    """Full-batch gradient descent from zero weights."""
    cfg = cfg or LogRegConfig()
    X = as_matrix(X)
    y = check_labels(y)
    std = fit_standardizer(X) if cfg.standardize else None
    Z = std.apply(X) if std is not None else X
    W = np.zeros((N_CLASSES, Z.shape[1]))
    b = np.zeros(N_CLASSES)
    it = 0
    for it in range(1, cfg.n_iter + 1):
        _, dW, db = logreg_loss_grad(W, b, Z, y, cfg.l2)
        W -= cfg.learning_rate * dW
        b -= cfg.learning_rate * db
        if np.sqrt(np.sum(dW * dW) + np.sum(db * db)) < cfg.tol:
            break
    return LogRegModel(W, b, std, it)


def logreg_proba(m: LogRegModel, v) -> np.ndarray:
    return m.predict_proba(v)[0]


# ------------------------------------------------------------------------- PCA

@dataclass(eq=False)
class PcaModel:
    """Top principal axes of the standardized features.

    ``components`` rows are unit eigenvectors of the sample covariance, each
    signed so its largest-magnitude entry is positive.
    """

    standardizer: Standardizer
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    explained_variance_ratio: np.ndarray

    def project(self, X) -> np.ndarray:
        Z = self.standardizer.apply(as_matrix(X)) - self.mean
        return Z @ self.components.T


def orient_eigenvectors(V: np.ndarray) -> np.ndarray:
    """Flip columns of ``V`` so each one's largest-|.| entry is positive."""
    V = V.copy()
    for j in range(V.shape[1]):
        if V[np.argmax(np.abs(V[:, j])), j] < 0:
            V[:, j] = -V[:, j]
    return V


def pca_fit(X, n_components: int = 2) -> PcaModel:
    X = as_matrix(X)
    if len(X) < 3:
        raise ValueError("PCA needs at least 3 samples")
    std = fit_standardizer(X)
    Z = std.apply(X)
    mean = Z.mean(axis=0)
    cov = np.cov(Z - mean, rowvar=False, ddof=1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = orient_eigenvectors(evecs[:, order])
    total = evals.sum()
    ratio = evals / total if total > 0 else np.zeros_like(evals)
    return PcaModel(std, mean, evecs[:, :n_components].T.copy(), evals[:n_components].copy(),
                    ratio[:n_components].copy())


def pca_project(m: PcaModel, v) -> np.ndarray:
    out = m.project(v)
    return out[0] if np.ndim(v) == 1 else out


@register("pca-logreg")
@dataclass(eq=False)
class PcaLogRegModel(Classifier):
    pca: PcaModel
    logreg: LogRegModel = field(repr=False, default=None)

    def predict_proba(self, X) -> np.ndarray:
        return self.logreg.predict_proba(self.pca.project(X))


def train_pca_logreg(X, y, cfg: LogRegConfig | None = None, n_components: int = 2) -> PcaLogRegModel:
    pca = pca_fit(X, n_components)
    return PcaLogRegModel(pca, train_logreg(pca.project(X), y, cfg))
