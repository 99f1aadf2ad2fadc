"""Binary amplitude and variance gates.

Both emit CLENCH when their statistic exceeds the threshold and RELAX
otherwise. They never output NOISE, which is exactly how they fail on
motion artifacts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataio import Class, N_CLASSES, Window
from ..features import stat_features_array
from ._base import Classifier, as_matrix, check_labels, register

MAX_COL = 2
SD_COL = 1


def _gate_proba(fires: np.ndarray) -> np.ndarray:
    P = np.zeros((len(fires), N_CLASSES))
    P[np.arange(len(fires)), np.where(fires, int(Class.CLENCH), int(Class.RELAX))] = 1.0
    return P


def _window_array(w) -> np.ndarray:
    return np.asarray(w.samples if isinstance(w, Window) else w, dtype=np.float64)


@register("threshold")
@dataclass(eq=False)
class ThresholdModel(Classifier):
    """Fires when the centered peak amplitude exceeds ``threshold`` (ADC counts)."""

    threshold: float

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")

    def statistic(self, X) -> np.ndarray:
        return as_matrix(X)[:, MAX_COL]

    def predict_proba(self, X) -> np.ndarray:
        return _gate_proba(self.statistic(X) > self.threshold)


@register("variance")
@dataclass(eq=False)
class VarianceModel(Classifier):
    """Fires when the sample variance (N-1 divisor) exceeds ``threshold``."""

    threshold: float

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")

    def statistic(self, X) -> np.ndarray:
        return as_matrix(X)[:, SD_COL] ** 2

    def predict_proba(self, X) -> np.ndarray:
        return _gate_proba(self.statistic(X) > self.threshold)


def threshold_predict(m: ThresholdModel, w) -> Class:
    x = _window_array(w)
    return Class.CLENCH if np.max(np.abs(x - x.mean())) > m.threshold else Class.RELAX


def variance_predict(m: VarianceModel, w) -> Class:
    x = _window_array(w)
    return Class.CLENCH if np.var(x, ddof=1) > m.threshold else Class.RELAX


def default_grid(stat: np.ndarray) -> np.ndarray:
    """Midpoints between consecutive distinct positive values of ``stat``."""
    u = np.unique(stat[stat > 0])
    if len(u) < 2:
        return np.array([u[0] if len(u) else 1.0])
    return (u[:-1] + u[1:]) / 2.0


def tune_gate(stat: np.ndarray, y: np.ndarray, grid=None) -> float:
    """Threshold from ``grid`` with the best training accuracy; earliest wins ties."""
    y = check_labels(y, require_all=False)
    grid = default_grid(stat) if grid is None else np.asarray(grid, dtype=np.float64)
    grid = grid[grid > 0]
    if len(grid) == 0:
        raise ValueError("threshold grid has no positive candidates")
    pred = np.where(stat[None, :] > grid[:, None], int(Class.CLENCH), int(Class.RELAX))
    acc = (pred == y[None, :]).mean(axis=1)
    return float(grid[int(np.argmax(acc))])


def fit_threshold(X, y, grid=None) -> ThresholdModel:
    return ThresholdModel(tune_gate(as_matrix(X)[:, MAX_COL], y, grid))


def fit_variance(X, y, grid=None) -> VarianceModel:
    return VarianceModel(tune_gate(as_matrix(X)[:, SD_COL] ** 2, y, grid))


def window_statistics(windows) -> np.ndarray:
    """Feature rows for raw windows, for use with the gate models."""
    return np.array([stat_features_array(_window_array(w)) for w in windows])
