"""Stratified splits, cross-validation, confusion matrices and latency."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .dataio import N_CLASSES, Class, Dataset, make_rng
from .features import stat_features_array


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    folds: int = 5
    seed: int = 1738

    def __post_init__(self):
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must lie strictly between 0 and 1")
        if self.folds < 2:
            raise ValueError("folds must be at least 2")


# ------------------------------------------------------------------ splitting

def _class_indices(y: np.ndarray, spec: SplitSpec) -> list[np.ndarray]:
    rng = make_rng(spec.seed)
    out = []
    for c in range(N_CLASSES):
        idx = np.flatnonzero(y == c)
        if 0 < len(idx) < spec.folds:
            raise ValueError(f"class {Class(c).name} has {len(idx)} samples, need at least {spec.folds}")
        out.append(idx[rng.permutation(len(idx))])
    return out


def _apportion(counts: Sequence[int], fraction: float) -> list[int]:
    """Largest-remainder allocation of ``round(fraction * total)`` across classes."""
    quotas = [fraction * n for n in counts]
    alloc = [math.floor(q) for q in quotas]
    target = int(round(fraction * sum(counts)))
    order = sorted(range(len(counts)), key=lambda i: (-(quotas[i] - alloc[i]), i))
    for i in order[: max(0, target - sum(alloc))]:
        alloc[i] += 1
    return alloc


def stratified_split_indices(y, spec: SplitSpec = SplitSpec()) -> tuple[np.ndarray, np.ndarray]:
    """Shuffle each class with the split seed and hold out its share of the test set.

    Per-class test counts differ from ``test_fraction * count`` by less than
    one window, and the total equals ``round(test_fraction * n)``.
    """
    y = np.asarray(y, dtype=np.int64)
    per_class = _class_indices(y, spec)
    n_test = _apportion([len(p) for p in per_class], spec.test_fraction)
    test = np.concatenate([p[:k] for p, k in zip(per_class, n_test)])
    train = np.concatenate([p[k:] for p, k in zip(per_class, n_test)])
    return np.sort(train), np.sort(test)


def stratified_split(ds: Dataset, spec: SplitSpec = SplitSpec()) -> tuple[Dataset, Dataset]:
    train, test = stratified_split_indices(ds.labels(), spec)
    return ds.subset(train), ds.subset(test)


def stratified_folds(y, spec: SplitSpec = SplitSpec()) -> list[np.ndarray]:
    """Validation index sets; each class is dealt round-robin over the folds."""
    y = np.asarray(y, dtype=np.int64)
    folds = [[] for _ in range(spec.folds)]
    for idx in _class_indices(y, spec):
        for j, i in enumerate(idx):
            folds[j % spec.folds].append(int(i))
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


# --------------------------------------------------------------------- metrics

@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are actual classes, columns predicted, both in class-code order."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (N_CLASSES, N_CLASSES) or np.any(c < 0):
            raise ValueError("confusion counts must be a non-negative 3x3 matrix")
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_text(self) -> str:
        names = [c.name for c in Class]
        width = max(8, max(len(n) for n in names) + 1)
        lines = ["actual \\ pred".ljust(14) + "".join(n.rjust(width) for n in names)]
        for name, row in zip(names, self.counts):
            lines.append(name.ljust(14) + "".join(str(int(v)).rjust(width) for v in row))
        return "\n".join(lines)


def confusion(y_true, y_pred) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {len(y_true)} labels vs {len(y_pred)} predictions")
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    per_class: dict[Class, ClassMetrics]
    confusion: ConfusionMatrix

    def f1(self, c: Class = Class.CLENCH) -> float:
        return self.per_class[Class(c)].f1

    def as_dict(self) -> dict:
        d = {"accuracy": self.accuracy, "n": self.confusion.total}
        for c, m in self.per_class.items():
            key = c.name.lower()
            d.update({f"{key}_precision": m.precision, f"{key}_recall": m.recall,
                      f"{key}_f1": m.f1, f"{key}_support": m.support})
        return d

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)

    def to_kv(self) -> str:
        return "\n".join(f"{k}={v:.6f}" if isinstance(v, float) else f"{k}={v}"
                         for k, v in self.as_dict().items())

    def to_text(self) -> str:
        lines = [f"accuracy: {self.accuracy:.4f}  (n={self.confusion.total})",
                 f"{'class':<8}{'precision':>11}{'recall':>9}{'f1':>8}{'support':>9}"]
        for c, m in self.per_class.items():
            lines.append(f"{c.name:<8}{m.precision:>11.4f}{m.recall:>9.4f}{m.f1:>8.4f}{m.support:>9d}")
        return "\n".join(lines)


def _ratio(a: int, b: int) -> float:
    return a / b if b else 0.0


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Accuracy and per-class precision/recall/F1; an undefined ratio counts as 0."""
    c = cm.counts
    per = {}
    for k in Class:
        tp = int(c[k, k])
        precision = _ratio(tp, int(c[:, k].sum()))
        recall = _ratio(tp, int(c[k, :].sum()))
        f1 = _ratio(2 * tp, int(c[:, k].sum() + c[k, :].sum()))
        per[k] = ClassMetrics(precision, recall, f1, int(c[k, :].sum()))
    return MetricsReport(_ratio(int(np.trace(c)), cm.total), per, cm)


def evaluate(model, X, y) -> MetricsReport:
    return metrics(confusion(y, model.predict(X)))


# ------------------------------------------------------------ cross-validation

class FoldError(RuntimeError):
    def __init__(self, fold: int, cause: Exception):
        self.fold = fold
        super().__init__(f"fold {fold} failed: {cause}")


@dataclass
class CVResult:
    folds: list[MetricsReport]
    validation_indices: list[np.ndarray] = field(repr=False)

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([r.accuracy for r in self.folds])

    @property
    def mean_accuracy(self) -> float:
        return float(self.accuracies.mean())

    @property
    def std_accuracy(self) -> float:
        return float(self.accuracies.std(ddof=1)) if len(self.folds) > 1 else 0.0

    def mean_f1(self, c: Class = Class.CLENCH) -> float:
        return float(np.mean([r.f1(c) for r in self.folds]))

    def summary(self) -> str:
        lines = [f"fold {i}: accuracy={r.accuracy:.4f} clench_f1={r.f1():.4f}" for i, r in enumerate(self.folds)]
        lines.append(f"mean: accuracy={self.mean_accuracy:.4f} +/- {self.std_accuracy:.4f} "
                     f"clench_f1={self.mean_f1():.4f}")
        return "\n".join(lines)


def kfold_cv(X, y, spec: SplitSpec, trainer: Callable) -> CVResult:
    """``trainer(X_train, y_train)`` must return an object with ``predict``."""
    X = np.asarray(X)
    y = np.asarray(y, dtype=np.int64)
    folds = stratified_folds(y, spec)
    reports = []
    for i, val in enumerate(folds):
        train = np.setdiff1d(np.arange(len(y)), val)
        try:
            model = trainer(X[train], y[train])
            pred = model.predict(X[val])
        except Exception as exc:
            raise FoldError(i, exc) from exc
        reports.append(metrics(confusion(y[val], pred)))
    return CVResult(reports, folds)


# --------------------------------------------------------------------- latency

def bench_latency(model, windows, repeats: int = 1, warmup: int = 10,
                  featurize: Callable = stat_features_array) -> dict:
    """Per-window wall-clock cost of feature extraction and ``predict_one``.

    Returns mean and 99th percentile in microseconds for each stage and for
    their sum. At least 100 timed inferences are required.
    """
    windows = [np.asarray(getattr(w, "samples", w)) for w in windows]
    n = len(windows) * repeats
    if n < 100:
        raise ValueError(f"need at least 100 timed inferences, got {n}")
    predict = model.predict_one if hasattr(model, "predict_one") else model
    for w in windows[:warmup]:
        predict(featurize(w))
    feat_ns = np.empty(n)
    pred_ns = np.empty(n)
    clock = time.perf_counter_ns
    i = 0
    for _ in range(repeats):
        for w in windows:
            t0 = clock()
            v = featurize(w)
            t1 = clock()
            predict(v)
            t2 = clock()
            feat_ns[i] = t1 - t0
            pred_ns[i] = t2 - t1
            i += 1
    total = feat_ns + pred_ns
    out = {"n": n}
    for name, arr in (("feature", feat_ns), ("predict", pred_ns), ("total", total)):
        out[f"{name}_mean_us"] = float(arr.mean() / 1e3)
        out[f"{name}_p99_us"] = float(np.percentile(arr, 99) / 1e3)
    out["mean_us"] = out["total_mean_us"]
    out["p99_us"] = out["total_p99_us"]
    return out


# ---------------------------------------------------------------- disagreement

@dataclass
class DisagreementReport:
    rows: list[dict]
    n_total: int
    model_names: list[str]

    @property
    def rate(self) -> float:
        return len(self.rows) / self.n_total if self.n_total else 0.0

    def to_csv(self) -> str:
        head = ["window_id", *self.model_names, "true"]
        lines = [",".join(head)]
        for r in self.rows:
            preds = [Class(r["predictions"][m]).name for m in self.model_names]
            true = "" if r["true"] is None else Class(r["true"]).name
            lines.append(",".join([str(r["window_id"]), *preds, true]))
        return "\n".join(lines) + "\n"


def disagreement_report(models: Mapping[str, object], X, y=None, window_ids=None) -> DisagreementReport:
    if len(models) < 2:
        raise ValueError("need at least two models to compare")
    names = list(models)
    preds = {name: np.asarray(models[name].predict(X), dtype=np.int64) for name in names}
    n = len(next(iter(preds.values())))
    ids = np.arange(n) if window_ids is None else np.asarray(window_ids)
    stacked = np.stack([preds[m] for m in names])
    differ = np.any(stacked != stacked[0], axis=0)
    rows = []
    for i in np.flatnonzero(differ):
        rows.append({"window_id": int(ids[i]),
                     "predictions": {m: int(preds[m][i]) for m in names},
                     "true": None if y is None else int(y[i])})
    return DisagreementReport(rows, n, names)
