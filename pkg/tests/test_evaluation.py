from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emgedge.dataio import Class
from emgedge.evaluation import (ConfusionMatrix, FoldError, SplitSpec, bench_latency, confusion,
                                disagreement_report, evaluate, kfold_cv, metrics, stratified_folds,
                                stratified_split, stratified_split_indices)
from emgedge.features import feature_matrix
from emgedge.models import ForestConfig, ThresholdModel, VarianceModel, train_forest


class Constant:
    def __init__(self, c):
        self.c = int(c)

    def predict(self, X):
        return np.full(len(X), self.c)


def _labels(counts):
    return np.concatenate([np.full(n, c) for c, n in enumerate(counts)])


# ------------------------------------------------------------------ splitting

def test_split_divisible_case(synth):
    train, test = stratified_split(synth, SplitSpec(0.2))
    assert test.class_counts() == {Class.RELAX: 20, Class.CLENCH: 20, Class.NOISE: 20}
    assert len(train) == 240


def test_split_deterministic_and_disjoint(xy):
    y = xy[1]
    a = stratified_split_indices(y, SplitSpec(seed=5))
    b = stratified_split_indices(y, SplitSpec(seed=5))
    assert all(np.array_equal(u, v) for u, v in zip(a, b))
    assert not set(a[0]) & set(a[1])
    assert len(a[0]) + len(a[1]) == len(y)
    c = stratified_split_indices(y, SplitSpec(seed=6))
    assert not np.array_equal(a[1], c[1])


def test_split_paper_scale():
    y = _labels([433, 434, 433])
    _, test = stratified_split_indices(y, SplitSpec(0.206))
    assert len(test) == 268


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(5, 200), min_size=3, max_size=3), st.floats(0.05, 0.95), st.integers(0, 99))
def test_split_proportions_within_one(counts, frac, seed):
    y = _labels(counts)
    _, test = stratified_split_indices(y, SplitSpec(frac, seed=seed))
    for c, n in enumerate(counts):
        assert abs(np.sum(y[test] == c) - frac * n) < 1
    assert len(test) == round(frac * len(y))


def test_split_too_few_samples():
    with pytest.raises(ValueError, match="need at least 5"):
        stratified_split_indices(_labels([10, 10, 3]))


def test_split_spec_validation():
    with pytest.raises(ValueError):
        SplitSpec(test_fraction=1.0)
    with pytest.raises(ValueError):
        SplitSpec(folds=1)


# -------------------------------------------------------------------- folds

def test_folds_fifty_per_class():
    y = _labels([50, 50, 50])
    for f in stratified_folds(y, SplitSpec(folds=5)):
        assert list(np.bincount(y[f], minlength=3)) == [10, 10, 10]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(5, 60), min_size=3, max_size=3), st.integers(2, 5), st.integers(0, 99))
def test_folds_partition(counts, k, seed):
    y = _labels(counts)
    folds = stratified_folds(y, SplitSpec(folds=k, seed=seed))
    assert len(folds) == k
    allidx = np.concatenate(folds)
    assert np.array_equal(np.sort(allidx), np.arange(len(y)))


def test_cv_constant_predictor_majority_share():
    y = _labels([60, 20, 20])
    X = np.zeros((len(y), 4))
    cv = kfold_cv(X, y, SplitSpec(folds=5), lambda X, y: Constant(Class.RELAX))
    assert cv.mean_accuracy == pytest.approx(0.6)
    assert len(cv.folds) == 5


def test_cv_forest_folds_are_homogeneous(xy):
    X, y = xy
    cv = kfold_cv(X, y, SplitSpec(folds=5), lambda X, y: train_forest(X, y, ForestConfig(n_trees=20)))
    acc = cv.accuracies
    assert acc.max() - acc.min() <= 0.1
    assert "mean: accuracy=" in cv.summary()
    assert len(cv.summary().splitlines()) == 6


def test_cv_propagates_fold_index():
    y = _labels([10, 10, 10])
    calls = []

    def trainer(X, y):
        calls.append(1)
        if len(calls) == 3:
            raise RuntimeError("boom")
        return Constant(0)

    with pytest.raises(FoldError, match="fold 2") as err:
        kfold_cv(np.zeros((30, 4)), y, SplitSpec(folds=5), trainer)
    assert err.value.fold == 2


# ------------------------------------------------------------------- metrics

def test_perfect_predictions():
    y = _labels([3, 4, 5])
    r = metrics(confusion(y, y))
    assert r.accuracy == 1.0
    assert np.array_equal(r.confusion.counts, np.diag([3, 4, 5]))
    assert all(m.f1 == 1.0 for m in r.per_class.values())


def test_all_relax_predictions():
    y = _labels([10, 10, 10])
    r = metrics(confusion(y, np.zeros_like(y)))
    assert r.accuracy == pytest.approx(1 / 3)
    assert r.f1(Class.CLENCH) == 0.0
    assert r.per_class[Class.CLENCH].precision == 0.0


def test_reference_table():
    # rows/cols reordered to RELAX, CLENCH, NOISE
    cm = ConfusionMatrix([[62, 7, 21], [13, 58, 18], [26, 2, 61]])
    r = metrics(cm)
    assert r.accuracy == pytest.approx(181 / 268)
    assert r.f1(Class.CLENCH) == pytest.approx(116 / 156)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=200))
def test_confusion_rows_and_two_path_accuracy(pairs):
    yt = np.array([p[0] for p in pairs])
    yp = np.array([p[1] for p in pairs])
    r = metrics(confusion(yt, yp))
    assert list(r.confusion.counts.sum(axis=1)) == [int(np.sum(yt == c)) for c in range(3)]
    assert [r.per_class[c].support for c in Class] == [int(np.sum(yt == c)) for c in range(3)]
    streaming = sum(int(a == b) for a, b in pairs) / len(pairs)
    assert r.accuracy == pytest.approx(streaming, abs=1e-15)


def test_confusion_errors():
    with pytest.raises(ValueError, match="length mismatch"):
        confusion([0, 1], [0])
    with pytest.raises(ValueError):
        ConfusionMatrix(np.zeros((2, 2)))


def test_report_formats():
    y = _labels([2, 2, 2])
    r = evaluate(Constant(Class.CLENCH), np.zeros((6, 4)), y)
    d = json.loads(r.to_json())
    assert d["accuracy"] == pytest.approx(1 / 3) and d["n"] == 6
    assert "clench_f1=" in r.to_kv()
    assert "accuracy: 0.3333" in r.to_text()
    assert r.confusion.to_text().splitlines()[2].split()[0] == "CLENCH"


# ------------------------------------------------------------------- latency

def test_bench_latency_shape(forest, synth):
    out = bench_latency(forest, synth.windows[:120])
    assert out["n"] == 120
    for key in ("feature_mean_us", "predict_mean_us", "total_mean_us", "mean_us", "p99_us"):
        assert out[key] > 0
    assert out["p99_us"] >= out["mean_us"] / 2
    assert out["total_mean_us"] == pytest.approx(out["feature_mean_us"] + out["predict_mean_us"])


def test_bench_latency_needs_100(forest, synth):
    with pytest.raises(ValueError, match="100"):
        bench_latency(forest, synth.windows[:50])
    assert bench_latency(forest, synth.windows[:50], repeats=2)["n"] == 100


def test_latency_grows_with_trees(xy, synth):
    X, y = xy
    small = train_forest(X, y, ForestConfig(n_trees=1))
    big = train_forest(X, y, ForestConfig(n_trees=100))
    windows = synth.windows[:100]
    best = lambda m: min(bench_latency(m, windows, repeats=3)["predict_mean_us"] for _ in range(3))
    assert best(big) > best(small)


# -------------------------------------------------------------- disagreement

def test_disagreement_identical_models(xy):
    m = ThresholdModel(100.0)
    r = disagreement_report({"a": m, "b": m}, xy[0], xy[1])
    assert r.rows == [] and r.rate == 0.0


def test_disagreement_threshold_vs_variance():
    # a lone spike: large peak, small variance
    spike = np.full(1000, 2048.0)
    spike[500] = 4000
    flat = np.full(1000, 2048.0)
    X = feature_matrix(np.stack([spike, flat]))
    models = {"threshold": ThresholdModel(1000.0), "variance": VarianceModel(10000.0)}
    r = disagreement_report(models, X, [Class.NOISE, Class.NOISE], window_ids=[7, 8])
    assert r.rate == 0.5
    assert r.rows[0]["window_id"] == 7
    assert r.to_csv().splitlines() == ["window_id,threshold,variance,true", "7,CLENCH,RELAX,NOISE"]


def test_disagreement_rate_recount(xy):
    X, y = xy
    models = {"t": ThresholdModel(500.0), "v": VarianceModel(200.0 ** 2), "c": Constant(0)}
    r = disagreement_report(models, X, y)
    preds = [m.predict(X) for m in models.values()]
    brute = sum(1 for i in range(len(y)) if len({int(p[i]) for p in preds}) > 1)
    assert len(r.rows) == brute and r.rate == brute / len(y)


def test_disagreement_needs_two_models():
    with pytest.raises(ValueError):
        disagreement_report({"a": Constant(0)}, np.zeros((2, 4)))
