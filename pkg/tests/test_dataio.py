from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emgedge.dataio import (Class, Dataset, Sample, Session, SessionFormatError, SynthConfig, Window,
                            dataset_to_csv, label_runs, parse_session_csv, segment_windows,
                            session_to_csv, synth_dataset, synth_session)
from emgedge.features import feature_matrix

HEADER = "timestamp_ms,adc,label\n"


def _session(labels, adc=2048):
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    return Session(np.arange(n, dtype=np.int64), np.full(n, adc, dtype=np.int64), labels)


# ---------------------------------------------------------------- CSV parsing

def test_parse_minimal_file():
    s = parse_session_csv(HEADER + "0,2048,RELAX\n1,2050,RELAX")
    assert len(s) == 2
    assert list(s.labels) == [Class.RELAX, Class.RELAX]
    assert list(s.adc) == [2048, 2050]
    samples = list(s)
    assert samples[1] == Sample(1, 2050, Class.RELAX)


def test_parse_rejects_adc_out_of_range():
    with pytest.raises(SessionFormatError, match="adc out of range") as err:
        parse_session_csv(HEADER + "0,2048,RELAX\n5,9000,CLENCH\n")
    assert err.value.line == 3


@pytest.mark.parametrize("body, needle", [
    ("0,2048\n", "expected 3 fields"),
    ("0,abc,RELAX\n", "malformed row"),
    ("5,2048,RELAX\n5,2048,RELAX\n", "non-monotonic"),
    ("5,2048,RELAX\n4,2048,RELAX\n", "non-monotonic"),
    ("-1,2048,RELAX\n", "negative timestamp"),
    ("0,2048,FLEX\n", "unknown label"),
    ("0,-3,RELAX\n", "adc out of range"),
])
def test_parse_errors_name_the_line(body, needle):
    with pytest.raises(SessionFormatError, match=needle) as err:
        parse_session_csv(HEADER + body)
    assert err.value.line is not None and "line" in str(err.value)


def test_parse_rejects_bad_header():
    with pytest.raises(SessionFormatError, match="header"):
        parse_session_csv("time,value,label\n0,1,RELAX\n")
    with pytest.raises(SessionFormatError, match="empty"):
        parse_session_csv("")


def test_parse_one_protocol_cycle():
    text = session_to_csv(synth_session(SynthConfig(), n_cycles=1))
    s = parse_session_csv(text)
    assert len(s) == 15000
    for c in Class:
        assert int(np.sum(s.labels == c)) == 5000


def test_dataset_csv_round_trip():
    ds = synth_dataset(SynthConfig(n_windows_per_class=4, seed=3))
    back = segment_windows(parse_session_csv(dataset_to_csv(ds)))
    assert len(back) == len(ds)
    assert np.array_equal(back.matrix(), ds.matrix())
    assert np.array_equal(back.labels(), ds.labels())


# --------------------------------------------------------------- segmentation

def test_segment_exact_alignment():
    ds = segment_windows(_session([0] * 1000 + [1] * 1000 + [2] * 1000))
    assert [w.label for w in ds.windows] == [Class.RELAX, Class.CLENCH, Class.NOISE]


def test_segment_discards_remainder():
    assert len(segment_windows(_session([0] * 1500))) == 1


def test_segment_drops_mixed_windows():
    labels = [0] * 2000
    labels[900:1100] = [1] * 200
    assert len(segment_windows(_session(labels))) == 0


def test_segment_accepts_sample_lists():
    samples = [Sample(i, 2048, Class.NOISE) for i in range(1000)]
    ds = segment_windows(samples)
    assert len(ds) == 1 and ds.windows[0].label == Class.NOISE


def test_segment_rejects_short_input():
    with pytest.raises(ValueError, match="at least 1000"):
        segment_windows(_session([0] * 999))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(1, 3500)), min_size=1, max_size=8))
def test_segment_count_matches_pure_runs(runs):
    labels = np.concatenate([np.full(n, c) for c, n in runs])
    if len(labels) < 1000:
        with pytest.raises(ValueError):
            segment_windows(_session(labels))
        return
    expected = sum((b - a) // 1000 for a, b in label_runs(labels))
    ds = segment_windows(_session(labels))
    assert len(ds) == expected


def test_label_runs():
    assert label_runs(np.array([0, 0, 1, 1, 1, 0])) == [(0, 2), (2, 5), (5, 6)]
    assert label_runs(np.array([])) == []


# --------------------------------------------------------------------- window

def test_window_validation():
    with pytest.raises(ValueError, match="exactly 1000"):
        Window(np.zeros(999, dtype=int))
    with pytest.raises(ValueError, match="ADC range"):
        Window(np.full(1000, 4096))
    w = Window(np.full(1000, 7), Class.RELAX)
    assert not w.samples.flags.writeable


def test_dataset_helpers():
    ds = synth_dataset(SynthConfig(n_windows_per_class=2))
    assert ds.matrix().shape == (6, 1000)
    assert ds.class_counts() == {Class.RELAX: 2, Class.CLENCH: 2, Class.NOISE: 2}
    sub = ds.subset([0, 3])
    assert [w.label for w in sub.windows] == [Class.RELAX, Class.RELAX]
    with pytest.raises(ValueError, match="unlabeled"):
        Dataset([Window(np.zeros(1000, dtype=int))]).labels()


# ------------------------------------------------------------------ synthesis

def test_synth_counts():
    ds = synth_dataset(SynthConfig(n_windows_per_class=10, seed=1738))
    assert len(ds) == 30
    assert set(ds.class_counts().values()) == {10}


def test_synth_is_deterministic():
    a = synth_dataset(SynthConfig(n_windows_per_class=10))
    b = synth_dataset(SynthConfig(n_windows_per_class=10))
    assert dataset_to_csv(a).encode() == dataset_to_csv(b).encode()
    c = synth_dataset(SynthConfig(n_windows_per_class=10, seed=1739))
    assert not np.array_equal(a.matrix(), c.matrix())


def _class_means(ds):
    X, y = feature_matrix(ds), ds.labels()
    return {c: X[y == c].mean(axis=0) for c in Class}


def test_synth_default_feature_ordering(synth):
    m = _class_means(synth)
    assert m[Class.CLENCH][1] > 5 * m[Class.RELAX][1]
    assert m[Class.CLENCH][3] > m[Class.NOISE][3]


@pytest.mark.parametrize("seed", range(20))
def test_synth_feature_ordering_seed_sweep(seed):
    m = _class_means(synth_dataset(SynthConfig(n_windows_per_class=20, seed=seed)))
    assert m[Class.CLENCH][1] > 5 * m[Class.RELAX][1]
    assert m[Class.CLENCH][3] > m[Class.NOISE][3]


def test_synth_values_in_adc_range(synth):
    M = synth.matrix()
    assert M.min() >= 0 and M.max() <= 4095


@pytest.mark.parametrize("kwargs", [
    {"n_windows_per_class": 0}, {"relax_sigma": 0.0}, {"clench_sigma": -1.0},
    {"artifact_amp": 0.0}, {"baseline": 5000}, {"drift_amp": -1.0},
])
def test_synth_config_validation(kwargs):
    with pytest.raises(ValueError):
        SynthConfig(**kwargs)


def test_synth_session_layout():
    s = synth_session(SynthConfig(), n_cycles=2, phase_ms=2000)
    assert len(s) == 12000
    assert [int(s.labels[i]) for i in (0, 2000, 4000, 6000)] == [0, 1, 2, 0]
    assert len(segment_windows(s)) == 12
