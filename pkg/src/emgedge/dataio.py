"""Session CSV parsing, window segmentation and the synthetic EMG generator.

Recorded sessions use one row per sample::

    timestamp_ms,adc,label
    0,2048,RELAX
    1,2051,RELAX

All randomness goes through ``numpy.random.Generator`` seeded with the PCG64
bit generator (PCG-XSL-RR 128/64), so a seed pins the output on every
platform numpy supports.
"""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

SAMPLE_RATE_HZ = 1000
WINDOW_SIZE = 1000
ADC_MIN = 0
ADC_MAX = 4095
CSV_HEADER = ("timestamp_ms", "adc", "label")


class Class(enum.IntEnum):
    RELAX = 0
    CLENCH = 1
    NOISE = 2


N_CLASSES = len(Class)


class SessionFormatError(ValueError):
    """Raised for malformed session CSV input. ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Sample:
    t_ms: int
    adc: int
    label: Class | None = None


@dataclass
class Session:
    """Columnar sample stream; ``labels`` may be None for unlabeled replays."""

    t_ms: np.ndarray
    adc: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.t_ms = np.asarray(self.t_ms, dtype=np.int64)
        self.adc = np.asarray(self.adc, dtype=np.int64)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != self.adc.shape:
                raise ValueError("labels and adc lengths differ")
        if self.t_ms.shape != self.adc.shape:
            raise ValueError("t_ms and adc lengths differ")

    def __len__(self) -> int:
        return len(self.adc)

    def __iter__(self) -> Iterator[Sample]:
        for i in range(len(self)):
            label = None if self.labels is None else Class(int(self.labels[i]))
            yield Sample(int(self.t_ms[i]), int(self.adc[i]), label)

    @classmethod
    def from_samples(cls, samples: Sequence[Sample]) -> "Session":
        t = [s.t_ms for s in samples]
        adc = [s.adc for s in samples]
        if all(s.label is not None for s in samples):
            labels = [int(s.label) for s in samples]
        else:
            labels = None
        return cls(np.array(t, dtype=np.int64), np.array(adc, dtype=np.int64),
                   None if labels is None else np.array(labels, dtype=np.int64))


@dataclass(frozen=True)
class Window:
    samples: np.ndarray
    label: Class | None = None

    def __post_init__(self):
        arr = np.asarray(self.samples)
        if arr.shape != (WINDOW_SIZE,):
            raise ValueError(f"window must hold exactly {WINDOW_SIZE} samples, got shape {arr.shape}")
        if arr.min() < ADC_MIN or arr.max() > ADC_MAX:
            raise ValueError("window samples outside the 12-bit ADC range")
        arr = arr.astype(np.int16)
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)


@dataclass
class Dataset:
    windows: list[Window]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.meta.setdefault("sample_rate_hz", SAMPLE_RATE_HZ)

    def __len__(self) -> int:
        return len(self.windows)

    def matrix(self) -> np.ndarray:
        """(n, 1000) int array of window samples."""
        if not self.windows:
            return np.zeros((0, WINDOW_SIZE), dtype=np.int16)
        return np.stack([w.samples for w in self.windows])

    def labels(self) -> np.ndarray:
        if any(w.label is None for w in self.windows):
            raise ValueError("dataset contains unlabeled windows")
        return np.array([int(w.label) for w in self.windows], dtype=np.int64)

    def class_counts(self) -> dict[Class, int]:
        y = self.labels()
        return {c: int(np.sum(y == c)) for c in Class}

    def subset(self, indices) -> "Dataset":
        return Dataset([self.windows[int(i)] for i in indices], dict(self.meta))


# --------------------------------------------------------------------- CSV I/O

def _parse_label(text: str, line: int) -> Class:
    try:
        return Class[text.strip().upper()]
    except KeyError:
        raise SessionFormatError(f"unknown label {text!r}", line) from None


def parse_session_csv(text: str | io.TextIOBase) -> Session:
    """Parse a ``timestamp_ms,adc,label`` session into a :class:`Session`.

    Rows are validated as they are read; the first offending row raises
    :class:`SessionFormatError` carrying its line number.
    """
    if isinstance(text, str):
        text = io.StringIO(text, newline="")
    reader = csv.reader(text)
    try:
        header = next(reader)
    except StopIteration:
        raise SessionFormatError("empty input", 1) from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise SessionFormatError(f"expected header {','.join(CSV_HEADER)!r}, got {','.join(header)!r}", 1)

    t_out: list[int] = []
    adc_out: list[int] = []
    lab_out: list[int] = []
    prev_t = -1
    for row in reader:
        line = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise SessionFormatError(f"malformed row: expected 3 fields, got {len(row)}", line)
        try:
            t = int(row[0])
            adc = int(row[1])
        except ValueError:
            raise SessionFormatError(f"malformed row {','.join(row)!r}", line) from None
        if t < 0:
            raise SessionFormatError("negative timestamp", line)
        if t <= prev_t:
            raise SessionFormatError(f"non-monotonic timestamp {t} after {prev_t}", line)
        if not ADC_MIN <= adc <= ADC_MAX:
            raise SessionFormatError(f"adc out of range: {adc}", line)
        lab_out.append(int(_parse_label(row[2], line)))
        t_out.append(t)
        adc_out.append(adc)
        prev_t = t
    return Session(np.array(t_out, dtype=np.int64), np.array(adc_out, dtype=np.int64),
                   np.array(lab_out, dtype=np.int64))


def session_to_csv(session: Session) -> str:
    if session.labels is None:
        raise ValueError("session export requires labels")
    buf = io.StringIO()
    buf.write(",".join(CSV_HEADER) + "\n")
    names = [c.name for c in Class]
    for t, a, lab in zip(session.t_ms.tolist(), session.adc.tolist(), session.labels.tolist()):
        buf.write(f"{t},{a},{names[lab]}\n")
    return buf.getvalue()


def dataset_to_session(ds: Dataset) -> Session:
    """Concatenate windows into one contiguous 1 kHz stream starting at t=0."""
    adc = ds.matrix().reshape(-1).astype(np.int64)
    labels = np.repeat(ds.labels(), WINDOW_SIZE)
    return Session(np.arange(len(adc), dtype=np.int64), adc, labels)


def dataset_to_csv(ds: Dataset) -> str:
    return session_to_csv(dataset_to_session(ds))


# ---------------------------------------------------------------- segmentation

def label_runs(labels: np.ndarray) -> list[tuple[int, int]]:
    """Maximal constant-label runs as half-open ``(start, stop)`` pairs."""
    labels = np.asarray(labels)
    if len(labels) == 0:
        return []
    change = np.flatnonzero(labels[1:] != labels[:-1]) + 1
    starts = np.concatenate(([0], change))
    stops = np.concatenate((change, [len(labels)]))
    return list(zip(starts.tolist(), stops.tolist()))


def segment_windows(session: Session | Sequence[Sample], source: str = "") -> Dataset:
    """Cut a labeled stream into pure, disjoint 1000-sample windows.

    Each maximal run of one label is chunked from its first sample; the
    remainder of a run shorter than a window is discarded, so no window
    ever straddles a label change.
    """
    if not isinstance(session, Session):
        session = Session.from_samples(list(session))
    if session.labels is None:
        raise ValueError("segmentation requires labeled samples")
    if len(session) < WINDOW_SIZE:
        raise ValueError(f"input has {len(session)} samples, need at least {WINDOW_SIZE}")
    windows = []
    for start, stop in label_runs(session.labels):
        label = Class(int(session.labels[start]))
        for k in range((stop - start) // WINDOW_SIZE):
            lo = start + k * WINDOW_SIZE
            windows.append(Window(session.adc[lo:lo + WINDOW_SIZE], label))
    return Dataset(windows, {"source": source, "sample_rate_hz": SAMPLE_RATE_HZ})


# ------------------------------------------------------------------- synthesis

@dataclass(frozen=True)
class SynthConfig:
    """Shape of the synthetic three-class generator.

    RELAX is baseline plus white noise and a slow drift; CLENCH adds
    20-150 Hz band-limited noise; NOISE adds 1-10 Hz sinusoids and sparse
    spikes. Amplitudes are in ADC counts.
    """

    n_windows_per_class: int = 100
    seed: int = 1738
    baseline: int = 2048
    relax_sigma: float = 15.0
    clench_sigma: float = 250.0
    artifact_amp: float = 300.0
    drift_amp: float = 20.0

    def __post_init__(self):
        if int(self.n_windows_per_class) < 1:
            raise ValueError("n_windows_per_class must be positive")
        if not ADC_MIN <= self.baseline <= ADC_MAX:
            raise ValueError("baseline must lie inside the ADC range")
        for name in ("relax_sigma", "clench_sigma", "artifact_amp"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.drift_amp < 0:
            raise ValueError("drift_amp must be non-negative")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def _background(rng: np.random.Generator, n: int, cfg: SynthConfig) -> np.ndarray:
    t = np.arange(n) / SAMPLE_RATE_HZ
    drift_f = rng.uniform(0.1, 0.5)
    drift_phase = rng.uniform(0.0, 2 * np.pi)
    x = cfg.baseline + rng.normal(0.0, cfg.relax_sigma, n)
    return x + cfg.drift_amp * np.sin(2 * np.pi * drift_f * t + drift_phase)


def _band_noise(rng: np.random.Generator, n: int, lo_hz: float, hi_hz: float) -> np.ndarray:
    spec = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, d=1.0 / SAMPLE_RATE_HZ)
    spec[(freqs < lo_hz) | (freqs > hi_hz)] = 0.0
    x = np.fft.irfft(spec, n)
    return x / x.std()


def _artifact(rng: np.random.Generator, n: int, cfg: SynthConfig) -> np.ndarray:
    t = np.arange(n) / SAMPLE_RATE_HZ
    x = np.zeros(n)
    for _ in range(int(rng.integers(2, 5))):
        f = rng.uniform(1.0, 10.0)
        phase = rng.uniform(0.0, 2 * np.pi)
        x += cfg.artifact_amp * rng.uniform(0.5, 1.0) * np.sin(2 * np.pi * f * t + phase)
    # sparse triangular spikes, e.g. cable knocks
    for _ in range(int(rng.poisson(2.0 * n / SAMPLE_RATE_HZ))):
        width = int(rng.integers(5, 21))
        pos = int(rng.integers(0, max(n - width, 1)))
        height = cfg.artifact_amp * rng.uniform(1.0, 2.0) * rng.choice((-1.0, 1.0))
        x[pos:pos + width] += height * (1.0 - np.abs(np.linspace(-1.0, 1.0, width)))
    return x


def synth_segment(rng: np.random.Generator, label: Class, n: int, cfg: SynthConfig) -> np.ndarray:
    """Generate ``n`` samples of one class as clipped integer ADC counts."""
    x = _background(rng, n, cfg)
    if label == Class.CLENCH:
        x = x + cfg.clench_sigma * _band_noise(rng, n, 20.0, 150.0)
    elif label == Class.NOISE:
        x = x + _artifact(rng, n, cfg)
    return np.clip(np.rint(x), ADC_MIN, ADC_MAX).astype(np.int64)


def synth_dataset(cfg: SynthConfig) -> Dataset:
    """Balanced dataset; windows are interleaved RELAX, CLENCH, NOISE, RELAX, ..."""
    rng = make_rng(cfg.seed)
    windows = []
    for _ in range(cfg.n_windows_per_class):
        for label in Class:
            windows.append(Window(synth_segment(rng, label, WINDOW_SIZE, cfg), label))
    return Dataset(windows, {"source": f"synthetic seed={cfg.seed}", "sample_rate_hz": SAMPLE_RATE_HZ})


def synth_session(cfg: SynthConfig, n_cycles: int = 1, phase_ms: int = 5000,
                  order: Sequence[Class] = (Class.RELAX, Class.CLENCH, Class.NOISE)) -> Session:
    """Continuous labeled stream following the recording protocol: repeated
    cycles of fixed-length phases (default 5 s each of RELAX, CLENCH, NOISE)."""
    if n_cycles < 1 or phase_ms < 1:
        raise ValueError("n_cycles and phase_ms must be positive")
    rng = make_rng(cfg.seed)
    adc, labels = [], []
    for _ in range(n_cycles):
        for label in order:
            adc.append(synth_segment(rng, Class(label), phase_ms, cfg))
            labels.append(np.full(phase_ms, int(label), dtype=np.int64))
    adc_all = np.concatenate(adc)
    return Session(np.arange(len(adc_all), dtype=np.int64), adc_all, np.concatenate(labels))
