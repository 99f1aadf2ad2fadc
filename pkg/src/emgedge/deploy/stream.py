"""Sliding-window replay with majority-vote smoothing of the predictions."""
from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field

import numpy as np

from ..dataio import SAMPLE_RATE_HZ, WINDOW_SIZE, Class, Session
from ..features import feature_matrix


@dataclass
class SmootherState:
    """Trailing buffer of the last ``k`` raw predictions.

    The output is the buffer's strict majority label. When two or more
    labels tie for the top count, the previous output is kept; before any
    output exists a tie resolves to the smallest class code.
    """

    k: int
    buffer: deque = field(init=False)
    output: Class | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("smoothing horizon must be at least one prediction")
        self.buffer = deque(maxlen=self.k)

    def reset(self) -> None:
        self.buffer.clear()
        self.output = None


def smooth_step(s: SmootherState, p) -> Class:
    s.buffer.append(Class(int(p)))
    counts = Counter(s.buffer)
    top = max(counts.values())
    leaders = sorted(c for c, n in counts.items() if n == top)
    if len(leaders) == 1:
        s.output = leaders[0]
    elif s.output is None:
        s.output = leaders[0]
    return s.output


def smooth(predictions, k: int) -> list[Class]:
    s = SmootherState(k)
    return [smooth_step(s, p) for p in predictions]


def transitions(labels) -> int:
    labels = np.asarray([int(v) for v in labels])
    return int(np.count_nonzero(labels[1:] != labels[:-1])) if len(labels) else 0


@dataclass(frozen=True)
class StreamStep:
    t_ms: int
    raw: Class
    smoothed: Class


def horizon_to_k(stride_ms: int, horizon_ms: int) -> int:
    if stride_ms < 1 or horizon_ms < stride_ms:
        raise ValueError("need 1 <= stride_ms <= horizon_ms")
    if horizon_ms % stride_ms:
        raise ValueError("horizon_ms must be a whole number of strides")
    return horizon_ms // stride_ms


def run_stream(samples, model, stride_ms: int = 100, horizon_ms: int = 500,
               sample_rate: int = SAMPLE_RATE_HZ) -> list[StreamStep]:
    """Classify every 1000-sample window advanced by ``stride_ms`` and smooth.

    ``samples`` is a :class:`Session` or a 1-D array of ADC counts (then
    timestamps are sample indices in ms). ``model.predict`` receives feature
    rows. Each step is stamped with the time of the window's last sample.
    """
    if isinstance(samples, Session):
        adc, t_ms = samples.adc, samples.t_ms
    else:
        adc = np.asarray(samples)
        t_ms = np.arange(len(adc), dtype=np.int64) * 1000 // sample_rate
    if sample_rate * stride_ms % 1000:
        raise ValueError("stride must be a whole number of samples")
    stride = sample_rate * stride_ms // 1000
    if sample_rate % stride:
        raise ValueError("stride must divide the sample rate evenly")
    k = horizon_to_k(stride_ms, horizon_ms)
    if len(adc) < WINDOW_SIZE:
        raise ValueError(f"stream has {len(adc)} samples, shorter than one {WINDOW_SIZE}-sample window")

    windows = np.lib.stride_tricks.sliding_window_view(np.asarray(adc, dtype=np.float64), WINDOW_SIZE)[::stride]
    raw = np.asarray(model.predict(feature_matrix(windows)), dtype=np.int64)
    state = SmootherState(k)
    steps = []
    for i, p in enumerate(raw):
        end = i * stride + WINDOW_SIZE - 1
        steps.append(StreamStep(int(t_ms[end]), Class(int(p)), smooth_step(state, p)))
    return steps


def trace_csv(steps) -> str:
    lines = ["t_ms,raw,smoothed"]
    lines += [f"{s.t_ms},{s.raw.name},{s.smoothed.name}" for s in steps]
    return "\n".join(lines) + "\n"
