"""Statistical window features, standardization and mel spectrograms."""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .dataio import SAMPLE_RATE_HZ, Class, Window

FEATURE_NAMES = ("mav", "sd", "max", "zcr")
N_FEATURES = len(FEATURE_NAMES)

N_FFT = 256
HOP = 16
N_MELS = 64
POWER_FLOOR = 1e-10
DB_FLOOR = 10.0 * np.log10(POWER_FLOOR)


@dataclass(frozen=True)
class FeatureVector:
    mav: float
    sd: float
    max_amp: float
    zcr: int

    def as_array(self) -> np.ndarray:
        return np.array([self.mav, self.sd, self.max_amp, float(self.zcr)])


def _samples(w) -> np.ndarray:
    return np.asarray(w.samples if isinstance(w, Window) else w, dtype=np.float64)


def zero_crossings(centered: np.ndarray) -> int:
    """Strict sign changes, exact zeros skipped."""
    s = np.sign(centered)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def stat_features_array(x: np.ndarray) -> np.ndarray:
    """MAV, SD, MAX and ZCR of one raw window as a length-4 float array."""
    x = np.asarray(x, dtype=np.float64)
    c = x - x.mean()
    a = np.abs(c)
    return np.array([a.mean(), c.std(ddof=1), a.max(), zero_crossings(c)], dtype=np.float64)


def extract_stat_features(w: Window | np.ndarray) -> FeatureVector:
    mav, sd, mx, zcr = stat_features_array(_samples(w))
    return FeatureVector(float(mav), float(sd), float(mx), int(zcr))


def feature_matrix(windows) -> np.ndarray:
    """Vectorized features for an (n, N) array, a Dataset, or a list of windows."""
    if hasattr(windows, "matrix"):
        windows = windows.matrix()
    elif isinstance(windows, (list, tuple)):
        windows = np.stack([_samples(w) for w in windows]) if windows else np.zeros((0, 1000))
    x = np.asarray(windows, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected a 2-D array of windows")
    if x.shape[1] < 2:
        raise ValueError("windows need at least two samples")
    c = x - x.mean(axis=1, keepdims=True)
    a = np.abs(c)
    s = np.sign(c)
    zcr = np.empty(len(x))
    for i, row in enumerate(s):
        nz = row[row != 0]
        zcr[i] = np.count_nonzero(nz[1:] != nz[:-1])
    return np.column_stack([a.mean(axis=1), c.std(axis=1, ddof=1), a.max(axis=1), zcr])


def feature_table_csv(X: np.ndarray, y=None) -> str:
    """``mav,sd,max,zcr,label`` rows; label column left empty when unknown."""
    buf = io.StringIO()
    buf.write("mav,sd,max,zcr,label\n")
    for i, row in enumerate(np.asarray(X, dtype=np.float64).tolist()):
        label = "" if y is None else Class(int(y[i])).name
        buf.write(f"{row[0]!r},{row[1]!r},{row[2]!r},{int(row[3])},{label}\n")
    return buf.getvalue()


# ---------------------------------------------------------------- standardizer

@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    def apply(self, v) -> np.ndarray:
        return (np.asarray(v, dtype=np.float64) - self.mean) / self.scale


def fit_standardizer(X) -> Standardizer:
    """Column mean and population std; constant columns keep scale 1."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if len(X) == 0:
        raise ValueError("cannot fit a standardizer on empty input")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return Standardizer(mean, scale)


def apply(s: Standardizer, v) -> np.ndarray:
    return s.apply(v)


# ------------------------------------------------------------- time-frequency

def hann(n: int = N_FFT) -> np.ndarray:
    """Periodic Hann window (DFT-even)."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def frames(w, n_fft: int = N_FFT, hop: int = HOP) -> np.ndarray:
    """Mean-centered, Hann-weighted frames, shape (n_frames, n_fft), no padding."""
    x = _samples(w)
    x = x - x.mean()
    if len(x) < n_fft:
        raise ValueError("signal shorter than one FFT frame")
    fr = np.lib.stride_tricks.sliding_window_view(x, n_fft)[::hop]
    return fr * hann(n_fft)


def stft_power(w, n_fft: int = N_FFT, hop: int = HOP) -> np.ndarray:
    """One-sided power |X|^2, shape (n_fft // 2 + 1, n_frames)."""
    spec = np.fft.rfft(frames(w, n_fft, hop), axis=1)
    return (spec.real ** 2 + spec.imag ** 2).T


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_center_frequencies(n_mels: int = N_MELS, sample_rate: int = SAMPLE_RATE_HZ) -> np.ndarray:
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_mels + 2))
    return edges[1:-1]


def mel_filterbank(n_mels: int = N_MELS, n_fft: int = N_FFT,
                   sample_rate: int = SAMPLE_RATE_HZ) -> np.ndarray:
    """Unnormalized triangular filters with mel-spaced edges from 0 Hz to Nyquist."""
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_mels + 2))
    bins = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
    fb = np.zeros((n_mels, len(bins)))
    for m in range(n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (bins - lo) / (mid - lo)
        falling = (hi - bins) / (hi - mid)
        fb[m] = np.maximum(0.0, np.minimum(rising, falling))
    return fb


_FILTERBANK = mel_filterbank()
_FILTERBANK.flags.writeable = False


@dataclass(frozen=True)
class MelSpectrogram:
    values: np.ndarray
    n_fft: int = N_FFT
    hop: int = HOP
    n_mels: int = N_MELS
    sample_rate: int = SAMPLE_RATE_HZ

    def to_csv(self) -> str:
        return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in self.values)

    def to_pgm(self) -> bytes:
        """Binary 8-bit graymap, low mel bands at the bottom row."""
        v = self.values[::-1]
        lo, hi = float(v.min()), float(v.max())
        span = hi - lo if hi > lo else 1.0
        img = np.rint((v - lo) / span * 255.0).astype(np.uint8)
        header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
        return header + img.tobytes()


def power_to_db(p) -> np.ndarray:
    return 10.0 * np.log10(np.maximum(p, POWER_FLOOR))


def mel_spectrogram(w) -> MelSpectrogram:
    return MelSpectrogram(power_to_db(_FILTERBANK @ stft_power(w)))
