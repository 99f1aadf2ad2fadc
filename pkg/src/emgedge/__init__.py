"""Embedded EMG gesture classification toolkit.

Windowed ingestion of 12-bit single-lead recordings, statistical and mel
features, a ladder of from-scratch classifiers, evaluation utilities, and
export of the random forest to flat binary and branch-only C source.
"""
from .dataio import Class, Dataset, Sample, Session, SynthConfig, Window

__version__ = "0.1.0"

__all__ = ["Class", "Dataset", "Sample", "Session", "SynthConfig", "Window", "__version__"]
