"""Forest export (flat binary, C source) and streaming inference."""
from .codegen import CodegenOutput, DecisionSource, codegen, interpret
from .flat import FlatFormatError, FlatModel, flat_predict, flat_predict_batch, flatten
from .stream import (SmootherState, StreamStep, horizon_to_k, run_stream, smooth, smooth_step,
                     trace_csv, transitions)

__all__ = [
    "CodegenOutput", "DecisionSource", "FlatFormatError", "FlatModel", "SmootherState", "StreamStep",
    "codegen", "flat_predict", "flat_predict_batch", "flatten", "horizon_to_k", "interpret",
    "run_stream", "smooth", "smooth_step", "trace_csv", "transitions",
]
