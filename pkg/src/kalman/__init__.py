"""Exact Kalman filtering and smoothing."""

from .filter import (
    FilterTrace,
    as_system,
    dump_trace_csv,
    kalman_filter,
    kf_correct,
    kf_predict,
    observed_nll,
)
from .smoother import SmootherTrace, kalman_smoother

__all__ = [
    "FilterTrace",
    "SmootherTrace",
    "as_system",
    "dump_trace_csv",
    "kalman_filter",
    "kalman_smoother",
    "kf_correct",
    "kf_predict",
    "observed_nll",
]
