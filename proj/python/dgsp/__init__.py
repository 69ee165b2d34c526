"""Temporal graph similarity prediction: Python front end over the C++ core."""

import json

from ._dgsp import (
    AdapterError,
    Checkpoint,
    ConfigError,
    ContractError,
    DimensionError,
    Error,
    ParseError,
    PreparedSet,
    Signal,
    TrainingError,
    __version__,
    compute_metrics,
    convert,
    kfold_split,
    load_canonical,
    load_checkpoint,
    load_prepared,
    normalized_adjacency,
    predict,
    prepare,
    run_cli,
    score_stream,
    signal_from_json,
    surrogate_raw,
    train,
    tsr_baseline,
    write_canonical,
)
from . import _dgsp


def cross_validate(prepared, **kwargs):
    """K-fold train and evaluate; returns the metrics report as a dict."""
    return json.loads(_dgsp.cross_validate_json(prepared, **kwargs))


def baseline(prepared, method, **kwargs):
    """Random or tsr baseline report over the same fold split as training."""
    return json.loads(_dgsp.baseline_json(prepared, method, **kwargs))


def detect(scores, **kwargs):
    """Alarm events for a score series as a list of dicts."""
    return json.loads(_dgsp.detect_json(list(scores), **kwargs))


__all__ = [
    "AdapterError",
    "Checkpoint",
    "ConfigError",
    "ContractError",
    "DimensionError",
    "Error",
    "ParseError",
    "PreparedSet",
    "Signal",
    "TrainingError",
    "__version__",
    "baseline",
    "compute_metrics",
    "convert",
    "cross_validate",
    "detect",
    "kfold_split",
    "load_canonical",
    "load_checkpoint",
    "load_prepared",
    "normalized_adjacency",
    "predict",
    "prepare",
    "run_cli",
    "score_stream",
    "signal_from_json",
    "surrogate_raw",
    "train",
    "tsr_baseline",
    "write_canonical",
]
