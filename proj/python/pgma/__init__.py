"""Python access to the pgma detector core."""

import json as _json

from . import _core
from ._core import (
    ConfigError,
    DataError,
    NumericError,
    PgmaError,
    aggregate_and_smooth,
    amplitude_spectrum,
    assign_slot,
    cosine_similarity,
    detect_period,
    evaluate,
    generate_synthetic,
    read_csv,
    topk_adjacency,
)


def default_config():
    return _json.loads(_core.default_config())


def train(train_csv, checkpoint, config=None):
    """Train on a CSV and write a checkpoint. Returns the training report."""
    text = _core.train(str(train_csv), str(checkpoint), _json.dumps(config) if config else "")
    return _json.loads(text)


def score(test_csv, checkpoint, config=None):
    """Score a CSV with a checkpoint. Metrics are None for unlabeled data."""
    return _core.score(str(test_csv), str(checkpoint), _json.dumps(config) if config else "")


__all__ = [
    "ConfigError",
    "DataError",
    "NumericError",
    "PgmaError",
    "aggregate_and_smooth",
    "amplitude_spectrum",
    "assign_slot",
    "cosine_similarity",
    "default_config",
    "detect_period",
    "evaluate",
    "generate_synthetic",
    "read_csv",
    "score",
    "topk_adjacency",
    "train",
]
