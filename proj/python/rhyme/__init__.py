"""Geometry-aware spoofed-speech detection over pre-extracted embeddings."""

import json as _json

from ._rhyme import (
    ConfigError,
    FormatError,
    IoError,
    ManifestError,
    Model,
    NumericError,
    ShapeError,
    compute_eer,
    expected_calibration_error,
    manifold,
    read_embedding,
    run_cli,
    write_embedding,
)

__all__ = [
    "ConfigError",
    "FormatError",
    "IoError",
    "ManifestError",
    "Model",
    "NumericError",
    "ShapeError",
    "compute_eer",
    "expected_calibration_error",
    "manifold",
    "model_config",
    "read_embedding",
    "run_cli",
    "write_embedding",
]


def model_config(model):
    """Model hyperparameters as a dict."""
    return _json.loads(model.config_json)
