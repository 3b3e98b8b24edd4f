"""Simulator for multi-adapter LLM serving: LSTM demand prediction,
threshold-gated prefetching, and paged adapter memory, with reactive and
block-allocator baselines.

The heavy lifting lives in the compiled `_core` extension; this package adds
small conveniences for driving runs from Python.
"""

import json

from lorasim._core import (  # noqa: F401
    AllocStatus,
    BlockArena,
    ConfigError,
    FragmentationReport,
    LoraDims,
    OnlinePredictor,
    PagePool,
    ParseError,
    PredictorModel,
    Request,
    ValidationError,
    adapter_size_bytes,
    compare,
    cross_entropy,
    eviction_score,
    generate_synthetic,
    ingest_trace,
    param_count,
    run_simulation,
)

__all__ = [
    "AllocStatus",
    "BlockArena",
    "ConfigError",
    "FragmentationReport",
    "LoraDims",
    "OnlinePredictor",
    "PagePool",
    "ParseError",
    "PredictorModel",
    "Request",
    "ValidationError",
    "adapter_size_bytes",
    "compare",
    "cross_entropy",
    "eviction_score",
    "generate_synthetic",
    "ingest_trace",
    "param_count",
    "run",
    "run_simulation",
]

__version__ = "0.1.0"


def run(config_path, overrides=None, out_dir=""):
    """Run one simulation and return the metrics report as a dict.

    `overrides` maps dotted keys to values, e.g. {"policy.mode": "oracle"}.
    """
    pairs = [(k, str(v)) for k, v in (overrides or {}).items()]
    return json.loads(run_simulation(config_path, pairs, out_dir))


def compare_cells(config_path, matrix="ablation", overrides=None):
    """Run a comparison matrix and return {cell_name: metrics_dict}."""
    pairs = [(k, str(v)) for k, v in (overrides or {}).items()]
    return json.loads(compare(config_path, matrix, pairs))
