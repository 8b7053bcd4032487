"""skewscope: main package.

Deterministic simulation of clock skew and its effect on causal ordering in
multi-stage inference pipelines.
"""

from __future__ import annotations

from importlib.metadata import version

__version__ = version("skewscope")
__title__ = "skewscope"

__license__ = "MIT"

from skewscope.causality import (
    estimate_delta_t_min,
    extract_spans,
    predict_violations,
    safety_predicate,
    update_health,
)
from skewscope.clocks import ClockModel, SkewProfile, read_clock
from skewscope.experiments import ExperimentConfig, load_config, simulate

__all__ = [
    "ClockModel",
    "ExperimentConfig",
    "SkewProfile",
    "__version__",
    "estimate_delta_t_min",
    "extract_spans",
    "load_config",
    "predict_violations",
    "read_clock",
    "safety_predicate",
    "simulate",
    "update_health",
]
