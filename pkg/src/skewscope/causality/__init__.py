"""Causal-edge analyses over timestamped traces."""

from __future__ import annotations

from skewscope.causality.bounds import (
    estimate_delta_t_min,
    predict_violations,
    recommend_alert_threshold,
    safety_predicate,
    violation_curve,
)
from skewscope.causality.health import annotate_trust, replay_health, update_health
from skewscope.causality.models import (
    DeltaTMinStats,
    HealthState,
    SafetyVerdict,
    SpanExtraction,
    SpanRecord,
    TraceEvent,
    ViolationStats,
)
from skewscope.causality.spans import extract_spans, violation_stats

__all__ = [
    "DeltaTMinStats",
    "HealthState",
    "SafetyVerdict",
    "SpanExtraction",
    "SpanRecord",
    "TraceEvent",
    "ViolationStats",
    "annotate_trust",
    "estimate_delta_t_min",
    "extract_spans",
    "predict_violations",
    "recommend_alert_threshold",
    "replay_health",
    "safety_predicate",
    "update_health",
    "violation_curve",
    "violation_stats",
]
