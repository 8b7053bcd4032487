"""Causal-trust audit of recorded traces (simulated or externally captured)."""

from __future__ import annotations

from dataclasses import dataclass
import hashlib
from typing import TYPE_CHECKING, Literal

from skewscope import constants
from skewscope.causality.bounds import estimate_delta_t_min, recommend_alert_threshold
from skewscope.causality.health import annotate_trust, evaluation_times, replay_health
from skewscope.causality.spans import (
    edge_label,
    extract_spans,
    violation_stats,
    violations_per_edge,
)
from skewscope.exceptions import ConfigError
from skewscope.experiments.report import ExperimentReport
from skewscope.log import get_logger
from skewscope.trace_io import encode_event, is_external


if TYPE_CHECKING:
    from collections.abc import Sequence

    from skewscope.causality.models import SpanRecord, TraceEvent
    from skewscope.trace_io import TraceFileHeader

logger = get_logger(__name__)

Verdict = Literal["preserved", "violated"]


@dataclass(frozen=True, slots=True)
class TraceAnalysis:
    report: ExperimentReport
    verdict: Verdict
    external: bool
    untrusted_spans: int

    @property
    def untrusted_share(self) -> float:
        total = self.report.total_spans
        return self.untrusted_spans / total if total else 0.0


def _ticks(spans: Sequence[SpanRecord], tick_ns: int) -> list[int]:
    if not spans:
        return []
    stamps = [span.recv_wall_ts_ns for span in spans]
    first, last = min(stamps), max(stamps)
    ticks = list(range(first + tick_ns, last, tick_ns))
    ticks.append(last)
    return ticks


def _trace_digest(events: Sequence[TraceEvent]) -> str:
    sha = hashlib.sha256()
    for event in events:
        sha.update(repr(sorted(encode_event(event).items())).encode())
    return sha.hexdigest()


def analyze_trace(
    header: TraceFileHeader,
    events: Sequence[TraceEvent],
    *,
    window_s: float = constants.DEFAULT_HEALTH_WINDOW_S,
    tick_s: float = constants.DEFAULT_METRIC_TICK_S,
) -> TraceAnalysis:
    """Detect negative spans and replay the health signal over a trace.

    Timing is read from wall stamps only, so recorded and simulated traces are
    audited the same way; health is evaluated on the receive wall stamps.
    Δt_min statistics are attached when the trace is free of violations.

    Raises:
        ConfigError: If the window or tick is not a positive duration
        TraceIntegrityError: If a receive has no matching send
    """
    window_ns = round(window_s * constants.NS_PER_S)
    tick_ns = round(tick_s * constants.NS_PER_S)
    for name, value in (("window", window_ns), ("tick", tick_ns)):
        if value <= 0:
            msg = f"Health {name} must be positive, got {value} ns"
            raise ConfigError(msg)
    extraction = extract_spans(events)
    spans = extraction.spans
    stats = violation_stats(spans)
    timeline = replay_health(evaluation_times(spans), _ticks(spans, tick_ns), window_ns)
    untrusted = sum(1 for _, trusted in annotate_trust(spans, window_ns) if not trusted)

    delta_t_min = None
    threshold = None
    if spans and not stats.negative_count:
        positive = [
            edge
            for edge in constants.EDGES
            if any(s.span_ns > 0 for s in extraction.on_edge(edge))
        ]
        if positive:
            estimated = estimate_delta_t_min(spans, edges=positive)
            delta_t_min = {edge_label(e): s for e, s in estimated.items()}
            if constants.DOMINANT_EDGE in estimated:
                threshold = recommend_alert_threshold(estimated[constants.DOMINANT_EDGE])

    digest = header.config_digest or _trace_digest(events)
    report = ExperimentReport(
        run_id=header.run_id or f"analysis-{digest[:12]}",
        kind="analysis",
        config_digest=digest,
        seed=0,
        total_spans=stats.total,
        in_flight=extraction.in_flight,
        negative_span_count=stats.negative_count,
        negative_spans_per_edge=violations_per_edge(spans),
        violation_rate=stats.violation_rate,
        health_timeline=timeline,
        delta_t_min_stats=delta_t_min,
        alert_threshold_ns=threshold,
    )
    verdict: Verdict = "violated" if stats.negative_count else "preserved"
    logger.info(
        "Analyzed %d events: %d/%d negative spans, verdict %s",
        len(events),
        stats.negative_count,
        stats.total,
        verdict,
    )
    return TraceAnalysis(report, verdict, is_external(header, events), untrusted)
