"""Δt_min estimation and the ε < Δt_min safety condition."""

from __future__ import annotations

from collections import defaultdict
import math
from typing import TYPE_CHECKING

import numpy as np

from skewscope import constants
from skewscope.causality.models import DeltaTMinStats, SafetyVerdict, SpanRecord
from skewscope.causality.spans import edge_label, extract_spans
from skewscope.exceptions import BaselineIntegrityError
from skewscope.log import get_logger


if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from skewscope.causality.models import TraceEvent
    from skewscope.constants import Edge

logger = get_logger(__name__)


def nearest_rank(sorted_samples: Sequence[int], q: float) -> int:
    """Nearest-rank quantile (no interpolation) of ascending samples."""
    if not sorted_samples:
        msg = "Cannot take a quantile of an empty sample"
        raise ValueError(msg)
    rank = max(1, math.ceil(q * len(sorted_samples)))
    return sorted_samples[min(rank, len(sorted_samples)) - 1]


def estimate_delta_t_min(
    baseline_spans: Iterable[SpanRecord],
    quantiles: Sequence[float] = constants.DELTA_T_MIN_QUANTILES,
    edges: Sequence[Edge] | None = None,
) -> dict[Edge, DeltaTMinStats]:
    """Estimate the Δt_min distribution per edge from a zero-skew baseline.

    Args:
        baseline_spans: Spans of a run without injected skew
        quantiles: Quantiles to report
        edges: Edges that must be present (defaults to all edges seen)

    Raises:
        BaselineIntegrityError: On a negative span, or an edge without samples
    """
    by_edge: defaultdict[Edge, list[int]] = defaultdict(list)
    for span in baseline_spans:
        if span.is_violation:
            msg = (
                f"Negative span {span.span_ns} ns on {edge_label(span.edge)} "
                f"(request {span.request_id}): input is not a zero-skew baseline"
            )
            raise BaselineIntegrityError(msg)
        if span.span_ns > 0:
            by_edge[span.edge].append(span.span_ns)

    stats: dict[Edge, DeltaTMinStats] = {}
    for edge in edges if edges is not None else list(by_edge):
        samples = sorted(by_edge.get(edge, ()))
        if not samples:
            msg = f"No positive baseline samples on edge {edge_label(edge)}"
            raise BaselineIntegrityError(msg)
        stats[edge] = DeltaTMinStats(
            edge=edge,
            sample_count=len(samples),
            min_ns=samples[0],
            quantiles={q: nearest_rank(samples, q) for q in sorted(quantiles)},
            samples=tuple(samples),
        )
    return stats


def safety_predicate(epsilon: int, dtm: DeltaTMinStats) -> SafetyVerdict:
    """Apply ε < Δt_min (preserved) / ε ≥ Δt_min (may be violated)."""
    ordered = sorted(dtm.quantiles.items())
    safe_q = next((q for q, value in ordered if value > epsilon), None)
    return SafetyVerdict(
        epsilon_ns=epsilon,
        verdict="preserved" if epsilon < dtm.min_ns else "may_be_violated",
        min_ns=dtm.min_ns,
        safe_quantile=safe_q,
    )


def predict_violations(
    baseline: Iterable[TraceEvent] | Sequence[SpanRecord],
    epsilon: int,
    edge: Edge = constants.DOMINANT_EDGE,
) -> int:
    """Violations a step skew of `epsilon` at the edge's sender would cause.

    A step shifts every send stamp on the edge by the same constant, so a
    baseline span turns negative exactly when it is smaller than `epsilon`.
    """
    spans = _as_spans(baseline, edge)
    return sum(1 for span in spans if span.span_ns < epsilon)


def violation_curve(
    baseline_spans: Sequence[SpanRecord],
    epsilons: Sequence[int],
    edge: Edge = constants.DOMINANT_EDGE,
) -> list[tuple[int, float]]:
    """Expected violation fraction on `edge` for each clock error in `epsilons`."""
    values = [s.span_ns for s in baseline_spans if s.edge == edge]
    samples = np.sort(np.asarray(values, dtype=np.int64))
    if samples.size == 0:
        return [(eps, 0.0) for eps in epsilons]
    below = np.searchsorted(samples, np.asarray(epsilons, dtype=np.int64), side="left")
    return [(eps, float(n) / samples.size) for eps, n in zip(epsilons, below.tolist())]


def recommend_alert_threshold(
    dtm: DeltaTMinStats,
    quantile: float = constants.DELTA_T_MIN_QUANTILES[0],
    margin: float = 0.5,
) -> int:
    """Skew alert threshold placed conservatively below a low Δt_min quantile."""
    if not 0 < margin <= 1:
        msg = f"margin must be in (0, 1], got {margin}"
        raise ValueError(msg)
    if dtm.samples:
        reference = nearest_rank(dtm.samples, quantile)
    else:
        reference = dtm.quantiles.get(quantile, dtm.min_ns)
    return math.floor(reference * margin)


def onset_bracket(counts: Sequence[tuple[int, int]]) -> tuple[int | None, int | None]:
    """(largest skew without violations, smallest skew with violations)."""
    ordered = sorted(counts)
    clean = [skew for skew, n in ordered if n == 0]
    dirty = [skew for skew, n in ordered if n > 0]
    return (max(clean) if clean else None, min(dirty) if dirty else None)


def _as_spans(
    baseline: Iterable[TraceEvent] | Sequence[SpanRecord],
    edge: Edge,
) -> list[SpanRecord]:
    items = list(baseline)
    if items and isinstance(items[0], SpanRecord):
        return [s for s in items if s.edge == edge]  # type: ignore[union-attr]
    return extract_spans(items, edges=[edge]).spans  # type: ignore[arg-type]
