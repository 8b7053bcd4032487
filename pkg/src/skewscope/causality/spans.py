"""Negative-span detection across causal edges."""

from __future__ import annotations

from collections import Counter
from typing import TYPE_CHECKING

from skewscope import constants
from skewscope.causality.models import SpanExtraction, SpanRecord, ViolationStats
from skewscope.exceptions import TraceIntegrityError
from skewscope.log import get_logger


if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from skewscope.causality.models import TraceEvent
    from skewscope.constants import Edge

logger = get_logger(__name__)


def _make_span(edge: Edge, send: TraceEvent, recv: TraceEvent) -> SpanRecord:
    return SpanRecord(
        edge=edge,
        request_id=recv.request_id,
        span_ns=recv.wall_ts_ns - send.wall_ts_ns,
        send_event_id=send.event_id,
        recv_event_id=recv.event_id,
        recv_wall_ts_ns=recv.wall_ts_ns,
        recv_true_ts_ns=recv.true_ts_ns,
    )


def extract_spans(
    trace: Iterable[TraceEvent],
    edges: Sequence[Edge] = constants.EDGES,
) -> SpanExtraction:
    """Pair every send with its downstream receive on the configured edges.

    Spans are computed from wall stamps only. Spans are grouped by edge (in
    `edges` order) and ordered by receive emission within an edge.

    Raises:
        TraceIntegrityError: If a receive has no matching upstream send
    """
    upstream_of = {down: up for up, down in edges}
    sends: dict[tuple[str, str], TraceEvent] = {}
    recvs: list[TraceEvent] = []
    for event in trace:
        if event.kind == "send":
            sends[(event.stage_id, event.request_id)] = event
        elif event.kind == "recv" and event.stage_id in upstream_of:
            recvs.append(event)

    per_edge: dict[Edge, list[SpanRecord]] = {edge: [] for edge in edges}
    matched: set[tuple[str, str]] = set()
    orphans: list[str] = []
    for recv in recvs:
        up = upstream_of[recv.stage_id]
        key = (up, recv.request_id)
        if (send := sends.get(key)) is None:
            orphans.append(recv.event_id)
            continue
        matched.add(key)
        edge = (up, recv.stage_id)
        per_edge[edge].append(_make_span(edge, send, recv))
    if orphans:
        msg = "Receive events without a matching send"
        raise TraceIntegrityError(msg, event_ids=orphans)

    downstream_of = dict(edges)
    in_flight = sum(
        1 for key in sends if key[0] in downstream_of and key not in matched
    )
    if in_flight:
        logger.debug("%d sends still in flight, excluded from spans", in_flight)
    spans = [span for edge in edges for span in per_edge[edge]]
    return SpanExtraction(spans=spans, in_flight=in_flight)


def spans_from_stamps(stamps: Sequence[TraceEvent]) -> list[SpanRecord]:
    """Span check over the stamps carried by a single message.

    Every send stamp is paired with the next receive stamp on its path.
    """
    spans: list[SpanRecord] = []
    pending: TraceEvent | None = None
    for stamp in stamps:
        if stamp.kind == "send":
            pending = stamp
        elif stamp.kind == "recv" and pending is not None:
            spans.append(_make_span((pending.stage_id, stamp.stage_id), pending, stamp))
            pending = None
    return spans


def violation_stats(spans: Iterable[SpanRecord]) -> ViolationStats:
    """Count negative spans and compute the violation rate."""
    total = negative = 0
    for span in spans:
        total += 1
        negative += span.is_violation
    rate = negative / total if total else 0.0
    return ViolationStats(negative_count=negative, total=total, violation_rate=rate)


def violations_per_edge(
    spans: Iterable[SpanRecord],
    edges: Sequence[Edge] = constants.EDGES,
) -> dict[str, int]:
    """Negative-span counts keyed by "up->down", zero for clean edges."""
    counts = Counter(span.edge for span in spans if span.is_violation)
    return {edge_label(edge): counts.get(edge, 0) for edge in edges}


def edge_label(edge: Edge) -> str:
    return f"{edge[0]}->{edge[1]}"
