"""Records shared by the simulator, the trace codec and the analyses."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

from skewscope.constants import Edge  # noqa: TC001
from skewscope.schema import BaseSchema


EventKind = Literal["send", "recv", "service_start", "service_end"]
EVENT_KINDS: frozenset[str] = frozenset({"send", "recv", "service_start", "service_end"})


@dataclass(frozen=True, slots=True)
class TraceEvent:
    """One timestamped occurrence at a stage."""

    event_id: str
    request_id: str
    stage_id: str
    kind: EventKind
    wall_ts_ns: int
    """Stamped by the owning stage's clock."""
    true_ts_ns: int | None
    """Simulator ground truth, None for externally captured traces."""
    seq: int
    """Per-stage emission counter."""


@dataclass(frozen=True, slots=True)
class SpanRecord:
    """Signed observed span across a causal edge for one request."""

    edge: Edge
    request_id: str
    span_ns: int
    send_event_id: str
    recv_event_id: str
    recv_wall_ts_ns: int
    recv_true_ts_ns: int | None = None

    @property
    def is_violation(self) -> bool:
        # Strictly negative: equal stamps do not imply a reversal.
        return self.span_ns < 0


@dataclass(frozen=True, slots=True)
class SpanExtraction:
    """Result of matching sends to receives over a trace."""

    spans: list[SpanRecord] = field(default_factory=list)
    in_flight: int = 0
    """Sends without a matching receive, excluded from all totals."""

    def on_edge(self, edge: Edge) -> list[SpanRecord]:
        return [s for s in self.spans if s.edge == edge]


@dataclass(frozen=True, slots=True)
class HealthState:
    """Rolling-window violation accounting."""

    window_ns: int
    now: int | None = None
    violation_times: tuple[int, ...] = ()
    """Evaluation timestamps of violations still inside the window."""

    @property
    def health(self) -> Literal[0, 1]:
        if self.now is None:
            return 1
        lower = self.now - self.window_ns
        return 0 if any(lower < t <= self.now for t in self.violation_times) else 1


class ViolationStats(BaseSchema):
    """Negative-span accounting over a set of spans."""

    negative_count: int = 0
    """Number of spans below zero."""

    total: int = 0
    """Number of spans considered."""

    violation_rate: float = 0.0
    """negative_count / total, 0 when there are no spans."""


class DeltaTMinStats(BaseSchema):
    """Baseline distribution of positive inter-stage separations on an edge."""

    edge: Edge
    """Edge the samples were taken on."""

    sample_count: int
    """Number of positive samples."""

    min_ns: int
    """Smallest positive separation observed."""

    quantiles: dict[float, int]
    """Nearest-rank quantiles of the samples, keyed by q."""

    samples: tuple[int, ...] = ()
    """Positive separations in ascending order."""


class SafetyVerdict(BaseSchema):
    """Outcome of comparing a clock error to the Δt_min budget."""

    epsilon_ns: int
    """Clock error that was checked."""

    verdict: Literal["preserved", "may_be_violated"]
    """Whether timestamp ordering stays trustworthy."""

    min_ns: int
    """Δt_min the error was compared against."""

    safe_quantile: float | None = None
    """Smallest tracked quantile whose value still exceeds epsilon."""

    @property
    def preserved(self) -> bool:
        return self.verdict == "preserved"
