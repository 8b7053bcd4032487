"""Deterministic discrete-event engine over true simulation time."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
import heapq
from typing import TYPE_CHECKING, Any, Literal, Self

import numpy as np

from skewscope.causality.models import TraceEvent
from skewscope.exceptions import SimulationError
from skewscope.log import get_logger


if TYPE_CHECKING:
    from skewscope.causality.models import EventKind

logger = get_logger(__name__)

SimEventKind = Literal[
    "request_arrival",
    "message_arrival",
    "service_complete",
    "metric_tick",
]
Handler = Callable[["SimState", "SimEvent"], None]


@dataclass(frozen=True, slots=True, order=True)
class SimEvent:
    """A scheduled callback, totally ordered by (fire_time, seq)."""

    fire_time: int
    seq: int
    kind: SimEventKind = field(compare=False)
    payload: Any = field(default=None, compare=False)


class TraceSink:
    """Append-only collector numbering events per stage."""

    def __init__(self) -> None:
        self.events: list[TraceEvent] = []
        self._seq: dict[str, int] = {}

    def emit(
        self,
        stage_id: str,
        request_id: str,
        kind: EventKind,
        wall_ts_ns: int,
        true_ts_ns: int | None,
    ) -> TraceEvent:
        seq = self._seq.get(stage_id, 0)
        self._seq[stage_id] = seq + 1
        event = TraceEvent(
            event_id=f"{stage_id}:{seq}",
            request_id=request_id,
            stage_id=stage_id,
            kind=kind,
            wall_ts_ns=wall_ts_ns,
            true_ts_ns=true_ts_ns,
            seq=seq,
        )
        self.events.append(event)
        return event

    def __len__(self) -> int:
        return len(self.events)


class SimState:
    """Single-owner simulation state: clock, event queue, RNG and trace."""

    def __init__(self, seed: int = 0) -> None:
        """Initialize an empty simulation at true time 0.

        Args:
            seed: Seed of the workload RNG stream (clock jitter uses its own)
        """
        self.now = 0
        self.rng = np.random.default_rng(seed)
        self.trace_sink = TraceSink()
        self._queue: list[SimEvent] = []
        self._next_seq = 0
        self._handlers: dict[SimEventKind, Handler] = {}

    def on(self, kind: SimEventKind, handler: Handler) -> None:
        """Register the handler for an event kind (one per kind)."""
        self._handlers[kind] = handler

    @property
    def pending(self) -> int:
        return len(self._queue)

    def schedule(self, delay: int, kind: SimEventKind, payload: Any = None) -> int:
        """Enqueue an event `delay` ns from now.

        Returns:
            The event's sequence number, unique within the run

        Raises:
            ValueError: If delay is negative
        """
        if delay < 0:
            msg = f"Cannot schedule {kind} with negative delay {delay}"
            raise ValueError(msg)
        seq = self._next_seq
        self._next_seq += 1
        heapq.heappush(self._queue, SimEvent(self.now + delay, seq, kind, payload))
        return seq

    def run_until(self, horizon: int) -> Self:
        """Process every event with fire_time <= horizon, then set now = horizon.

        Raises:
            ValueError: If horizon lies before the current time
            SimulationError: If a handler raises; identifies the event
        """
        if horizon < self.now:
            msg = f"Horizon {horizon} lies before current time {self.now}"
            raise ValueError(msg)
        while self._queue and self._queue[0].fire_time <= horizon:
            event = heapq.heappop(self._queue)
            self.now = event.fire_time
            handler = self._handlers.get(event.kind)
            if handler is None:
                msg = f"No handler registered for {event.kind}"
                raise SimulationError(msg, event=event)
            try:
                handler(self, event)
            except SimulationError:
                raise
            except Exception as exc:
                msg = f"Handler for {event.kind} failed: {exc}"
                raise SimulationError(msg, event=event) from exc
        self.now = horizon
        return self
