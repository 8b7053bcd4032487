"""The five-stage inference pipeline as simulation event handlers."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Literal, Self

from pydantic import Field, model_validator

from skewscope import constants
from skewscope.causality.spans import spans_from_stamps
from skewscope.clocks import LocalClock
from skewscope.log import get_logger
from skewscope.schema import BaseSchema


if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

    from skewscope.causality.models import SpanRecord, TraceEvent
    from skewscope.clocks import ClockModel
    from skewscope.simcore import SimEvent, SimState
    from skewscope.transport import Link

logger = get_logger(__name__)


class TokenSpec(BaseSchema):
    """Tokens per request: fixed when `hi` is unset, else uniform in [lo, hi]."""

    lo: int = Field(default=56, ge=1)
    """Fixed token count, or lower bound of the uniform range."""

    hi: int | None = None
    """Upper bound (inclusive) of the uniform range."""

    @model_validator(mode="after")
    def _check_range(self) -> Self:
        if self.hi is not None and self.hi < self.lo:
            msg = f"Token range upper bound {self.hi} below lower bound {self.lo}"
            raise ValueError(msg)
        return self

    @property
    def mean(self) -> float:
        return self.lo if self.hi is None else (self.lo + self.hi) / 2

    def sample(self, state: SimState) -> int:
        if self.hi is None or self.hi == self.lo:
            return self.lo
        return int(state.rng.integers(self.lo, self.hi, endpoint=True))


class WorkloadConfig(BaseSchema):
    """Request arrival process."""

    arrival_rate: float = Field(default=2.0, gt=0)
    """λ, requests per second."""

    arrival_process: Literal["exponential", "deterministic"] = "exponential"
    """Exponential inter-arrival times, or exact 1/λ spacing."""

    tokens: TokenSpec = Field(default_factory=TokenSpec)
    """Tokens generated per request."""

    streaming: bool = False
    """Per-token send stamps at inference (reserved; generate-then-emit only)."""

    @model_validator(mode="after")
    def _check_streaming(self) -> Self:
        if self.streaming:
            msg = "Token-level streaming is not supported; use generate-then-emit"
            raise ValueError(msg)
        return self


class StageConfig(BaseSchema):
    """Service-time model of a stage: base + per_token * tokens."""

    stage_id: str
    """Stage identifier."""

    base_service_ns: int = Field(default=0, ge=0)
    """Fixed part of the service time."""

    per_token_ns: int = Field(default=0, ge=0)
    """Service time added per generated token."""

    queue_discipline: Literal["fifo"] = "fifo"
    """Stages serve one message at a time in arrival order."""

    @model_validator(mode="after")
    def _check_positive(self) -> Self:
        if self.base_service_ns + self.per_token_ns <= 0:
            msg = f"Stage {self.stage_id!r} needs a strictly positive service time"
            raise ValueError(msg)
        return self

    def service_time(self, tokens: int) -> int:
        return self.base_service_ns + self.per_token_ns * tokens


def service_rate(stage: StageConfig, tokens: TokenSpec) -> float:
    """μ of a stage in requests per second at the mean token count."""
    mean_ns = stage.base_service_ns + stage.per_token_ns * tokens.mean
    return constants.NS_PER_S / mean_ns


@dataclass(slots=True)
class Message:
    """A request travelling down the pipeline."""

    request_id: str
    payload_tokens: int
    created_ns: int
    hop: int = 0
    stamps: list[TraceEvent] = field(default_factory=list)
    enqueued_ns: int = 0


@dataclass(slots=True)
class StageRuntime:
    config: StageConfig
    clock: LocalClock
    queue: deque[Message] = field(default_factory=deque)
    busy: Message | None = None

    @property
    def queue_length(self) -> int:
        return len(self.queue) + (self.busy is not None)


@dataclass(slots=True)
class PipelineMetrics:
    """Counters and per-tick series collected while the pipeline runs."""

    produced: int = 0
    total_tokens: int = 0
    delivered_order: list[str] = field(default_factory=list)
    completed: int = 0
    tick_tokens: list[tuple[int, int]] = field(default_factory=list)
    tick_violations: list[tuple[int, int]] = field(default_factory=list)
    tick_queue: list[tuple[int, int]] = field(default_factory=list)
    queue_delays_ns: list[int] = field(default_factory=list)
    end_to_end_ns: list[int] = field(default_factory=list)
    live_spans: list[SpanRecord] = field(default_factory=list)
    tokens_in_tick: int = 0
    violations_in_tick: int = 0


def _stamp(
    state: SimState,
    stage: StageRuntime,
    msg: Message,
    kind: Literal["service_start", "service_end"],
) -> None:
    stage_id = stage.config.stage_id
    wall = stage.clock.read(state.now)
    stamp = state.trace_sink.emit(stage_id, msg.request_id, kind, wall, state.now)
    msg.stamps.append(stamp)


class Pipeline:
    """Producer, preprocess, inference, postprocess and observer stages."""

    def __init__(
        self,
        state: SimState,
        *,
        workload: WorkloadConfig,
        stages: Sequence[StageConfig],
        links: Mapping[str, Link],
        clocks: Mapping[str, ClockModel],
        run_duration_ns: int,
        metric_tick_ns: int,
    ) -> None:
        """Wire the stages into `state`.

        Args:
            state: Simulation owning the handlers
            workload: Arrival process and token counts
            stages: Service models, in pipeline order
            links: Outgoing link per upstream stage id
            clocks: Clock model per stage id
            run_duration_ns: Arrivals stop at this true time
            metric_tick_ns: Cadence of metric ticks
        """
        self.state = state
        self.workload = workload
        self.links = dict(links)
        self.run_duration_ns = run_duration_ns
        self.metric_tick_ns = metric_tick_ns
        self.stages = {
            cfg.stage_id: StageRuntime(cfg, LocalClock(clocks[cfg.stage_id]))
            for cfg in stages
        }
        self.metrics = PipelineMetrics()
        state.on("request_arrival", self._on_request_arrival)
        state.on("message_arrival", self._on_message_arrival)
        state.on("service_complete", self._on_service_complete)
        state.on("metric_tick", self._on_metric_tick)

    def start(self) -> None:
        """Schedule the first arrival and the first metric tick."""
        if self.run_duration_ns > 0:
            first = 0 if self.workload.arrival_process == "deterministic" else None
            self._schedule_arrival(first)
        self.state.schedule(self.metric_tick_ns, "metric_tick")

    @property
    def inference_queue_length(self) -> int:
        return self.stages[constants.SKEWED_STAGE].queue_length

    # --- producer -------------------------------------------------------

    def _interarrival_ns(self) -> int:
        mean_ns = constants.NS_PER_S / self.workload.arrival_rate
        if self.workload.arrival_process == "deterministic":
            return round(mean_ns)
        return max(1, round(self.state.rng.exponential(mean_ns)))

    def _schedule_arrival(self, delay: int | None = None) -> None:
        delay = self._interarrival_ns() if delay is None else delay
        if self.state.now + delay < self.run_duration_ns:
            self.state.schedule(delay, "request_arrival")

    def _on_request_arrival(self, state: SimState, event: SimEvent) -> None:
        self.produce_request(state)

    def produce_request(self, state: SimState) -> Message:
        """Create a request, send it to preprocess and schedule the next one."""
        producer = self.stages["producer"]
        msg = Message(
            request_id=f"req-{self.metrics.produced:06d}",
            payload_tokens=self.workload.tokens.sample(state),
            created_ns=state.now,
        )
        self.metrics.produced += 1
        self.links["producer"].send(state, msg, producer.clock)
        self._schedule_arrival()
        return msg

    # --- stages ---------------------------------------------------------

    def _on_message_arrival(self, state: SimState, event: SimEvent) -> None:
        stage_id, msg = event.payload
        stage = self.stages[stage_id]
        upstream = constants.STAGES[constants.STAGES.index(stage_id) - 1]
        self.links[upstream].deliver(state, msg, stage.clock)
        self.check_hop(msg)
        msg.enqueued_ns = state.now
        stage.queue.append(msg)
        if stage.busy is None:
            self._start_service(state, stage)

    def _start_service(self, state: SimState, stage: StageRuntime) -> None:
        msg = stage.queue.popleft()
        stage.busy = msg
        stage_id = stage.config.stage_id
        if stage_id == constants.SKEWED_STAGE:
            self.metrics.queue_delays_ns.append(state.now - msg.enqueued_ns)
        _stamp(state, stage, msg, "service_start")
        service_ns = stage.config.service_time(msg.payload_tokens)
        state.schedule(service_ns, "service_complete", stage_id)

    def _on_service_complete(self, state: SimState, event: SimEvent) -> None:
        stage = self.stages[event.payload]
        msg = stage.busy
        assert msg is not None
        stage.busy = None
        self.process_at_stage(state, stage, msg)
        if stage.queue:
            self._start_service(state, stage)

    def process_at_stage(
        self,
        state: SimState,
        stage: StageRuntime,
        msg: Message,
    ) -> None:
        """Finish service of `msg` and forward it (one send per response)."""
        stage_id = stage.config.stage_id
        _stamp(state, stage, msg, "service_end")
        if stage_id == "postprocess":
            self.observe_tokens(msg)
        if stage_id in self.links:
            self.links[stage_id].send(state, msg, stage.clock)
        else:
            self.metrics.completed += 1
            self.metrics.end_to_end_ns.append(state.now - msg.created_ns)

    def observe_tokens(self, msg: Message) -> None:
        """Account tokens delivered to postprocess."""
        self.metrics.total_tokens += msg.payload_tokens
        self.metrics.tokens_in_tick += msg.payload_tokens
        self.metrics.delivered_order.append(msg.request_id)

    def check_hop(self, msg: Message) -> None:
        """Span-check the hop `msg` just completed, in the tick of its receive."""
        send = next(s for s in reversed(msg.stamps) if s.kind == "send")
        spans = spans_from_stamps([send, msg.stamps[-1]])
        self.metrics.live_spans.extend(spans)
        self.metrics.violations_in_tick += sum(s.is_violation for s in spans)

    # --- metrics --------------------------------------------------------

    def _on_metric_tick(self, state: SimState, event: SimEvent) -> None:
        m = self.metrics
        m.tick_tokens.append((state.now, m.tokens_in_tick))
        m.tick_violations.append((state.now, m.violations_in_tick))
        m.tick_queue.append((state.now, self.inference_queue_length))
        m.tokens_in_tick = 0
        m.violations_in_tick = 0
        state.schedule(self.metric_tick_ns, "metric_tick")

    def finish(self) -> None:
        """Fold counts from after the last tick into that tick."""
        m = self.metrics
        if m.tick_tokens:
            at, tokens = m.tick_tokens[-1]
            m.tick_tokens[-1] = (at, tokens + m.tokens_in_tick)
            at, count = m.tick_violations[-1]
            m.tick_violations[-1] = (at, count + m.violations_in_tick)
            m.tokens_in_tick = 0
            m.violations_in_tick = 0
