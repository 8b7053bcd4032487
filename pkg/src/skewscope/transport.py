"""Reliable FIFO stage-to-stage links with sampled transit latency."""

from __future__ import annotations

import math
from typing import TYPE_CHECKING, Annotated, Literal, Self
import zlib

import numpy as np
from pydantic import Field, model_validator

from skewscope import constants
from skewscope.constants import Edge  # noqa: TC001
from skewscope.log import get_logger
from skewscope.schema import BaseSchema


if TYPE_CHECKING:
    from skewscope.clocks import LocalClock
    from skewscope.pipeline import Message
    from skewscope.simcore import SimState

logger = get_logger(__name__)


class LatencyBase(BaseSchema):
    """Base for latency distributions; samples never fall below the floor."""

    kind: str = Field(init=False)

    def sample(self, rng: np.random.Generator, floor_ns: int) -> int:
        raise NotImplementedError


class FixedLatency(LatencyBase):
    """Every message takes exactly the link floor."""

    kind: Literal["fixed"] = Field("fixed", init=False)

    def sample(self, rng: np.random.Generator, floor_ns: int) -> int:
        return floor_ns


class UniformLatency(LatencyBase):
    """Integer latency drawn uniformly from [lo_ns, hi_ns], clamped to the floor."""

    kind: Literal["uniform"] = Field("uniform", init=False)
    lo_ns: int = Field(gt=0)
    hi_ns: int = Field(gt=0)

    @model_validator(mode="after")
    def _check_bounds(self) -> Self:
        if self.hi_ns < self.lo_ns:
            msg = f"uniform latency needs lo_ns <= hi_ns, got {self.lo_ns} > {self.hi_ns}"
            raise ValueError(msg)
        return self

    def sample(self, rng: np.random.Generator, floor_ns: int) -> int:
        return max(floor_ns, int(rng.integers(self.lo_ns, self.hi_ns, endpoint=True)))


class LognormalLatency(LatencyBase):
    """Floor plus a lognormal excess; the total latency has median `median_ns`."""

    kind: Literal["lognormal"] = Field("lognormal", init=False)
    median_ns: int = Field(gt=0)
    sigma: float = Field(default=1.0, gt=0)

    def sample(self, rng: np.random.Generator, floor_ns: int) -> int:
        excess_median = self.median_ns - floor_ns
        if excess_median <= 0:
            msg = f"lognormal median {self.median_ns} must exceed floor {floor_ns}"
            raise ValueError(msg)
        excess = rng.lognormal(mean=math.log(excess_median), sigma=self.sigma)
        return floor_ns + round(excess)


LatencyDistribution = Annotated[
    FixedLatency | UniformLatency | LognormalLatency,
    Field(discriminator="kind"),
]


class LinkModel(BaseSchema):
    """Latency model of one pipeline edge."""

    edge: Edge
    """(from_stage, to_stage)."""

    floor_ns: int = Field(default=1 * constants.NS_PER_MS, gt=0)
    """Minimum transit latency."""

    dist: LatencyDistribution = Field(default_factory=FixedLatency)
    """Latency distribution above the floor."""

    @model_validator(mode="after")
    def _check_dist(self) -> Self:
        dist = self.dist
        if isinstance(dist, LognormalLatency) and dist.median_ns <= self.floor_ns:
            msg = (
                f"Link {self.edge[0]}->{self.edge[1]}: lognormal median "
                f"{dist.median_ns} must exceed floor {self.floor_ns}"
            )
            raise ValueError(msg)
        return self


class Link:
    """Runtime state of a link inside one simulation."""

    def __init__(self, model: LinkModel, seed: int) -> None:
        """Create the link with its own latency stream.

        Args:
            model: Latency model of the edge
            seed: Run seed; the stream is keyed by (seed, edge)
        """
        self.model = model
        self.edge = model.edge
        edge_key = zlib.crc32(f"{self.edge[0]}->{self.edge[1]}".encode())
        self._rng = np.random.default_rng([seed & ((1 << 64) - 1), edge_key])
        self._last_delivery = 0
        self.sent = 0
        self.delivered = 0

    @property
    def in_flight(self) -> int:
        return self.sent - self.delivered

    def sample_latency(self) -> int:
        return self.model.dist.sample(self._rng, self.model.floor_ns)

    def send(self, state: SimState, msg: Message, sender_clock: LocalClock) -> int:
        """Stamp the send and schedule the arrival at the downstream stage.

        Delivery times on an edge never decrease, which keeps the link FIFO
        under jittered latency.

        Returns:
            The true delivery time
        """
        stamp = state.trace_sink.emit(
            self.edge[0],
            msg.request_id,
            "send",
            sender_clock.read(state.now),
            state.now,
        )
        msg.stamps.append(stamp)
        delivery = max(state.now + self.sample_latency(), self._last_delivery)
        self._last_delivery = delivery
        self.sent += 1
        state.schedule(delivery - state.now, "message_arrival", (self.edge[1], msg))
        return delivery

    def deliver(self, state: SimState, msg: Message, receiver_clock: LocalClock) -> None:
        """Stamp the arrival with the receiver's clock."""
        stamp = state.trace_sink.emit(
            self.edge[1],
            msg.request_id,
            "recv",
            receiver_clock.read(state.now),
            state.now,
        )
        msg.stamps.append(stamp)
        msg.hop += 1
        self.delivered += 1
