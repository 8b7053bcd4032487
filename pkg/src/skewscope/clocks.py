"""Per-node wall clocks as deterministic functions of true simulation time."""

from __future__ import annotations

from itertools import combinations
from typing import TYPE_CHECKING, Literal, Self
import zlib

import numpy as np
from pydantic import Field, model_validator

from skewscope import constants
from skewscope.exceptions import BaselineIntegrityError, ConfigError
from skewscope.log import get_logger
from skewscope.schema import BaseSchema


if TYPE_CHECKING:
    from collections.abc import Mapping

logger = get_logger(__name__)

_UINT64_MASK = (1 << 64) - 1


class ClockStep(BaseSchema):
    """A step change applied to a clock from `at_ns` onwards (inclusive)."""

    at_ns: int = Field(ge=0)
    """True time at which the step takes effect."""

    delta_ns: int
    """Signed amount added to every reading from `at_ns` on."""


class ClockModel(BaseSchema):
    """Mapping from true simulation time to a node's reported wall time.

    reading = t + offset + drift * t + sum(steps up to t) + jitter
    """

    node_id: str
    """Stage this clock belongs to."""

    offset_ns: int = 0
    """Constant base offset."""

    drift_ppb: int = 0
    """Linear drift in ns of clock error per s of true time."""

    jitter_ns: int = Field(default=0, ge=0)
    """Standard deviation of zero-mean per-reading noise."""

    steps: tuple[ClockStep, ...] = ()
    """Step-change injections, strictly increasing in time."""

    seed: int = 0
    """Seed for the jitter stream."""

    @model_validator(mode="after")
    def _check_steps(self) -> Self:
        times = [step.at_ns for step in self.steps]
        if any(a >= b for a, b in zip(times, times[1:])):
            msg = f"Clock steps of {self.node_id!r} must be strictly increasing: {times}"
            raise ValueError(msg)
        return self

    def noiseless(self, true_time: int) -> int:
        """Reading at `true_time` with the jitter term suppressed."""
        drift = (true_time * self.drift_ppb) // constants.NS_PER_S
        stepped = sum(s.delta_ns for s in self.steps if s.at_ns <= true_time)
        return true_time + self.offset_ns + drift + stepped

    def jitter(self, reading_index: int) -> int:
        """Jitter term for the n-th reading of this clock.

        Counter-based: the sample only depends on (seed, node, index), so other
        nodes' streams are unaffected by the order in which clocks are read.
        Draws outside the truncation bound are redrawn from the same stream; redraws
        only advance the low counter word, which never reaches the next index.
        """
        if self.jitter_ns == 0:
            return 0
        key = [self.seed & _UINT64_MASK, zlib.crc32(self.node_id.encode())]
        bit_gen = np.random.Philox(key=key, counter=[0, reading_index, 0, 0])
        rng = np.random.Generator(bit_gen)
        limit = constants.JITTER_TRUNCATION_SIGMAS
        sample = rng.standard_normal()
        while abs(sample) > limit:
            sample = rng.standard_normal()
        return round(float(sample) * self.jitter_ns)


class SkewProfile(BaseSchema):
    """Skew injected at a single stage."""

    target_stage: str = constants.SKEWED_STAGE
    """Stage whose clock is altered."""

    mode: Literal["step", "none"] = "none"
    """`step` adds a step change, `none` leaves all clocks untouched."""

    magnitude_ns: int = 0
    """Signed size of the step."""

    start_ns: int = Field(default=0, ge=0)
    """True time at which the step applies."""

    drift_ppb: int = 0
    """Additional drift given to the target clock (relative drift runs)."""

    @model_validator(mode="after")
    def _check_none(self) -> Self:
        if self.mode == "none" and (self.magnitude_ns or self.drift_ppb):
            msg = "Skew profile with mode 'none' must have zero magnitude and drift"
            raise ValueError(msg)
        return self

    @classmethod
    def step(cls, magnitude_ns: int, *, stage: str = constants.SKEWED_STAGE) -> Self:
        """Step skew from the start of the run (or no skew for a zero step)."""
        if magnitude_ns == 0:
            return cls(target_stage=stage)
        return cls(target_stage=stage, mode="step", magnitude_ns=magnitude_ns)


class LocalClock:
    """Single-owner reader over a ClockModel that numbers its readings."""

    def __init__(self, model: ClockModel) -> None:
        self.model = model
        self.readings = 0

    def read(self, true_time: int) -> int:
        value = read_clock(self.model, true_time, reading_index=self.readings)
        self.readings += 1
        return value


def read_clock(model: ClockModel, true_time: int, *, reading_index: int = 0) -> int:
    """Return the wall time reported by `model` at `true_time`.

    Args:
        model: Clock to read
        true_time: True simulation time in ns, non-negative
        reading_index: Position of this reading in the clock's reading sequence

    Returns:
        The wall-clock reading in ns
    """
    if true_time < 0:
        msg = f"true_time must be non-negative, got {true_time}"
        raise ValueError(msg)
    return model.noiseless(true_time) + model.jitter(reading_index)


def pairwise_error(a: ClockModel, b: ClockModel, true_time: int) -> int:
    """Signed clock error between `a` and `b` at `true_time`, jitter suppressed."""
    return a.noiseless(true_time) - b.noiseless(true_time)


def apply_skew_profile(
    models: Mapping[str, ClockModel],
    profile: SkewProfile,
) -> dict[str, ClockModel]:
    """Return a copy of `models` with the profile applied to its target stage.

    Raises:
        ConfigError: If the target stage has no clock
    """
    if profile.target_stage not in models:
        msg = f"Unknown stage for skew injection: {profile.target_stage!r}"
        raise ConfigError(msg)
    result = dict(models)
    if profile.mode == "none":
        return result

    target = models[profile.target_stage]
    steps = {s.at_ns: s.delta_ns for s in target.steps}
    if profile.magnitude_ns:
        steps[profile.start_ns] = steps.get(profile.start_ns, 0) + profile.magnitude_ns
    merged = tuple(
        ClockStep(at_ns=at, delta_ns=delta)
        for at, delta in sorted(steps.items())
        if delta
    )
    update = {"steps": merged, "drift_ppb": target.drift_ppb + profile.drift_ppb}
    result[profile.target_stage] = target.model_copy(update=update)
    logger.debug(
        "Applied %s skew of %d ns to %s",
        profile.mode,
        profile.magnitude_ns,
        target.node_id,
    )
    return result


def max_pairwise_error(
    models: Mapping[str, ClockModel],
    true_time: int = 0,
) -> tuple[tuple[str, str], int]:
    """Find the pair of clocks that disagree most at `true_time`.

    Returns:
        The (a, b) pair and its absolute error in ns
    """
    worst: tuple[tuple[str, str], int] = (("", ""), 0)
    for a, b in combinations(sorted(models), 2):
        error = abs(pairwise_error(models[a], models[b], true_time))
        if error > worst[1]:
            worst = ((a, b), error)
    return worst


def validate_clock_baseline(
    models: Mapping[str, ClockModel],
    tolerance_ns: int = constants.DEFAULT_BASELINE_TOLERANCE_NS,
    true_time: int = 0,
) -> None:
    """Check that all clocks agree within `tolerance_ns` before measuring.

    Raises:
        BaselineIntegrityError: If any pair is `tolerance_ns` or further apart
    """
    (a, b), error = max_pairwise_error(models, true_time)
    if error >= tolerance_ns:
        msg = (
            f"Clock baseline out of tolerance: {a} and {b} differ by {error} ns "
            f"(tolerance {tolerance_ns} ns)"
        )
        raise BaselineIntegrityError(msg)
    logger.debug("Clock baseline ok, worst pairwise error %d ns", error)
