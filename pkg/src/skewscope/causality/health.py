"""Rolling-window causality_health signal."""

from __future__ import annotations

from bisect import bisect_right
from collections.abc import Iterable
from dataclasses import replace
from typing import TYPE_CHECKING, Literal

from skewscope.causality.models import HealthState


if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from skewscope.causality.models import SpanRecord

HealthPoint = tuple[int, Literal[0, 1]]


def update_health(
    hs: HealthState,
    now: int,
    new_violations: int | Iterable[int] = 0,
) -> HealthState:
    """Advance the health state to `now`.

    Args:
        hs: Previous state
        now: Evaluation time, non-decreasing across calls
        new_violations: Either a count of violations observed at `now`, or
            their evaluation timestamps (each at or before `now`)

    Returns:
        The new state; `.health` is 1 iff no violation lies in (now - window, now]

    Raises:
        ValueError: If `now` goes backwards or a timestamp lies in the future
    """
    if hs.now is not None and now < hs.now:
        msg = f"Health evaluation time went backwards: {now} < {hs.now}"
        raise ValueError(msg)
    if isinstance(new_violations, int):
        added: list[int] = [now] * new_violations
    else:
        added = sorted(new_violations)
        if added and added[-1] > now:
            msg = f"Violation at {added[-1]} lies after evaluation time {now}"
            raise ValueError(msg)
    lower = now - hs.window_ns
    kept = tuple(t for t in (*hs.violation_times, *added) if t > lower)
    return replace(hs, now=now, violation_times=tuple(sorted(kept)))


def evaluation_times(
    spans: Iterable[SpanRecord],
    clock: Callable[[int], int] | None = None,
) -> list[int]:
    """Evaluation timestamps of the violating spans, ascending.

    With `clock`, the receive's true time is read on that clock (the observer
    side); otherwise the receive wall stamp is used.
    """
    times = []
    for span in spans:
        if not span.is_violation:
            continue
        if clock is not None and span.recv_true_ts_ns is not None:
            times.append(clock(span.recv_true_ts_ns))
        else:
            times.append(span.recv_wall_ts_ns)
    return sorted(times)


def replay_health(
    violation_times: Sequence[int],
    ticks: Iterable[int],
    window_ns: int,
) -> list[HealthPoint]:
    """Evaluate health at each tick, feeding violations as they become due."""
    hs = HealthState(window_ns=window_ns)
    timeline: list[HealthPoint] = []
    consumed = 0
    for tick in ticks:
        upto = bisect_right(violation_times, tick, lo=consumed)
        hs = update_health(hs, tick, violation_times[consumed:upto])
        consumed = upto
        timeline.append((tick, hs.health))
    return timeline


def annotate_trust(
    spans: Sequence[SpanRecord],
    window_ns: int,
    clock: Callable[[int], int] | None = None,
) -> list[tuple[SpanRecord, bool]]:
    """Mark each span trusted unless health was 0 when it was detected."""

    def when(span: SpanRecord) -> int:
        if clock is not None and span.recv_true_ts_ns is not None:
            return clock(span.recv_true_ts_ns)
        return span.recv_wall_ts_ns

    violations = evaluation_times(spans, clock)
    result = []
    for span in spans:
        at = when(span)
        lo = bisect_right(violations, at - window_ns)
        hi = bisect_right(violations, at)
        result.append((span, hi == lo))
    return result


def first_recovery(timeline: Sequence[HealthPoint]) -> int | None:
    """Tick from which health stays 1 until the end, after having been 0."""
    last_bad = None
    for i, (_, health) in enumerate(timeline):
        if health == 0:
            last_bad = i
    if last_bad is None or last_bad + 1 >= len(timeline):
        return None
    return timeline[last_bad + 1][0]
