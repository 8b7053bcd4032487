"""Exception hierarchy for skewscope."""

from __future__ import annotations

from typing import TYPE_CHECKING


if TYPE_CHECKING:
    from collections.abc import Sequence

    from skewscope.simcore import SimEvent


class SkewScopeError(Exception):
    """Base class for all skewscope errors."""


class ConfigError(SkewScopeError):
    """Invalid, missing or inconsistent configuration."""


class TraceFormatError(SkewScopeError):
    """A trace file could not be parsed or failed validation."""

    def __init__(self, message: str, *, line_no: int | None = None) -> None:
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class TraceIntegrityError(SkewScopeError):
    """Trace events contradict each other (e.g. a receive without a send)."""

    def __init__(self, message: str, *, event_ids: Sequence[str] = ()) -> None:
        self.event_ids = list(event_ids)
        if self.event_ids:
            message = f"{message}: {', '.join(self.event_ids)}"
        super().__init__(message)


class BaselineIntegrityError(SkewScopeError):
    """A run or input claimed to be a zero-skew baseline is not one."""


class SimulationError(SkewScopeError):
    """An event handler failed while the simulation was running."""

    def __init__(self, message: str, *, event: SimEvent | None = None) -> None:
        self.event = event
        if event is not None:
            where = f"seq={event.seq}, kind={event.kind}, t={event.fire_time}"
            message = f"{message} (event {where})"
        super().__init__(message)
