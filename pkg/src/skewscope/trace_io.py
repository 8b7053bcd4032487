"""Line-delimited trace files: one header object, then one event per line."""

from __future__ import annotations

import re
from typing import TYPE_CHECKING, Any, Literal

import anyenv
from pydantic import ValidationError
from upath import UPath

from skewscope import constants
from skewscope.causality.models import EVENT_KINDS, TraceEvent
from skewscope.exceptions import SkewScopeError, TraceFormatError
from skewscope.log import get_logger
from skewscope.schema import BaseSchema


if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping

    from upath import JoinablePathLike

logger = get_logger(__name__)

DECIMAL_NS = re.compile(r"-?[0-9]+")
SEQ_DIGITS = re.compile(r"[0-9]+")

EVENT_FIELDS = (
    "event_id",
    "request_id",
    "stage_id",
    "kind",
    "wall_ts_ns",
    "true_ts_ns",
    "seq",
)


class TraceFileHeader(BaseSchema):
    """First line of every trace file."""

    format_version: int = constants.TRACE_FORMAT_VERSION
    """Trace format version, only 1 is understood."""

    run_id: str = ""
    """Identifier of the run that produced the trace."""

    config_digest: str = ""
    """SHA-256 of the canonical config (empty for external traces)."""

    clock_note: Literal["simulated", "external"] = "simulated"
    """`external` traces carry no ground-truth timestamps."""


def encode_event(event: TraceEvent) -> dict[str, Any]:
    # ns values as decimal strings: epoch-based stamps exceed 2**53.
    true_ts = None if event.true_ts_ns is None else str(event.true_ts_ns)
    return {
        "event_id": event.event_id,
        "request_id": event.request_id,
        "stage_id": event.stage_id,
        "kind": event.kind,
        "wall_ts_ns": str(event.wall_ts_ns),
        "true_ts_ns": true_ts,
        "seq": event.seq,
    }


def write_trace(
    path: JoinablePathLike,
    events: Iterable[TraceEvent],
    header: TraceFileHeader,
) -> UPath:
    """Write a trace file.

    Args:
        path: Destination file
        events: Events in emission order
        header: Run metadata written as the first line

    Returns:
        The written path

    Raises:
        SkewScopeError: If the file cannot be written
    """
    target = UPath(path)
    lines = [anyenv.dump_json(header.model_dump(mode="json"))]
    lines.extend(anyenv.dump_json(encode_event(event)) for event in events)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as exc:
        msg = f"Failed to write trace {target}: {exc}"
        raise SkewScopeError(msg) from exc
    logger.debug("Wrote %d events to %s", len(lines) - 1, target)
    return target


def _parse_ns(
    value: Any,
    name: str,
    line_no: int,
    *,
    nullable: bool = False,
) -> int | None:
    if value is None and nullable:
        return None
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        msg = f"{name} must be an integer or decimal string, got {value!r}"
        raise TraceFormatError(msg, line_no=line_no)
    if isinstance(value, str) and not DECIMAL_NS.fullmatch(value):
        msg = f"{name} is not a plain decimal integer: {value!r}"
        raise TraceFormatError(msg, line_no=line_no)
    return int(value)


def decode_event(raw: Mapping[str, Any], line_no: int) -> TraceEvent:
    """Validate one event object."""
    required = [name for name in EVENT_FIELDS if name != "true_ts_ns"]
    missing = [name for name in required if name not in raw]
    if missing:
        msg = f"missing field(s) {', '.join(missing)}"
        raise TraceFormatError(msg, line_no=line_no)
    kind = raw["kind"]
    if kind not in EVENT_KINDS:
        msg = f"unknown event kind {kind!r}"
        raise TraceFormatError(msg, line_no=line_no)
    seq = raw["seq"]
    if isinstance(seq, str) and SEQ_DIGITS.fullmatch(seq):
        seq = int(seq)
    if isinstance(seq, bool) or not isinstance(seq, int):
        msg = f"seq must be an integer, got {seq!r}"
        raise TraceFormatError(msg, line_no=line_no)
    wall = _parse_ns(raw["wall_ts_ns"], "wall_ts_ns", line_no)
    assert wall is not None
    return TraceEvent(
        event_id=str(raw["event_id"]),
        request_id=str(raw["request_id"]),
        stage_id=str(raw["stage_id"]),
        kind=kind,
        wall_ts_ns=wall,
        true_ts_ns=_parse_ns(
            raw.get("true_ts_ns"), "true_ts_ns", line_no, nullable=True
        ),
        seq=seq,
    )


def _load_line(text: str, line_no: int) -> dict[str, Any]:
    try:
        return anyenv.load_json(text, return_type=dict)
    except anyenv.JsonLoadError as exc:
        msg = f"malformed record: {exc}"
        raise TraceFormatError(msg, line_no=line_no) from exc
    except TypeError as exc:
        msg = "record is not an object"
        raise TraceFormatError(msg, line_no=line_no) from exc


def read_trace(
    path: JoinablePathLike,
    field_map: Mapping[str, str] | None = None,
) -> tuple[TraceFileHeader, list[TraceEvent]]:
    """Read and validate a trace file.

    Args:
        path: Trace file to read
        field_map: Renames applied to event keys before validation
            (foreign key -> trace field), for externally captured logs

    Returns:
        The header and the events in file order

    Raises:
        TraceFormatError: Malformed line, version mismatch, duplicate event_id
            or non-monotonic per-stage seq
    """
    source = UPath(path)
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as exc:
        msg = f"Failed to read trace {source}: {exc}"
        raise TraceFormatError(msg) from exc
    lines = text.splitlines()
    if not lines:
        msg = "empty trace file, expected a header"
        raise TraceFormatError(msg, line_no=1)

    raw_header = _load_line(lines[0], 1)
    version = raw_header.get("format_version")
    if version != constants.TRACE_FORMAT_VERSION:
        msg = f"unsupported trace format version {version!r}"
        raise TraceFormatError(msg, line_no=1)
    try:
        header = TraceFileHeader.model_validate(raw_header)
    except ValidationError as exc:
        msg = f"invalid header: {exc}"
        raise TraceFormatError(msg, line_no=1) from exc

    events: list[TraceEvent] = []
    seen_ids: set[str] = set()
    last_seq: dict[str, int] = {}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            msg = "blank line, expected an event record"
            raise TraceFormatError(msg, line_no=line_no)
        raw = _load_line(line, line_no)
        if field_map:
            raw = {field_map.get(key, key): value for key, value in raw.items()}
        event = decode_event(raw, line_no)
        if event.event_id in seen_ids:
            msg = f"duplicate event_id {event.event_id!r}"
            raise TraceFormatError(msg, line_no=line_no)
        previous = last_seq.get(event.stage_id)
        if previous is not None and event.seq <= previous:
            msg = f"seq {event.seq} of stage {event.stage_id!r} not above {previous}"
            raise TraceFormatError(msg, line_no=line_no)
        seen_ids.add(event.event_id)
        last_seq[event.stage_id] = event.seq
        events.append(event)

    external = is_external(header, events)
    logger.debug("Read %d events from %s (external=%s)", len(events), source, external)
    return header, events


def is_external(header: TraceFileHeader, events: Iterable[TraceEvent]) -> bool:
    """Whether ground-truth dependent checks must be skipped."""
    return header.clock_note == "external" or any(e.true_ts_ns is None for e in events)
