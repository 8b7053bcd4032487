"""Experiment reports and their structured/tabular renderings."""

from __future__ import annotations

import csv
from typing import TYPE_CHECKING, Literal

import anyenv
from pydantic import Field, ValidationError
from upath import UPath

from skewscope.causality.models import DeltaTMinStats  # noqa: TC001
from skewscope.exceptions import ConfigError, SkewScopeError
from skewscope.log import get_logger
from skewscope.schema import BaseSchema


if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from upath import JoinablePathLike

logger = get_logger(__name__)

ReportKind = Literal["baseline", "sweep", "drift", "queueing", "run", "analysis"]
ReportFormat = Literal["structured", "tabular", "both"]
Series = list[tuple[int, int]]

REPORT_FILE = "report.json"
TIMESERIES_FILE = "timeseries.csv"
HEALTH_FILE = "health.csv"
SWEEP_SUMMARY_FILE = "sweep_summary.csv"


class ExperimentReport(BaseSchema):
    """Aggregates of one simulated run. Series are keyed by true tick time (ns)."""

    run_id: str
    """Deterministic run identifier (kind + config digest prefix)."""

    kind: ReportKind
    """Experiment that produced the run."""

    config_digest: str
    """SHA-256 of the resolved config."""

    seed: int
    """Run seed."""

    skew_ns: int = 0
    """Injected step skew at the skewed stage."""

    total_tokens: int = 0
    """Tokens observed at postprocess."""

    total_requests: int = 0
    """Requests produced."""

    completed_requests: int = 0
    """Requests that reached the observer before the horizon."""

    total_spans: int = 0
    """Matched send/recv pairs over all edges."""

    in_flight: int = 0
    """Sends without a receive at the horizon (not counted as violations)."""

    negative_span_count: int = 0
    """Negative timing spans over all edges."""

    negative_spans_per_edge: dict[str, int] = Field(default_factory=dict)
    """Negative timing spans keyed by "up->down"."""

    violation_rate: float = 0.0
    """negative_span_count / total_spans."""

    throughput_series: Series = Field(default_factory=list)
    """(tick, tokens observed during the tick)."""

    violation_series: Series = Field(default_factory=list)
    """(tick, negative spans detected during the tick)."""

    health_timeline: Series = Field(default_factory=list)
    """(tick, causality_health)."""

    epsilon_series: Series = Field(default_factory=list)
    """(tick, inference minus postprocess clock error in ns)."""

    queue_series: Series = Field(default_factory=list)
    """(tick, requests waiting or in service at inference)."""

    mean_queue_delay_ns: float = 0.0
    """Mean wait before inference service."""

    max_queue_length: int = 0
    """Largest inference queue length seen at a tick."""

    mean_end_to_end_ns: float = 0.0
    """Mean true time from production to completion at the observer."""

    last_violation_ns: int | None = None
    """True receive time of the last negative span."""

    crossing_ns: int | None = None
    """Analytic time at which the dominant-edge clock error drops below the floor."""

    health_recovered_at_ns: int | None = None
    """Tick from which health stays 1 after having been 0."""

    delta_t_min_stats: dict[str, DeltaTMinStats] | None = None
    """Per-edge Δt_min statistics (baseline runs only)."""

    alert_threshold_ns: int | None = None
    """Recommended skew alert threshold (baseline runs only)."""


class SweepRow(BaseSchema):
    """One line of the sweep summary."""

    skew_ns: int
    negative_span_count: int
    predicted_violations: int
    """Oracle count from the zero-skew baseline spans."""
    predicted_fraction: float
    violation_rate: float
    total_tokens: int
    total_requests: int
    throughput_delta: int
    """Tokens relative to the zero-skew run."""
    min_health: int


def load_report(path: JoinablePathLike) -> ExperimentReport:
    """Read a structured report written by `emit_report`."""
    source = UPath(path)
    try:
        data = anyenv.load_json(source.read_text(encoding="utf-8"), return_type=dict)
        return ExperimentReport.model_validate(data)
    except FileNotFoundError as exc:
        msg = f"Report not found: {source}"
        raise ConfigError(msg) from exc
    except (anyenv.JsonLoadError, ValidationError) as exc:
        msg = f"Invalid report {source}: {exc}"
        raise ConfigError(msg) from exc


def _write_csv(
    path: UPath,
    header: Sequence[str],
    rows: Iterable[Sequence[object]],
) -> UPath:
    try:
        with path.open("w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        msg = f"Failed to write {path}: {exc}"
        raise SkewScopeError(msg) from exc
    return path


def emit_report(
    report: ExperimentReport,
    out_dir: JoinablePathLike,
    fmt: ReportFormat = "both",
) -> list[UPath]:
    """Render a report into `out_dir`.

    Structured output is the full report as JSON; tabular output is the
    throughput/violation time series and the health timeline as CSV.

    Returns:
        The written files

    Raises:
        SkewScopeError: On I/O failure, naming the path
    """
    target = UPath(out_dir)
    try:
        target.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        msg = f"Failed to create output directory {target}: {exc}"
        raise SkewScopeError(msg) from exc
    written: list[UPath] = []
    if fmt in ("structured", "both"):
        path = target / REPORT_FILE
        text = anyenv.dump_json(report.model_dump(mode="json"), indent=True)
        try:
            path.write_text(text + "\n", encoding="utf-8")
        except OSError as exc:
            msg = f"Failed to write {path}: {exc}"
            raise SkewScopeError(msg) from exc
        written.append(path)
    if fmt in ("tabular", "both"):
        violations = dict(report.violation_series)
        queue = dict(report.queue_series)
        rows = [
            (tick, tokens, violations.get(tick, 0), queue.get(tick, 0))
            for tick, tokens in report.throughput_series
        ]
        header = ("tick_ns", "tokens", "negative_spans", "inference_queue")
        written.append(_write_csv(target / TIMESERIES_FILE, header, rows))
        epsilon = dict(report.epsilon_series)
        rows = [
            (tick, health, epsilon.get(tick, 0))
            for tick, health in report.health_timeline
        ]
        header = ("tick_ns", "causality_health", "epsilon_ns")
        written.append(_write_csv(target / HEALTH_FILE, header, rows))
    logger.info(
        "Wrote %d report file(s) for %s to %s", len(written), report.run_id, target
    )
    return written


def emit_sweep_summary(rows: Sequence[SweepRow], out_dir: JoinablePathLike) -> UPath:
    """Write the sweep summary table, ascending by skew."""
    target = UPath(out_dir)
    target.mkdir(parents=True, exist_ok=True)
    columns = tuple(SweepRow.model_fields)
    ordered = sorted(rows, key=lambda row: row.skew_ns)
    values = [tuple(getattr(row, name) for name in columns) for row in ordered]
    return _write_csv(target / SWEEP_SUMMARY_FILE, columns, values)
