"""Experiment drivers: baseline, skew sweep, drift recovery, queueing control."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import math
from typing import TYPE_CHECKING

import logfire

from skewscope import constants
from skewscope.causality.bounds import (
    estimate_delta_t_min,
    onset_bracket,
    predict_violations,
    recommend_alert_threshold,
)
from skewscope.causality.health import evaluation_times, first_recovery, replay_health
from skewscope.causality.spans import (
    edge_label,
    extract_spans,
    violation_stats,
    violations_per_edge,
)
from skewscope.clocks import SkewProfile, pairwise_error, validate_clock_baseline
from skewscope.exceptions import BaselineIntegrityError, ConfigError
from skewscope.experiments.config import config_digest
from skewscope.experiments.report import ExperimentReport, ReportKind, SweepRow
from skewscope.log import get_logger
from skewscope.pipeline import Pipeline
from skewscope.simcore import SimState
from skewscope.transport import Link


if TYPE_CHECKING:
    from collections.abc import Sequence

    from skewscope.causality.models import SpanRecord, TraceEvent
    from skewscope.clocks import ClockModel
    from skewscope.experiments.config import ExperimentConfig
    from skewscope.pipeline import PipelineMetrics

logger = get_logger(__name__)


@dataclass(slots=True)
class SimulationResult:
    """Raw output of one simulated run."""

    config: ExperimentConfig
    trace: list[TraceEvent]
    metrics: PipelineMetrics
    clocks: dict[str, ClockModel]


@dataclass(slots=True)
class Run:
    """A finished run: its report plus the trace it was computed from."""

    config: ExperimentConfig
    report: ExperimentReport
    trace: list[TraceEvent] = field(repr=False)


@dataclass(slots=True)
class SweepResult:
    runs: list[Run]
    rows: list[SweepRow]
    onset: tuple[int | None, int | None]
    """(largest clean skew, smallest violating skew)."""


@dataclass(slots=True)
class QueueingResult:
    """Backlog arm, low-load arm and low-load arm with step skew."""

    service_rate: float
    backlog: Run
    low_load: Run
    low_load_skewed: Run


def run_id_for(kind: ReportKind, digest: str) -> str:
    return f"{kind}-{digest[:12]}"


def simulate(cfg: ExperimentConfig) -> SimulationResult:
    """Run the pipeline described by `cfg` up to its horizon."""
    clocks = cfg.clock_models()
    with logfire.span(
        "simulate seed={seed} skew={skew_ns}",
        seed=cfg.seed,
        skew_ns=cfg.skew.magnitude_ns,
    ):
        state = SimState(cfg.seed)
        links = {model.edge[0]: Link(model, cfg.seed) for model in cfg.links}
        pipeline = Pipeline(
            state,
            workload=cfg.workload,
            stages=cfg.stages,
            links=links,
            clocks=clocks,
            run_duration_ns=cfg.run_duration_ns,
            metric_tick_ns=cfg.tick_ns,
        )
        pipeline.start()
        state.run_until(cfg.horizon_ns)
        pipeline.finish()
    logger.debug(
        "Simulated %d requests, %d events (seed=%d)",
        pipeline.metrics.produced,
        len(state.trace_sink),
        cfg.seed,
    )
    return SimulationResult(cfg, state.trace_sink.events, pipeline.metrics, clocks)


def _mean(values: Sequence[int]) -> float:
    return sum(values) / len(values) if values else 0.0


def crossing_time(cfg: ExperimentConfig) -> int | None:
    """True time at which the dominant-edge clock error falls below the link floor.

    Only the error at t=0 and the relative drift are considered. None when the
    error starts below the floor or never shrinks.
    """
    up, down = constants.DOMINANT_EDGE
    clocks = cfg.clock_models()
    epsilon0 = pairwise_error(clocks[up], clocks[down], 0)
    relative_drift = clocks[up].drift_ppb - clocks[down].drift_ppb
    floor = cfg.link(constants.DOMINANT_EDGE).floor_ns
    if epsilon0 < floor or relative_drift >= 0:
        return None
    return math.ceil((epsilon0 - floor) * constants.NS_PER_S / -relative_drift)


def build_report(result: SimulationResult, kind: ReportKind) -> ExperimentReport:
    """Aggregate a simulation into its report."""
    cfg = result.config
    metrics = result.metrics
    extraction = extract_spans(result.trace)
    stats = violation_stats(extraction.spans)
    observer = result.clocks[constants.EVALUATION_STAGE]
    ticks = [tick for tick, _ in metrics.tick_tokens]
    eval_ticks = [observer.noiseless(tick) for tick in ticks]
    violations = evaluation_times(extraction.spans, observer.noiseless)
    replayed = replay_health(violations, eval_ticks, cfg.window_ns)
    timeline = [(tick, health) for tick, (_, health) in zip(ticks, replayed)]
    up, down = (result.clocks[stage] for stage in constants.DOMINANT_EDGE)
    last_violation = max(
        (
            s.recv_true_ts_ns
            for s in extraction.spans
            if s.is_violation and s.recv_true_ts_ns is not None
        ),
        default=None,
    )
    digest = config_digest(cfg)
    return ExperimentReport(
        run_id=run_id_for(kind, digest),
        kind=kind,
        config_digest=digest,
        seed=cfg.seed,
        skew_ns=cfg.skew.magnitude_ns,
        total_tokens=metrics.total_tokens,
        total_requests=metrics.produced,
        completed_requests=metrics.completed,
        total_spans=stats.total,
        in_flight=extraction.in_flight,
        negative_span_count=stats.negative_count,
        negative_spans_per_edge=violations_per_edge(extraction.spans),
        violation_rate=stats.violation_rate,
        throughput_series=list(metrics.tick_tokens),
        violation_series=list(metrics.tick_violations),
        health_timeline=timeline,
        epsilon_series=[(tick, pairwise_error(up, down, tick)) for tick in ticks],
        queue_series=list(metrics.tick_queue),
        mean_queue_delay_ns=_mean(metrics.queue_delays_ns),
        max_queue_length=max((n for _, n in metrics.tick_queue), default=0),
        mean_end_to_end_ns=_mean(metrics.end_to_end_ns),
        last_violation_ns=last_violation,
        crossing_ns=crossing_time(cfg),
        health_recovered_at_ns=first_recovery(timeline),
    )


def run_simulation(cfg: ExperimentConfig, kind: ReportKind = "run") -> Run:
    result = simulate(cfg)
    return Run(cfg, build_report(result, kind), result.trace)


def run_baseline(cfg: ExperimentConfig) -> Run:
    """Zero-skew run producing Δt_min statistics and an alert threshold.

    Raises:
        ConfigError: If the config injects skew
        BaselineIntegrityError: If clocks disagree beyond tolerance, or any
            negative span is observed
    """
    if cfg.skew.mode != "none":
        msg = "Baseline runs require skew mode 'none'"
        raise ConfigError(msg)
    validate_clock_baseline(cfg.clock_models(), cfg.baseline_tolerance_ns)
    with logfire.span("baseline seed={seed}", seed=cfg.seed):
        result = simulate(cfg)
        report = build_report(result, "baseline")
        if report.negative_span_count:
            bad = {k: v for k, v in report.negative_spans_per_edge.items() if v}
            msg = f"Baseline run produced negative spans: {bad}"
            raise BaselineIntegrityError(msg)
        spans = extract_spans(result.trace).spans
        stats = estimate_delta_t_min(spans, edges=constants.EDGES)
        threshold = recommend_alert_threshold(stats[constants.DOMINANT_EDGE])
    report = report.model_copy(
        update={
            "delta_t_min_stats": {edge_label(e): s for e, s in stats.items()},
            "alert_threshold_ns": threshold,
        }
    )
    logger.info(
        "Baseline: %d tokens, Δt_min on %s = %d ns, alert threshold %d ns",
        report.total_tokens,
        edge_label(constants.DOMINANT_EDGE),
        stats[constants.DOMINANT_EDGE].min_ns,
        threshold,
    )
    return Run(cfg, report, result.trace)


def _sweep_point(cfg: ExperimentConfig, skew_ns: int) -> Run:
    return run_simulation(cfg.with_skew(SkewProfile.step(skew_ns)), "sweep")


def run_sweep(
    cfg: ExperimentConfig,
    skews_ns: Sequence[int],
    *,
    workers: int = 1,
) -> SweepResult:
    """Step-skew sweep at the skewed stage, one run per magnitude.

    Every run uses the same seed, so all runs share the true-time dynamics and
    only the wall stamps differ. Rows are compared against the oracle computed
    from the zero-skew run.

    Raises:
        ConfigError: On a negative or duplicate skew, or an empty sweep
    """
    if not skews_ns:
        msg = "Sweep needs at least one skew value"
        raise ConfigError(msg)
    if any(s < 0 for s in skews_ns) or len(set(skews_ns)) != len(skews_ns):
        msg = f"Sweep skews must be distinct and non-negative, got {list(skews_ns)}"
        raise ConfigError(msg)
    skews = sorted(skews_ns)
    points = skews if 0 in skews else [0, *skews]
    with logfire.span("sweep points={count}", count=len(points)):
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                runs = list(pool.map(_sweep_point, [cfg] * len(points), points))
        else:
            runs = [_sweep_point(cfg, skew) for skew in points]

    zero = runs[0]
    baseline_spans: list[SpanRecord] = extract_spans(zero.trace).on_edge(
        constants.DOMINANT_EDGE
    )
    rows = []
    for run in runs:
        skew = run.report.skew_ns
        predicted = predict_violations(baseline_spans, skew)
        rows.append(
            SweepRow(
                skew_ns=skew,
                negative_span_count=run.report.negative_span_count,
                predicted_violations=predicted,
                predicted_fraction=predicted / max(1, len(baseline_spans)),
                violation_rate=run.report.violation_rate,
                total_tokens=run.report.total_tokens,
                total_requests=run.report.total_requests,
                throughput_delta=run.report.total_tokens - zero.report.total_tokens,
                min_health=min((h for _, h in run.report.health_timeline), default=1),
            )
        )
    if 0 not in skews:
        runs, rows = runs[1:], rows[1:]
    onset = onset_bracket([(row.skew_ns, row.negative_span_count) for row in rows])
    logger.info("Sweep over %d skews, onset bracket %s", len(rows), onset)
    return SweepResult(runs=runs, rows=rows, onset=onset)


def run_drift_recovery(cfg: ExperimentConfig) -> Run:
    """Step skew plus a correcting drift; reports when health recovers.

    Raises:
        ConfigError: If the skewed clock has no drift relative to its peer
    """
    clocks = cfg.clock_models()
    up, down = constants.DOMINANT_EDGE
    if clocks[up].drift_ppb == clocks[down].drift_ppb:
        msg = "Drift recovery needs a non-zero relative drift on the dominant edge"
        raise ConfigError(msg)
    with logfire.span("drift recovery drift_ppb={drift}", drift=cfg.skew.drift_ppb):
        run = run_simulation(cfg, "drift")
    report = run.report
    logger.info(
        "Drift recovery: crossing at %s ns, last violation at %s ns, recovered at %s ns",
        report.crossing_ns,
        report.last_violation_ns,
        report.health_recovered_at_ns,
    )
    return run


def run_queueing_control(
    cfg: ExperimentConfig,
    *,
    backlog_load: float = 0.9,
    low_load: float = 0.1,
    skew_ns: int = 5 * constants.NS_PER_MS,
) -> QueueingResult:
    """Separate queueing delay from skew-induced timing violations.

    Raises:
        ConfigError: If a load factor is outside (0, 1)
    """
    for name, load in (("backlog_load", backlog_load), ("low_load", low_load)):
        if not 0 < load < 1:
            msg = f"{name} must be in (0, 1) for a stable queue, got {load}"
            raise ConfigError(msg)
    mu = cfg.inference_service_rate
    unskewed = cfg.with_skew(SkewProfile())
    with logfire.span("queueing control mu={mu}", mu=mu):
        backlog_cfg = unskewed.with_arrival_rate(backlog_load * mu)
        backlog = run_simulation(backlog_cfg, "queueing")
        low = run_simulation(unskewed.with_arrival_rate(low_load * mu), "queueing")
        skewed_cfg = cfg.with_skew(SkewProfile.step(skew_ns))
        skewed = run_simulation(skewed_cfg.with_arrival_rate(low_load * mu), "queueing")
    logger.info(
        "Queueing control: mean wait %.1f ms at %.0f%% load, %.1f ms at %.0f%% load",
        backlog.report.mean_queue_delay_ns / constants.NS_PER_MS,
        backlog_load * 100,
        low.report.mean_queue_delay_ns / constants.NS_PER_MS,
        low_load * 100,
    )
    return QueueingResult(mu, backlog, low, skewed)
