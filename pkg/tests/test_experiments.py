"""End-to-end experiment behavior on the reference calibration."""

from __future__ import annotations

from typing import TYPE_CHECKING

import pytest

from skewscope import constants
from skewscope.causality import extract_spans, violation_stats
from skewscope.clocks import ClockModel, SkewProfile
from skewscope.exceptions import BaselineIntegrityError, ConfigError
from skewscope.experiments import (
    analyze_trace,
    config_digest,
    load_config,
    run_baseline,
    run_drift_recovery,
    run_queueing_control,
    run_simulation,
    run_sweep,
)
from skewscope.trace_io import TraceFileHeader

from .conftest import MS, S, reversed_inference_trace


if TYPE_CHECKING:
    from skewscope.experiments import ExperimentConfig


REFERENCE_SKEWS = [ms * MS for ms in constants.DEFAULT_SKEWS_MS]


@pytest.mark.parametrize("seed", range(10))
def test_baseline_is_clean(default_config: ExperimentConfig, seed: int) -> None:
    run = run_baseline(default_config.with_overrides(seed=seed))
    report = run.report
    assert report.negative_span_count == 0
    assert set(report.negative_spans_per_edge.values()) == {0}
    assert {health for _, health in report.health_timeline} == {1}
    assert report.delta_t_min_stats is not None
    assert set(report.delta_t_min_stats) == {
        "producer->preprocess",
        "preprocess->inference",
        "inference->postprocess",
        "postprocess->observer",
    }
    dominant = report.delta_t_min_stats["inference->postprocess"]
    assert dominant.min_ns >= 3_500_000
    assert report.alert_threshold_ns is not None
    assert report.alert_threshold_ns < dominant.min_ns


def test_baseline_rejects_skewed_config(default_config: ExperimentConfig) -> None:
    with pytest.raises(ConfigError, match="skew mode"):
        run_baseline(default_config.with_skew(SkewProfile.step(MS)))


def test_baseline_rejects_offset_clocks(default_config: ExperimentConfig) -> None:
    clocks = [ClockModel(node_id="postprocess", offset_ns=300 * MS)]
    with pytest.raises(BaselineIntegrityError, match="out of tolerance"):
        run_baseline(default_config.with_overrides(clocks=clocks))


def test_baseline_fails_on_violations(default_config: ExperimentConfig) -> None:
    # Within tolerance, but wider than the upstream link floor.
    clocks = [
        ClockModel(node_id="preprocess", offset_ns=900_000),
        ClockModel(node_id="inference", offset_ns=-1_500_000),
    ]
    cfg = default_config.with_overrides(clocks=clocks, baseline_tolerance_ns=3 * MS)
    with pytest.raises(BaselineIntegrityError, match="negative spans"):
        run_baseline(cfg)


def test_deterministic_arrivals_count(deterministic_config: ExperimentConfig) -> None:
    report = run_simulation(deterministic_config).report
    assert report.total_requests == 600  # noqa: PLR2004


def test_same_seed_same_report(short_config: ExperimentConfig) -> None:
    assert run_simulation(short_config).report == run_simulation(short_config).report


def test_reference_sweep(default_config: ExperimentConfig) -> None:
    result = run_sweep(default_config, REFERENCE_SKEWS)
    counts = {row.skew_ns: row.negative_span_count for row in result.rows}
    assert [row.skew_ns for row in result.rows] == REFERENCE_SKEWS
    assert all(counts[ms * MS] == 0 for ms in (0, 1, 2, 3))
    assert all(counts[ms * MS] > 0 for ms in (5, 10, 50))
    ordered = [counts[s] for s in REFERENCE_SKEWS]
    assert ordered == sorted(ordered)
    for row in result.rows:
        assert row.negative_span_count == row.predicted_violations
    assert result.onset == (3 * MS, 5 * MS)


def test_sweep_keeps_function_intact(default_config: ExperimentConfig) -> None:
    result = run_sweep(default_config, REFERENCE_SKEWS)
    reference = result.runs[0]
    for run, row in zip(result.runs, result.rows):
        assert run.report.total_tokens == reference.report.total_tokens
        assert run.report.total_requests == reference.report.total_requests
        assert row.throughput_delta == 0
        true_schedule = [(e.event_id, e.true_ts_ns) for e in run.trace]
        assert true_schedule == [(e.event_id, e.true_ts_ns) for e in reference.trace]


def test_sweep_health_drops_with_violations(default_config: ExperimentConfig) -> None:
    result = run_sweep(default_config, [0, 50 * MS])
    clean, skewed = result.rows
    assert clean.min_health == 1
    assert skewed.min_health == 0


def test_sweep_without_zero_still_uses_oracle(short_config: ExperimentConfig) -> None:
    result = run_sweep(short_config, [10 * MS])
    (row,) = result.rows
    assert row.negative_span_count == row.predicted_violations
    assert len(result.runs) == 1


@pytest.mark.parametrize("skews", [[], [-MS], [MS, MS]])
def test_sweep_rejects_bad_skews(
    short_config: ExperimentConfig,
    skews: list[int],
) -> None:
    with pytest.raises(ConfigError):
        run_sweep(short_config, skews)


@pytest.mark.slow
def test_parallel_sweep_matches_serial(short_config: ExperimentConfig) -> None:
    serial = run_sweep(short_config, [0, 5 * MS])
    parallel = run_sweep(short_config, [0, 5 * MS], workers=2)
    assert [r.report for r in serial.runs] == [r.report for r in parallel.runs]


def test_drift_recovery() -> None:
    cfg = load_config("drift_recovery")
    report = run_drift_recovery(cfg).report
    tick = cfg.tick_ns
    assert report.crossing_ns == 15 * S
    assert report.last_violation_ns is not None
    assert report.last_violation_ns <= report.crossing_ns + tick
    assert report.negative_span_count > 0
    healthy_from = report.crossing_ns + cfg.window_ns + tick
    assert all(h == 1 for t, h in report.health_timeline if t >= healthy_from)
    assert any(h == 0 for _, h in report.health_timeline)
    assert report.health_recovered_at_ns is not None
    assert report.health_recovered_at_ns <= healthy_from
    assert report.epsilon_series[0][1] < 5 * MS
    assert report.epsilon_series[-1][1] < 3_500_000


def test_drift_recovery_needs_drift(default_config: ExperimentConfig) -> None:
    with pytest.raises(ConfigError, match="relative drift"):
        run_drift_recovery(default_config.with_skew(SkewProfile.step(5 * MS)))


def test_constant_skew_never_recovers(default_config: ExperimentConfig) -> None:
    report = run_simulation(default_config.with_skew(SkewProfile.step(5 * MS))).report
    assert report.crossing_ns is None
    assert report.health_recovered_at_ns is None
    assert report.health_timeline[-1][1] == 0


def test_drift_away_from_zero_does_not_shrink_violations(
    default_config: ExperimentConfig,
) -> None:
    def rate(drift_ppb: int) -> float:
        skew = SkewProfile(mode="step", magnitude_ns=4 * MS, drift_ppb=drift_ppb)
        return run_simulation(default_config.with_skew(skew)).report.violation_rate

    rates = [rate(drift) for drift in (0, 10_000, 50_000)]
    assert rates == sorted(rates)


def test_queueing_is_not_causal(default_config: ExperimentConfig) -> None:
    cfg = default_config.with_overrides(run_duration_s=120.0)
    result = run_queueing_control(cfg)
    backlog = result.backlog.report
    low = result.low_load.report
    assert backlog.negative_span_count == 0
    assert backlog.mean_queue_delay_ns > 0
    assert backlog.mean_end_to_end_ns > low.mean_end_to_end_ns
    assert low.negative_span_count == 0
    assert low.mean_queue_delay_ns < backlog.mean_queue_delay_ns
    assert result.low_load_skewed.report.negative_span_count > 0


def test_queueing_rejects_unstable_load(short_config: ExperimentConfig) -> None:
    with pytest.raises(ConfigError, match="stable"):
        run_queueing_control(short_config, backlog_load=1.0)


def test_report_counts_match_trace(short_config: ExperimentConfig) -> None:
    run = run_simulation(short_config.with_skew(SkewProfile.step(5 * MS)))
    stats = violation_stats(extract_spans(run.trace).spans)
    assert stats.negative_count == run.report.negative_span_count
    assert stats.total == run.report.total_spans


def test_run_id_is_deterministic(short_config: ExperimentConfig) -> None:
    report = run_simulation(short_config, "run").report
    assert report.run_id == f"run-{config_digest(short_config)[:12]}"


def test_analyze_reversed_hop() -> None:
    header = TraceFileHeader(clock_note="external")
    analysis = analyze_trace(header, reversed_inference_trace())
    assert analysis.verdict == "violated"
    assert analysis.report.negative_span_count == 1
    assert analysis.report.negative_spans_per_edge["preprocess->inference"] == 1
    assert analysis.external


def test_analyze_baseline_trace(short_config: ExperimentConfig) -> None:
    run = run_baseline(short_config)
    analysis = analyze_trace(TraceFileHeader(), run.trace)
    assert analysis.verdict == "preserved"
    assert analysis.report.negative_span_count == 0
    assert analysis.untrusted_spans == 0
    assert analysis.report.delta_t_min_stats is not None


@pytest.mark.parametrize(("window_s", "tick_s"), [(30.0, 0.0), (0.0, 1.0), (-1.0, 1.0)])
def test_analyze_rejects_non_positive_durations(window_s: float, tick_s: float) -> None:
    with pytest.raises(ConfigError, match="must be positive"):
        analyze_trace(
            TraceFileHeader(),
            reversed_inference_trace(),
            window_s=window_s,
            tick_s=tick_s,
        )


@pytest.mark.parametrize(
    ("stage", "magnitude_ns", "edge"),
    [
        ("producer", 5 * MS, "producer->preprocess"),
        ("preprocess", 5 * MS, "preprocess->inference"),
        ("inference", 5 * MS, "inference->postprocess"),
        ("postprocess", 5 * MS, "postprocess->observer"),
        ("observer", -5 * MS, "postprocess->observer"),
    ],
)
def test_violation_series_counts_every_edge(
    short_config: ExperimentConfig,
    stage: str,
    magnitude_ns: int,
    edge: str,
) -> None:
    skew = SkewProfile.step(magnitude_ns, stage=stage)
    report = run_simulation(short_config.with_skew(skew)).report
    assert report.negative_spans_per_edge[edge] > 0
    assert sum(n for _, n in report.violation_series) == report.negative_span_count
