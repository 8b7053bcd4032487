"""Tests for the simulated inference pipeline."""

from __future__ import annotations

from typing import TYPE_CHECKING

from pydantic import ValidationError
import pytest

from skewscope.clocks import SkewProfile
from skewscope.experiments import simulate
from skewscope.pipeline import StageConfig, TokenSpec, WorkloadConfig, service_rate

from .conftest import MS, S


if TYPE_CHECKING:
    from skewscope.experiments import ExperimentConfig


def _events(trace, stage: str, kind: str):  # type: ignore[no-untyped-def]
    return [e for e in trace if e.stage_id == stage and e.kind == kind]


def test_inference_service_time() -> None:
    stage = StageConfig(stage_id="inference", base_service_ns=200 * MS, per_token_ns=MS)
    assert stage.service_time(56) == 256 * MS
    assert service_rate(stage, TokenSpec(lo=56)) == pytest.approx(1 / 0.256)


def test_stage_needs_positive_service_time() -> None:
    with pytest.raises(ValidationError, match="positive service time"):
        StageConfig(stage_id="observer")


def test_streaming_rejected() -> None:
    with pytest.raises(ValidationError, match="streaming"):
        WorkloadConfig(streaming=True)


def test_token_range() -> None:
    with pytest.raises(ValidationError):
        TokenSpec(lo=10, hi=5)
    assert TokenSpec(lo=10, hi=20).mean == 15  # noqa: PLR2004


def test_deterministic_arrivals_are_evenly_spaced(
    deterministic_config: ExperimentConfig,
) -> None:
    result = simulate(deterministic_config)
    sends = _events(result.trace, "producer", "send")
    assert result.metrics.produced == 600  # noqa: PLR2004
    assert [e.true_ts_ns for e in sends[:3]] == [0, 100 * MS, 200 * MS]
    gaps = {b.true_ts_ns - a.true_ts_ns for a, b in zip(sends, sends[1:])}
    assert gaps == {100 * MS}


def test_exponential_request_count_reproducible(default_config: ExperimentConfig) -> None:
    workload = WorkloadConfig(arrival_rate=10.0)
    cfg = default_config.with_overrides(workload=workload, drain_s=0.0)
    assert simulate(cfg).metrics.produced == simulate(cfg).metrics.produced


def test_zero_duration_run(default_config: ExperimentConfig) -> None:
    result = simulate(default_config.with_overrides(run_duration_s=0.0, drain_s=1.0))
    assert result.metrics.produced == 0
    assert result.metrics.total_tokens == 0
    assert result.trace == []


def test_token_accounting(default_config: ExperimentConfig) -> None:
    workload = WorkloadConfig(arrival_rate=2.0, arrival_process="deterministic")
    cfg = default_config.with_overrides(workload=workload, run_duration_s=50.0)
    result = simulate(cfg)
    assert result.metrics.produced == 100  # noqa: PLR2004
    assert result.metrics.total_tokens == 5600  # noqa: PLR2004
    assert result.metrics.completed == 100  # noqa: PLR2004
    ticked = sum(tokens for _, tokens in result.metrics.tick_tokens)
    assert ticked == 5600  # noqa: PLR2004


def test_stage_serves_fifo_one_at_a_time(short_config: ExperimentConfig) -> None:
    workload = WorkloadConfig(arrival_rate=8.0)
    result = simulate(short_config.with_overrides(workload=workload))
    starts = _events(result.trace, "inference", "service_start")
    ends = _events(result.trace, "inference", "service_end")
    assert [e.request_id for e in starts] == sorted(e.request_id for e in starts)
    for end, next_start in zip(ends, starts[1:]):
        assert next_start.true_ts_ns >= end.true_ts_ns


def test_every_request_visits_stages_in_order(short_config: ExperimentConfig) -> None:
    result = simulate(short_config)
    by_request: dict[str, list[str]] = {}
    for event in result.trace:
        if event.kind == "recv":
            by_request.setdefault(event.request_id, []).append(event.stage_id)
    expected = ["preprocess", "inference", "postprocess", "observer"]
    completed = [path for path in by_request.values() if len(path) == len(expected)]
    assert len(completed) == result.metrics.completed
    assert all(path == expected for path in completed)


def test_delivery_order_matches_production_order(short_config: ExperimentConfig) -> None:
    metrics = simulate(short_config).metrics
    assert metrics.delivered_order == sorted(metrics.delivered_order)


def test_skew_only_moves_wall_stamps(short_config: ExperimentConfig) -> None:
    plain = simulate(short_config)
    skewed = simulate(short_config.with_skew(SkewProfile.step(50 * MS)))
    assert skewed.metrics.total_tokens == plain.metrics.total_tokens
    assert [e.true_ts_ns for e in skewed.trace] == [e.true_ts_ns for e in plain.trace]
    for a, b in zip(plain.trace, skewed.trace):
        shift = 50 * MS if a.stage_id == "inference" else 0
        assert b.wall_ts_ns - a.wall_ts_ns == shift


def test_live_span_check_sees_negative_spans(short_config: ExperimentConfig) -> None:
    result = simulate(short_config.with_skew(SkewProfile.step(50 * MS)))
    live = result.metrics.live_spans
    per_tick = sum(n for _, n in result.metrics.tick_violations)
    assert per_tick == sum(s.is_violation for s in live) > 0


def test_observer_skew_reaches_live_check(short_config: ExperimentConfig) -> None:
    skew = SkewProfile.step(-5 * MS, stage="observer")
    result = simulate(short_config.with_skew(skew))
    live = [s for s in result.metrics.live_spans if s.is_violation]
    assert live
    assert {s.edge for s in live} == {("postprocess", "observer")}
    assert sum(n for _, n in result.metrics.tick_violations) == len(live)


def test_metric_ticks_cover_horizon(short_config: ExperimentConfig) -> None:
    ticks = [t for t, _ in simulate(short_config).metrics.tick_tokens]
    assert ticks[0] == S
    assert ticks[-1] == short_config.horizon_ns
    assert len(ticks) == short_config.horizon_ns // S
