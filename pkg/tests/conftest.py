"""Shared test fixtures."""

from __future__ import annotations

from typing import TYPE_CHECKING

import pytest

from skewscope import constants
from skewscope.causality.models import TraceEvent
from skewscope.experiments import ExperimentConfig, load_config
from skewscope.pipeline import WorkloadConfig
from skewscope.trace_io import TraceFileHeader, write_trace


if TYPE_CHECKING:
    from pathlib import Path

MS = constants.NS_PER_MS
S = constants.NS_PER_S


def make_event(
    stage: str,
    kind: str,
    wall: int,
    *,
    request: str = "r1",
    seq: int = 0,
    true: int | None = None,
) -> TraceEvent:
    return TraceEvent(
        event_id=f"{stage}:{seq}",
        request_id=request,
        stage_id=stage,
        kind=kind,  # type: ignore[arg-type]
        wall_ts_ns=wall,
        true_ts_ns=true,
        seq=seq,
    )


def reversed_inference_trace() -> list[TraceEvent]:
    """Three hops stamped 100 -> 105 -> 95 -> 110: the middle hop runs backwards."""
    return [
        make_event("producer", "send", 100),
        make_event("preprocess", "recv", 105),
        make_event("preprocess", "send", 105, seq=1),
        make_event("inference", "recv", 95),
        make_event("inference", "send", 95, seq=1),
        make_event("postprocess", "recv", 110),
    ]


@pytest.fixture
def default_config() -> ExperimentConfig:
    """The packaged reference calibration."""
    return load_config("default")


@pytest.fixture
def short_config(default_config: ExperimentConfig) -> ExperimentConfig:
    """Reference calibration over 10 simulated seconds."""
    return default_config.with_overrides(run_duration_s=10.0, drain_s=2.0)


@pytest.fixture
def deterministic_config(default_config: ExperimentConfig) -> ExperimentConfig:
    """10 requests/s at exact spacing."""
    workload = WorkloadConfig(arrival_rate=10.0, arrival_process="deterministic")
    return default_config.with_overrides(workload=workload)


@pytest.fixture
def external_trace_file(tmp_path: Path) -> Path:
    """Hand-made external trace containing one reversed hop."""
    path = tmp_path / "external.jsonl"
    header = TraceFileHeader(run_id="hand-made", clock_note="external")
    write_trace(path, reversed_inference_trace(), header)
    return path
