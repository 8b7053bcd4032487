"""Experiment configs, drivers and reports."""

from __future__ import annotations

from skewscope.experiments.analysis import TraceAnalysis, analyze_trace
from skewscope.experiments.config import (
    ExperimentConfig,
    config_digest,
    dump_config,
    load_config,
)
from skewscope.experiments.report import (
    ExperimentReport,
    SweepRow,
    emit_report,
    emit_sweep_summary,
    load_report,
)
from skewscope.experiments.runner import (
    QueueingResult,
    Run,
    SimulationResult,
    SweepResult,
    build_report,
    run_baseline,
    run_drift_recovery,
    run_queueing_control,
    run_simulation,
    run_sweep,
    simulate,
)

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "QueueingResult",
    "Run",
    "SimulationResult",
    "SweepResult",
    "SweepRow",
    "TraceAnalysis",
    "analyze_trace",
    "build_report",
    "config_digest",
    "dump_config",
    "emit_report",
    "emit_sweep_summary",
    "load_config",
    "load_report",
    "run_baseline",
    "run_drift_recovery",
    "run_queueing_control",
    "run_simulation",
    "run_sweep",
    "simulate",
]
