"""Tests for report rendering."""

from __future__ import annotations

import csv
from typing import TYPE_CHECKING

import pytest

from skewscope.clocks import SkewProfile
from skewscope.exceptions import ConfigError
from skewscope.experiments import (
    emit_report,
    emit_sweep_summary,
    load_report,
    run_baseline,
    run_simulation,
    run_sweep,
)
from skewscope.experiments.report import (
    HEALTH_FILE,
    REPORT_FILE,
    SWEEP_SUMMARY_FILE,
    TIMESERIES_FILE,
)

from .conftest import MS


if TYPE_CHECKING:
    from pathlib import Path

    from skewscope.experiments import ExperimentConfig


def _rows(path: Path) -> list[dict[str, str]]:
    with path.open(newline="") as f:
        return list(csv.DictReader(f))


def test_emit_both_formats(tmp_path: Path, short_config: ExperimentConfig) -> None:
    report = run_baseline(short_config).report
    written = emit_report(report, tmp_path)
    assert sorted(p.name for p in written) == sorted(
        [REPORT_FILE, TIMESERIES_FILE, HEALTH_FILE]
    )
    health = _rows(tmp_path / HEALTH_FILE)
    assert health
    assert {row["causality_health"] for row in health} == {"1"}
    series = _rows(tmp_path / TIMESERIES_FILE)
    assert sum(int(row["tokens"]) for row in series) == report.total_tokens


def test_structured_only(tmp_path: Path, short_config: ExperimentConfig) -> None:
    report = run_simulation(short_config).report
    (path,) = emit_report(report, tmp_path, "structured")
    assert path.name == REPORT_FILE
    assert not (tmp_path / HEALTH_FILE).exists()


def test_report_reloads(tmp_path: Path, short_config: ExperimentConfig) -> None:
    report = run_baseline(short_config).report
    emit_report(report, tmp_path, "structured")
    reloaded = load_report(tmp_path / REPORT_FILE)
    assert reloaded == report
    assert reloaded.delta_t_min_stats is not None
    dominant = reloaded.delta_t_min_stats["inference->postprocess"]
    assert len(dominant.samples) == dominant.sample_count > 0


def test_re_emit_is_byte_identical(
    tmp_path: Path,
    short_config: ExperimentConfig,
) -> None:
    report = run_simulation(short_config.with_skew(SkewProfile.step(5 * MS))).report
    first = {p.name: p.read_bytes() for p in emit_report(report, tmp_path / "a")}
    reloaded = load_report(tmp_path / "a" / REPORT_FILE)
    second = {p.name: p.read_bytes() for p in emit_report(reloaded, tmp_path / "b")}
    assert first == second


def test_same_config_same_files(tmp_path: Path, short_config: ExperimentConfig) -> None:
    def render(out: Path) -> dict[str, bytes]:
        report = run_simulation(short_config).report
        return {p.name: p.read_bytes() for p in emit_report(report, out)}

    assert render(tmp_path / "a") == render(tmp_path / "b")


def test_sweep_summary_ascending(tmp_path: Path, short_config: ExperimentConfig) -> None:
    rows = run_sweep(short_config, [10 * MS, 0, 2 * MS]).rows
    path = emit_sweep_summary(list(reversed(rows)), tmp_path)
    assert path.name == SWEEP_SUMMARY_FILE
    table = _rows(path)
    assert [int(r["skew_ns"]) for r in table] == [0, 2 * MS, 10 * MS]
    assert all(r["negative_span_count"] == r["predicted_violations"] for r in table)


def test_missing_report(tmp_path: Path) -> None:
    with pytest.raises(ConfigError, match="not found"):
        load_report(tmp_path / REPORT_FILE)


def test_invalid_report(tmp_path: Path) -> None:
    path = tmp_path / REPORT_FILE
    path.write_text('{"run_id": "x"}')
    with pytest.raises(ConfigError, match="Invalid report"):
        load_report(path)
