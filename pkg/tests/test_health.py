"""Tests for the rolling causality_health signal."""

from __future__ import annotations

import numpy as np
import pytest

from skewscope.causality import HealthState, annotate_trust, replay_health, update_health
from skewscope.causality.health import first_recovery
from skewscope.causality.models import SpanRecord

from .conftest import S


WINDOW = 30 * S


def _brute_force(violations: list[int], tick: int, window: int) -> int:
    return 0 if any(tick - window < v <= tick for v in violations) else 1


def test_no_violations_stays_healthy() -> None:
    hs = HealthState(window_ns=WINDOW)
    for tick in range(S, 120 * S, S):
        hs = update_health(hs, tick)
        assert hs.health == 1


def test_single_violation_window() -> None:
    hs = HealthState(window_ns=WINDOW)
    seen = {}
    for second in range(1, 61):
        hs = update_health(hs, second * S, 1 if second == 10 else 0)  # noqa: PLR2004
        seen[second] = hs.health
    assert all(seen[s] == 1 for s in range(1, 10))
    assert all(seen[s] == 0 for s in range(10, 40))
    assert all(seen[s] == 1 for s in range(40, 61))


def test_time_regression_rejected() -> None:
    hs = update_health(HealthState(window_ns=WINDOW), 10)
    with pytest.raises(ValueError, match="backwards"):
        update_health(hs, 9)


def test_future_violation_rejected() -> None:
    with pytest.raises(ValueError, match="after"):
        update_health(HealthState(window_ns=WINDOW), 10, [11])


def test_window_is_half_open() -> None:
    hs = update_health(HealthState(window_ns=10), 5, [5])
    assert update_health(hs, 14).health == 0
    assert update_health(hs, 15).health == 1


def test_state_stays_bounded() -> None:
    hs = HealthState(window_ns=10)
    for t in range(1_000):
        hs = update_health(hs, t, 1)
    assert len(hs.violation_times) <= 10  # noqa: PLR2004


def test_matches_window_scan_on_random_streams() -> None:
    rng = np.random.default_rng(2024)
    for _ in range(1_000):
        window = int(rng.integers(1, 50))
        ticks = np.unique(rng.integers(0, 200, size=int(rng.integers(1, 40))))
        count = int(rng.integers(0, 30))
        violations = sorted(int(v) for v in rng.integers(0, 200, size=count))
        hs = HealthState(window_ns=window)
        consumed = 0
        for tick in ticks.tolist():
            due = [v for v in violations[consumed:] if v <= tick]
            consumed += len(due)
            hs = update_health(hs, tick, due)
            assert hs.health == _brute_force(violations, tick, window)


def test_replay_matches_window_scan() -> None:
    rng = np.random.default_rng(5)
    violations = sorted(int(v) for v in rng.integers(0, 100 * S, size=25))
    ticks = list(range(S, 100 * S + 1, S))
    timeline = replay_health(violations, ticks, WINDOW)
    assert timeline == [(t, _brute_force(violations, t, WINDOW)) for t in ticks]


def test_first_recovery() -> None:
    assert first_recovery([(1, 1), (2, 1)]) is None
    assert first_recovery([(1, 0), (2, 0), (3, 1), (4, 1)]) == 3  # noqa: PLR2004
    assert first_recovery([(1, 1), (2, 0)]) is None


def test_annotate_trust() -> None:
    def span(span_ns: int, at: int) -> SpanRecord:
        return SpanRecord(("a", "b"), "r", span_ns, "s", "r", recv_wall_ts_ns=at)

    spans = [span(4, 1 * S), span(-1, 5 * S), span(3, 20 * S), span(6, 40 * S)]
    trusted = [ok for _, ok in annotate_trust(spans, 30 * S)]
    assert trusted == [True, False, False, True]
