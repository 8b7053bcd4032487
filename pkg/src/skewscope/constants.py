from __future__ import annotations

import logging
from typing import Final, Literal


StageId = Literal["producer", "preprocess", "inference", "postprocess", "observer"]
Edge = tuple[str, str]

NS_PER_MS: Final = 1_000_000
NS_PER_S: Final = 1_000_000_000

# Pipeline order is fixed: request production through observation.
STAGES: Final[tuple[StageId, ...]] = (
    "producer",
    "preprocess",
    "inference",
    "postprocess",
    "observer",
)
EDGES: Final[tuple[Edge, ...]] = tuple(zip(STAGES, STAGES[1:]))
DOMINANT_EDGE: Final[Edge] = ("inference", "postprocess")
SKEWED_STAGE: Final[StageId] = "inference"
EVALUATION_STAGE: Final[StageId] = "observer"

# Skew points of the reference sweep, in ms.
DEFAULT_SKEWS_MS: Final = (0, 1, 2, 3, 5, 10, 50)
FINE_SKEWS_US: Final = tuple(range(0, 6_001, 250))
DELTA_T_MIN_QUANTILES: Final = (0.001, 0.01, 0.05)

DEFAULT_HEALTH_WINDOW_S: Final = 30
DEFAULT_METRIC_TICK_S: Final = 1
DEFAULT_BASELINE_TOLERANCE_NS: Final = 1 * NS_PER_MS
JITTER_TRUNCATION_SIGMAS: Final = 4.0

TRACE_FORMAT_VERSION: Final = 1
DEFAULT_CONFIG_NAME: Final = "default"
RESOLVED_CONFIG_NAME: Final = "resolved_config.yml"

EXIT_OK: Final = 0
EXIT_FAILURE: Final = 1
EXIT_USAGE: Final = 2

LOG_LEVELS: dict[str, int] = {
    "debug": logging.DEBUG,
    "info": logging.INFO,
    "warning": logging.WARNING,
    "error": logging.ERROR,
}
