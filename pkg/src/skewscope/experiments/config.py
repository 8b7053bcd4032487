"""Experiment configuration: models, loading, digests."""

from __future__ import annotations

import hashlib
from typing import TYPE_CHECKING, Any, Self

import anyenv
from pydantic import Field, ValidationError, model_validator
from upath import UPath
import yaml

from skewscope import constants
from skewscope.clocks import ClockModel, SkewProfile, apply_skew_profile
from skewscope.config_resources import NAMED_CONFIGS
from skewscope.exceptions import ConfigError, SkewScopeError
from skewscope.log import get_logger
from skewscope.pipeline import StageConfig, WorkloadConfig, service_rate
from skewscope.schema import BaseSchema
from skewscope.transport import LinkModel, LognormalLatency


if TYPE_CHECKING:
    from upath import JoinablePathLike

    from skewscope.constants import Edge

logger = get_logger(__name__)


def _default_stages() -> list[StageConfig]:
    return [
        StageConfig(stage_id="producer", base_service_ns=100_000),
        StageConfig(stage_id="preprocess", base_service_ns=5 * constants.NS_PER_MS),
        StageConfig(
            stage_id="inference",
            base_service_ns=200 * constants.NS_PER_MS,
            per_token_ns=1 * constants.NS_PER_MS,
        ),
        StageConfig(stage_id="postprocess", base_service_ns=2 * constants.NS_PER_MS),
        StageConfig(stage_id="observer", base_service_ns=500_000),
    ]


def _default_links() -> list[LinkModel]:
    links = []
    for edge in constants.EDGES:
        if edge == constants.DOMINANT_EDGE:
            floor, dist = 3_500_000, LognormalLatency(median_ns=4_500_000, sigma=1.0)
        else:
            floor, dist = 1_000_000, LognormalLatency(median_ns=1_500_000, sigma=0.5)
        links.append(LinkModel(edge=edge, floor_ns=floor, dist=dist))
    return links


class ExperimentConfig(BaseSchema):
    """Everything needed to reproduce one simulated run."""

    seed: int = 0
    """Seed shared by workload, latency and jitter streams."""

    run_duration_s: float = Field(default=60.0, ge=0)
    """Requests are produced during [0, run_duration_s)."""

    drain_s: float = Field(default=5.0, ge=0)
    """Extra simulated time for in-flight requests to complete."""

    workload: WorkloadConfig = Field(default_factory=WorkloadConfig)
    """Arrival process and token counts."""

    stages: list[StageConfig] = Field(default_factory=_default_stages)
    """Service models of the five stages, in pipeline order."""

    links: list[LinkModel] = Field(default_factory=_default_links)
    """Latency models of the four adjacent-stage edges."""

    clocks: list[ClockModel] = Field(default_factory=list)
    """Clock models; stages without an entry get an ideal clock."""

    skew: SkewProfile = Field(default_factory=SkewProfile)
    """Injected skew."""

    health_window_s: float = Field(default=constants.DEFAULT_HEALTH_WINDOW_S, gt=0)
    """Rolling window of the causality_health signal."""

    metric_tick_s: float = Field(default=constants.DEFAULT_METRIC_TICK_S, gt=0)
    """Cadence of metric ticks and health evaluation."""

    baseline_tolerance_ns: int = Field(
        default=constants.DEFAULT_BASELINE_TOLERANCE_NS, gt=0
    )
    """Largest pairwise clock offset accepted before a baseline run."""

    @model_validator(mode="after")
    def _check_topology(self) -> Self:
        ids = tuple(stage.stage_id for stage in self.stages)
        if ids != constants.STAGES:
            msg = f"Expected stages {list(constants.STAGES)} in order, got {list(ids)}"
            raise ValueError(msg)
        edges = [link.edge for link in self.links]
        if sorted(edges) != sorted(constants.EDGES):
            msg = f"Links must cover exactly {list(constants.EDGES)}, got {edges}"
            raise ValueError(msg)
        nodes = [clock.node_id for clock in self.clocks]
        if unknown := sorted(set(nodes) - set(constants.STAGES)):
            msg = f"Clocks configured for unknown stages: {unknown}"
            raise ValueError(msg)
        if len(nodes) != len(set(nodes)):
            msg = f"Duplicate clock entries: {nodes}"
            raise ValueError(msg)
        if self.skew.target_stage not in constants.STAGES:
            msg = f"Unknown stage for skew injection: {self.skew.target_stage!r}"
            raise ValueError(msg)
        return self

    @property
    def run_duration_ns(self) -> int:
        return round(self.run_duration_s * constants.NS_PER_S)

    @property
    def horizon_ns(self) -> int:
        return self.run_duration_ns + round(self.drain_s * constants.NS_PER_S)

    @property
    def tick_ns(self) -> int:
        return round(self.metric_tick_s * constants.NS_PER_S)

    @property
    def window_ns(self) -> int:
        return round(self.health_window_s * constants.NS_PER_S)

    @property
    def inference_service_rate(self) -> float:
        """μ of the inference stage in requests per second."""
        return service_rate(self.stage(constants.SKEWED_STAGE), self.workload.tokens)

    def stage(self, stage_id: str) -> StageConfig:
        return next(s for s in self.stages if s.stage_id == stage_id)

    def link(self, edge: Edge) -> LinkModel:
        return next(link for link in self.links if link.edge == edge)

    def base_clocks(self) -> dict[str, ClockModel]:
        """Configured clocks before skew injection, jitter seeded from the run seed."""
        configured = {clock.node_id: clock for clock in self.clocks}
        result = {}
        for stage_id in constants.STAGES:
            model = configured.get(stage_id, ClockModel(node_id=stage_id))
            seed = (self.seed << 16) ^ model.seed
            result[stage_id] = model.model_copy(update={"seed": seed})
        return result

    def clock_models(self) -> dict[str, ClockModel]:
        """Clocks with the skew profile applied."""
        return apply_skew_profile(self.base_clocks(), self.skew)

    def with_overrides(self, **updates: Any) -> Self:
        """Validated copy with top-level fields replaced (None values ignored)."""
        data = self.model_dump()
        data.update({k: v for k, v in updates.items() if v is not None})
        try:
            return type(self).model_validate(data)
        except ValidationError as exc:
            msg = f"Invalid configuration override: {exc}"
            raise ConfigError(msg) from exc

    def with_skew(self, skew: SkewProfile) -> Self:
        return self.model_copy(update={"skew": skew})

    def with_arrival_rate(self, arrival_rate: float) -> Self:
        workload = self.workload.model_copy(update={"arrival_rate": arrival_rate})
        return self.model_copy(update={"workload": workload})


def _canonical(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _canonical(value[k]) for k in sorted(value, key=str)}
    if isinstance(value, list | tuple):
        return [_canonical(v) for v in value]
    return value


def config_digest(cfg: ExperimentConfig) -> str:
    """Hex SHA-256 of the canonical, fully-defaulted config."""
    canonical = anyenv.dump_json(_canonical(cfg.model_dump(mode="json")))
    return hashlib.sha256(canonical.encode()).hexdigest()


def resolve_config_path(source: JoinablePathLike) -> UPath:
    """Map packaged config names ("default", ...) to files."""
    if isinstance(source, str) and source in NAMED_CONFIGS:
        return UPath(NAMED_CONFIGS[source])
    return UPath(source)


def load_config(
    source: JoinablePathLike = constants.DEFAULT_CONFIG_NAME,
) -> ExperimentConfig:
    """Load an experiment config from YAML/JSON.

    Args:
        source: File path, or the name of a packaged config

    Raises:
        ConfigError: If the file is missing, unparsable or invalid
    """
    path = resolve_config_path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        msg = f"Config file not found: {path}"
        raise ConfigError(msg) from exc
    except OSError as exc:
        msg = f"Failed to read config {path}: {exc}"
        raise ConfigError(msg) from exc
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        msg = f"Config {path} is not valid YAML/JSON: {exc}"
        raise ConfigError(msg) from exc
    if not isinstance(data, dict):
        msg = f"Config {path} must contain a mapping at top level"
        raise ConfigError(msg)
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        msg = f"Invalid config {path}: {exc}"
        raise ConfigError(msg) from exc
    logger.debug("Loaded config %s (seed=%d)", path, cfg.seed)
    return cfg


def dump_config(cfg: ExperimentConfig, path: JoinablePathLike) -> UPath:
    """Write the resolved, fully-defaulted config as YAML."""
    target = UPath(path)
    text = yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")
    except OSError as exc:
        msg = f"Failed to write config {target}: {exc}"
        raise SkewScopeError(msg) from exc
    return target
