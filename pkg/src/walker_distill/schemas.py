"""Declarative run configuration for the full experiment matrix."""

from enum import Enum
from pathlib import Path
from typing import Annotated, Any

from omegaconf import OmegaConf
from pydantic import BaseModel, Field, model_validator

from .amp.schemas import AMPConfig
from .dataset.schemas import DatasetConfig
from .diffusion.schemas import DiffusionConfig, DPTrainConfig
from .errors import ConfigurationError
from .motion import GaitParams
from .randomization.schemas import OmegaRange, SetupId, TerrainParams
from .randomization.setups import EVALUATION_SPEED, TargetKind
from .seeding import config_hash
from .sim.schemas import RobotModel, SimConfig, TerminationLimits


class ExpertSource(str, Enum):
    AMP = "amp"
    SCRIPTED = "scripted"


class ExpertStageConfig(BaseModel):
    source: Annotated[
        ExpertSource, Field(description="train an AMP expert, or replay the reference gait")
    ] = ExpertSource.AMP
    checkpoint: Annotated[
        str | None, Field(description="use an existing expert checkpoint instead of training")
    ] = None
    evaluate: Annotated[bool, Field(description="also evaluate the expert on every target")] = True


class EvaluationConfig(BaseModel):
    targets: list[TargetKind] = [TargetKind.FIXED, TargetKind.RANDOMIZED]
    episodes: Annotated[int, Field(ge=1)] = 100
    episode_steps: Annotated[int, Field(ge=1)] = 500
    command: float = EVALUATION_SPEED
    seeds: Annotated[list[int], Field(min_length=1, description="environment seeds")] = [0]
    record_trajectories: bool = False

    @model_validator(mode="after")
    def _check(self) -> "EvaluationConfig":
        if not self.targets or len(set(self.targets)) != len(self.targets):
            raise ValueError("targets must be non-empty and distinct")
        return self


class RunConfig(BaseModel):
    master_seed: int = 0
    output_root: Annotated[
        str | None, Field(description="defaults to the WALKER_DISTILL_OUTPUT_ROOT setting")
    ] = None
    robot: RobotModel = RobotModel()
    sim: SimConfig = SimConfig()
    limits: TerminationLimits = TerminationLimits()
    gait: GaitParams = GaitParams()
    terrain: TerrainParams = TerrainParams()
    omega_range: OmegaRange = OmegaRange.ZERO
    expert: ExpertStageConfig = ExpertStageConfig()
    amp: AMPConfig = AMPConfig()
    setups: list[SetupId] = list(SetupId)
    dataset: DatasetConfig = DatasetConfig()
    diffusion: DiffusionConfig = DiffusionConfig()
    dp_train: DPTrainConfig = DPTrainConfig()
    dp_seeds: Annotated[list[int], Field(min_length=1)] = [0, 1, 2]
    evaluation: EvaluationConfig = EvaluationConfig()

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        if not self.setups or len(set(self.setups)) != len(self.setups):
            raise ValueError("setups must be non-empty and distinct")
        if len(set(self.dp_seeds)) != len(self.dp_seeds):
            raise ValueError("dp_seeds must be distinct")
        sizes = self.dataset.resolved_sizes()
        if len(set(sizes)) != len(sizes):
            raise ValueError("dataset sizes must be distinct")
        return self

    def config_hash(self) -> str:
        return config_hash(self.model_dump(mode="json", exclude={"output_root"}))

    @property
    def run_id(self) -> str:
        return self.config_hash()[:12]


def load_run_config(
    path: str | Path | None = None,
    overrides: list[str] | None = None,
    extra: dict[str, Any] | None = None,
) -> RunConfig:
    """Load a YAML run config, merge ``extra`` and ``key=value`` dotlist overrides, validate."""
    base = OmegaConf.load(path) if path is not None else OmegaConf.create({})
    if extra:
        base = OmegaConf.merge(base, OmegaConf.create(extra))
    if overrides:
        base = OmegaConf.merge(base, OmegaConf.from_dotlist(overrides))
    data = OmegaConf.to_container(base, resolve=True)
    try:
        return RunConfig.model_validate(data or {})
    except ValueError as exc:
        raise ConfigurationError(f"Invalid run config {path}: {exc}") from exc
