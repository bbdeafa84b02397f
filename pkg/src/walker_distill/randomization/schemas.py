"""Randomization setups, ranges and draws."""

from dataclasses import dataclass
from enum import Enum
from typing import Annotated

from pydantic import BaseModel, Field, model_validator

from ..sim.schemas import TerrainKind

Range = tuple[float, float]


class SetupId(str, Enum):
    NONE = "none"
    DYNAMICS = "dynamics"
    PERTURBATIONS = "perturbations"
    TERRAIN = "terrain"
    SCALES = "scales"
    INIT_STATE = "init_state"
    TERRAIN_PERTURB = "terrain_perturb"
    ALL = "all"


class RangeProfile(str, Enum):
    TRAINING = "training"
    EVALUATION = "evaluation"


class OmegaRange(str, Enum):
    """Pitch-rate command sampling: fixed at zero, or the full turning range."""

    ZERO = "zero"
    FULL = "full"


def _check_range(name: str, value: Range) -> None:
    lo, hi = value
    if lo > hi:
        raise ValueError(f"{name} range needs low <= high, got ({lo}, {hi})")


class DynamicsRanges(BaseModel):
    body_friction: Range = (0.7, 1.3)
    added_base_mass: Annotated[Range, Field(description="kg added to the torso")] = (-2.0, 2.0)
    link_mass_multiplier: Range = (0.8, 1.2)
    pd_gain_multiplier: Range = (0.8, 1.2)
    com_displacement: Annotated[Range, Field(description="m along the torso axis")] = (
        -0.15,
        0.15,
    )
    joint_friction: Range = (0.01, 1.15)
    joint_damping: Range = (0.3, 1.5)

    @model_validator(mode="after")
    def _check(self) -> "DynamicsRanges":
        for name, value in self:
            _check_range(name, value)
        return self


class PerturbationConfig(BaseModel):
    max_speed: Annotated[float, Field(ge=0.0, description="m/s kick magnitude cap")] = 0.6
    interval_s: Annotated[float, Field(gt=0.0, description="s between kicks")] = 3.0


class TerrainParams(BaseModel):
    length: Annotated[float, Field(gt=0.0, description="m of heightfield")] = 40.0
    origin: Annotated[float, Field(description="m, x of the first sample")] = -5.0
    spacing: Annotated[float, Field(gt=0.0, description="m between samples")] = 0.05
    amplitude: Annotated[float, Field(ge=0.0, description="m, bumpy peak height")] = 0.05
    smoothing: Annotated[float, Field(gt=0.0, description="gaussian sigma in samples")] = 4.0
    step_height: Annotated[float, Field(ge=0.0, description="m, obstacle max height")] = 0.08
    min_step_length: Annotated[float, Field(gt=0.0)] = 0.3
    max_step_length: Annotated[float, Field(gt=0.0)] = 1.0
    spawn_clearance: Annotated[
        float, Field(ge=0.0, description="m of flat ground on each side of x = 0")
    ] = 1.0

    @model_validator(mode="after")
    def _check(self) -> "TerrainParams":
        if self.min_step_length > self.max_step_length:
            raise ValueError("min_step_length must not exceed max_step_length")
        return self


class InitStateConfig(BaseModel):
    use_reference: Annotated[
        bool, Field(description="reference-state init; otherwise the nominal standing pose")
    ] = True
    noise_probability: Annotated[float, Field(ge=0.0, le=1.0)] = 0.5
    joint_pos_range: Annotated[float, Field(ge=0.0, description="rad")] = 0.2
    joint_vel_range: Annotated[float, Field(ge=0.0, description="rad/s")] = 0.5
    standing_probability: Annotated[
        float,
        Field(ge=0.0, le=1.0, description="share of episodes starting from the standing pose"),
    ] = 0.1


class CommandRanges(BaseModel):
    v_x: Range = (-1.0, 1.0)
    omega: Range = (0.0, 0.0)

    @model_validator(mode="after")
    def _check(self) -> "CommandRanges":
        _check_range("v_x", self.v_x)
        _check_range("omega", self.omega)
        return self


class ClusterFlags(BaseModel):
    dynamics: bool = False
    perturbations: bool = False
    terrain: bool = False
    scales: bool = False
    init_state: bool = False


class RandomizationConfig(BaseModel):
    """Fully resolved per-episode randomization for one setup and range profile."""

    setup_id: SetupId = SetupId.NONE
    range_profile: RangeProfile = RangeProfile.TRAINING
    flags: ClusterFlags = ClusterFlags()
    dynamics_ranges: DynamicsRanges = DynamicsRanges()
    perturbation: PerturbationConfig = PerturbationConfig()
    terrain_kinds: list[TerrainKind] = [TerrainKind.FLAT]
    terrain_params: TerrainParams = TerrainParams()
    scale_choices: list[float] = [1.0]
    init_state: InitStateConfig = InitStateConfig()
    command_ranges: CommandRanges = CommandRanges()

    @model_validator(mode="after")
    def _check(self) -> "RandomizationConfig":
        if not self.scale_choices or any(k <= 0 for k in self.scale_choices):
            raise ValueError("scale_choices must be non-empty and strictly positive")
        if not self.terrain_kinds:
            raise ValueError("terrain_kinds must not be empty")
        return self


@dataclass(frozen=True)
class DynamicsDraw:
    body_friction: float
    added_base_mass: float
    link_mass_multiplier: float
    pd_gain_multiplier: float
    com_displacement: float
    joint_friction: float
    joint_damping: float
