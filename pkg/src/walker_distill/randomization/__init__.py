"""Per-episode domain randomization: dynamics, kicks, terrain, initial state, scale."""

from .samplers import (
    apply_dynamics,
    apply_scale,
    nominal_draw,
    sample_command,
    sample_dynamics,
    sample_initial_state,
    schedule_perturbation,
    standing_state,
)
from .schemas import (
    ClusterFlags,
    CommandRanges,
    DynamicsDraw,
    DynamicsRanges,
    InitStateConfig,
    OmegaRange,
    PerturbationConfig,
    RandomizationConfig,
    RangeProfile,
    SetupId,
    TerrainParams,
)
from .setups import (
    EVALUATION_RANGES,
    TRAINING_RANGES,
    EpisodeEnvironment,
    EpisodeSampler,
    TargetKind,
    build_setup,
    build_target_env,
)
from .terrain import generate_terrain

__all__ = [
    "EVALUATION_RANGES",
    "TRAINING_RANGES",
    "ClusterFlags",
    "CommandRanges",
    "DynamicsDraw",
    "DynamicsRanges",
    "EpisodeEnvironment",
    "EpisodeSampler",
    "InitStateConfig",
    "OmegaRange",
    "PerturbationConfig",
    "RandomizationConfig",
    "RangeProfile",
    "SetupId",
    "TargetKind",
    "TerrainParams",
    "apply_dynamics",
    "apply_scale",
    "build_setup",
    "build_target_env",
    "generate_terrain",
    "nominal_draw",
    "sample_command",
    "sample_dynamics",
    "sample_initial_state",
    "schedule_perturbation",
    "standing_state",
]
