"""Planar biped simulator: dynamics, PD control, contact, observations, termination."""

from .control import (
    check_termination,
    compute_observation,
    pd_torques,
    projected_gravity,
    terrain_height,
)
from .dynamics import ModelArrays, TerrainArrays, mechanical_energy
from .env import AMP_FEATURE_DIM, EpisodeSource, EpisodeSpec, VecStep, VecWalkerEnv
from .schemas import (
    ACTOR_OBS_DIM,
    COMMAND_DIM,
    COMMAND_SLICE,
    NUM_COORDS,
    NUM_JOINTS,
    PRIVILEGED_OBS_DIM,
    Command,
    ContactReport,
    RobotModel,
    SimConfig,
    SimState,
    Terrain,
    TerminationLimits,
    TerrainKind,
)
from .step import StepResult, forward_dynamics, ground_clearance_height, step

__all__ = [
    "ACTOR_OBS_DIM",
    "AMP_FEATURE_DIM",
    "COMMAND_DIM",
    "COMMAND_SLICE",
    "NUM_COORDS",
    "NUM_JOINTS",
    "PRIVILEGED_OBS_DIM",
    "Command",
    "ContactReport",
    "EpisodeSource",
    "EpisodeSpec",
    "ModelArrays",
    "RobotModel",
    "SimConfig",
    "SimState",
    "StepResult",
    "Terrain",
    "TerrainArrays",
    "TerrainKind",
    "TerminationLimits",
    "VecStep",
    "VecWalkerEnv",
    "check_termination",
    "compute_observation",
    "forward_dynamics",
    "ground_clearance_height",
    "mechanical_energy",
    "pd_torques",
    "projected_gravity",
    "step",
    "terrain_height",
]
