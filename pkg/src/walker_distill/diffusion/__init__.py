"""Diffusion policy: noise schedule, denoiser, training and receding-horizon control."""

from .model import DenoiserModel, SinusoidalTimestepEmbedding
from .normalize import NormalizationStats, denormalize, normalize
from .policy import (
    DIFFUSION_KIND,
    ControllerState,
    DiffusionPolicyArtifact,
    receding_horizon_act,
    sample_actions,
)
from .schedule import NoiseSchedule, build_noise_schedule, forward_noising
from .schemas import DiffusionConfig, DPTrainConfig, ScheduleKind
from .trainer import WindowDataset, WindowIndex, previous_actions, train_dp, training_step

__all__ = [
    "DIFFUSION_KIND",
    "ControllerState",
    "DPTrainConfig",
    "DenoiserModel",
    "DiffusionConfig",
    "DiffusionPolicyArtifact",
    "NoiseSchedule",
    "NormalizationStats",
    "ScheduleKind",
    "SinusoidalTimestepEmbedding",
    "WindowDataset",
    "WindowIndex",
    "build_noise_schedule",
    "denormalize",
    "forward_noising",
    "normalize",
    "previous_actions",
    "receding_horizon_act",
    "sample_actions",
    "train_dp",
    "training_step",
]
