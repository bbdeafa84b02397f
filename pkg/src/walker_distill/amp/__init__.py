"""Expert training: actor-critic with a style discriminator under full randomization."""

from ..motion import GaitParams, MotionClip, MotionLibrary, generate_reference_clips
from .artifact import EXPERT_KIND, PolicyArtifact
from .discriminator import discriminator_loss, discriminator_update
from .networks import CriticNet, Discriminator, PolicyNet, RunningMeanStd
from .ppo import RolloutBuffer, clipped_surrogate, compute_gae, normalize_advantages, ppo_update
from .rewards import (
    regularization_reward,
    style_reward,
    task_reward,
    transition_features,
)
from .schemas import AMPConfig, RewardWeights
from .scripted import ScriptedGaitPolicy
from .trainer import checkpoint_score, default_env_factory, train

__all__ = [
    "EXPERT_KIND",
    "AMPConfig",
    "CriticNet",
    "Discriminator",
    "GaitParams",
    "MotionClip",
    "MotionLibrary",
    "PolicyArtifact",
    "PolicyNet",
    "RewardWeights",
    "RolloutBuffer",
    "RunningMeanStd",
    "ScriptedGaitPolicy",
    "checkpoint_score",
    "clipped_surrogate",
    "compute_gae",
    "default_env_factory",
    "discriminator_loss",
    "discriminator_update",
    "generate_reference_clips",
    "normalize_advantages",
    "ppo_update",
    "regularization_reward",
    "style_reward",
    "task_reward",
    "train",
    "transition_features",
]
