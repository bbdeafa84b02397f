"""Task, regularization and style rewards.

All functions broadcast over a leading batch axis.
"""

import numpy as np
import torch

from ..sim.control import projected_gravity
from ..sim.dynamics import ModelArrays, TerrainArrays
from ..sim.env import amp_features
from ..sim.schemas import RobotModel, SimState, Terrain
from .schemas import RewardWeights


def task_reward(v_x, v_hat_x, omega, omega_hat, weights: RewardWeights):
    return weights.w_v * np.exp(-np.abs(np.subtract(v_hat_x, v_x))) + weights.w_omega * np.exp(
        -np.abs(np.subtract(omega_hat, omega))
    )


def _norm(x: np.ndarray, squared: bool) -> np.ndarray:
    sq = np.sum(np.square(x), axis=-1)
    return sq if squared else np.sqrt(sq)


def regularization_terms(
    joint_pos: np.ndarray,
    joint_vel: np.ndarray,
    joint_acc: np.ndarray,
    gravity: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    weights: RewardWeights,
) -> dict[str, np.ndarray]:
    """Individually weighted regularization terms (each <= 0)."""
    squared = weights.squared_norms
    return {
        "joint_upper_limit": weights.joint_upper_limit
        * np.sum(np.maximum(joint_pos - upper, 0.0), axis=-1),
        "joint_lower_limit": weights.joint_lower_limit
        * np.sum(np.maximum(lower - joint_pos, 0.0), axis=-1),
        "joint_velocity": weights.joint_velocity * _norm(joint_vel, squared),
        "joint_acceleration": weights.joint_acceleration * _norm(joint_acc, squared),
        # planar: only the forward component of projected gravity is "horizontal"
        "base_orientation": weights.base_orientation * _norm(gravity[..., :1], squared),
    }


def regularization_reward(
    joint_pos: np.ndarray,
    joint_vel: np.ndarray,
    joint_acc: np.ndarray,
    gravity: np.ndarray,
    model: RobotModel,
    weights: RewardWeights | None = None,
):
    weights = weights or RewardWeights()
    lower = np.array([lo for lo, _ in model.joint_limits])
    upper = np.array([hi for _, hi in model.joint_limits])
    terms = regularization_terms(
        np.asarray(joint_pos), np.asarray(joint_vel), np.asarray(joint_acc),
        np.asarray(gravity), lower, upper, weights,
    )
    total = sum(terms.values())
    return float(total) if np.ndim(total) == 0 else total


def batched_regularization(
    joint_pos: np.ndarray,
    joint_vel: np.ndarray,
    joint_acc: np.ndarray,
    pitch: np.ndarray,
    arrays: ModelArrays,
    weights: RewardWeights,
) -> dict[str, np.ndarray]:
    return regularization_terms(
        joint_pos, joint_vel, joint_acc, projected_gravity(pitch),
        arrays.joint_lower, arrays.joint_upper, weights,
    )


def transition_features(
    s: SimState, s_next: SimState, terrain: Terrain | None = None
) -> np.ndarray:
    """22-dim discriminator input for one pair of consecutive states."""
    arrays = TerrainArrays.from_terrains([terrain or Terrain.flat()])
    a = amp_features(s.q[None], s.qdot[None], arrays)[0]
    b = amp_features(s_next.q[None], s_next.qdot[None], arrays)[0]
    return np.concatenate([a, b])


def style_reward_from_scores(scores: torch.Tensor) -> torch.Tensor:
    return torch.clamp(1.0 - 0.25 * (scores - 1.0) ** 2, min=0.0)


@torch.no_grad()
def style_reward(disc: torch.nn.Module, features: torch.Tensor) -> torch.Tensor:
    """max(0, 1 - 0.25 (D(features) - 1)^2), in [0, 1]."""
    return style_reward_from_scores(disc(features).squeeze(-1))
