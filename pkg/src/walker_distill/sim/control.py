"""PD control, observations and termination checks."""

import numpy as np

from .dynamics import ModelArrays, TerrainArrays, heights_at
from .schemas import (
    Command,
    RobotModel,
    SimState,
    Terrain,
    TerminationLimits,
)


def batched_pd_torques(
    joint_targets: np.ndarray, joint_pos: np.ndarray, joint_vel: np.ndarray, arrays: ModelArrays
) -> np.ndarray:
    tau = arrays.kp * (joint_targets - joint_pos) - arrays.kd * joint_vel
    return np.clip(tau, -arrays.torque_limits, arrays.torque_limits)


def pd_torques(
    joint_targets: np.ndarray, joint_pos: np.ndarray, joint_vel: np.ndarray, model: RobotModel
) -> np.ndarray:
    """tau = clamp(kp * (target - pos) - kd * vel, +-torque_limit)."""
    arrays = ModelArrays.from_models([model])
    return batched_pd_torques(
        np.atleast_2d(joint_targets), np.atleast_2d(joint_pos), np.atleast_2d(joint_vel), arrays
    )[0]


def projected_gravity(pitch: np.ndarray) -> np.ndarray:
    """Unit gravity expressed in the base frame, (..., 2)."""
    pitch = np.asarray(pitch, dtype=np.float64)
    return np.stack([-np.sin(pitch), -np.cos(pitch)], axis=-1)


def batched_observation(
    q: np.ndarray,
    qdot: np.ndarray,
    commands: np.ndarray,
    prev_actions: np.ndarray,
    privileged: bool = False,
) -> np.ndarray:
    """Actor observation (16) or privileged critic observation (19)."""
    parts = [projected_gravity(q[:, 2]), q[:, 3:], qdot[:, 3:], commands, prev_actions]
    if privileged:
        parts = [qdot[:, :2], qdot[:, 2:3], *parts]
    return np.concatenate(parts, axis=-1)


def compute_observation(
    state: SimState, command: Command, terrain: Terrain | None = None, privileged: bool = False
) -> np.ndarray:
    # Terrain is accepted for signature parity; neither observation senses the ground.
    del terrain
    return batched_observation(
        state.q[None],
        state.qdot[None],
        command.as_array()[None],
        state.prev_action[None],
        privileged=privileged,
    )[0]


def batched_termination(
    q: np.ndarray, terrain: TerrainArrays, limits: TerminationLimits
) -> np.ndarray:
    base_height = q[:, 1] - heights_at(terrain, q[:, 0])
    return (base_height < limits.min_base_height) | (np.abs(q[:, 2]) > limits.max_pitch)


def check_termination(state: SimState, terrain: Terrain, limits: TerminationLimits) -> bool:
    arrays = TerrainArrays.from_terrains([terrain])
    return bool(batched_termination(state.q[None], arrays, limits)[0])


def terrain_height(terrain: Terrain, x: float | np.ndarray) -> float | np.ndarray:
    arrays = TerrainArrays.from_terrains([terrain])
    x_arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    h = heights_at(arrays, x_arr[None, :])[0]
    return float(h[0]) if np.ndim(x) == 0 else h
