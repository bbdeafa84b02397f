"""Vectorized episodic environment around the batched simulator."""

import logging
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .control import batched_observation, projected_gravity
from .dynamics import ModelArrays, TerrainArrays, heights_at
from .schemas import (
    NUM_JOINTS,
    ContactReport,
    RobotModel,
    SimConfig,
    Terrain,
    TerminationLimits,
)
from .step import batched_control_step

logger = logging.getLogger(__name__)

AMP_FEATURE_DIM = 11


@dataclass
class EpisodeSpec:
    """Everything drawn once at the start of an episode."""

    model: RobotModel
    terrain: Terrain
    q: np.ndarray
    qdot: np.ndarray
    command: np.ndarray


class EpisodeSource(Protocol):
    def sample_episode(self, rng: np.random.Generator) -> EpisodeSpec: ...

    def perturbation(self, time: float, rng: np.random.Generator) -> np.ndarray | None: ...


def amp_features(q: np.ndarray, qdot: np.ndarray, terrain: TerrainArrays) -> np.ndarray:
    """Joint positions, joint velocities, base height above terrain, projected gravity."""
    height = q[:, 1] - heights_at(terrain, q[:, 0])
    return np.concatenate(
        [q[:, 3:], qdot[:, 3:], height[:, None], projected_gravity(q[:, 2])], axis=-1
    )


@dataclass
class VecStep:
    obs: np.ndarray
    privileged_obs: np.ndarray
    terminated: np.ndarray
    truncated: np.ndarray
    fault: np.ndarray
    features_before: np.ndarray
    features_after: np.ndarray
    base_velocity: np.ndarray  # (n, 3): vx, vz, pitch rate after the step
    joint_pos: np.ndarray
    joint_acc: np.ndarray
    commands: np.ndarray
    actions: np.ndarray
    terminal_privileged_obs: np.ndarray
    contact: ContactReport
    active: np.ndarray  # rows that were stepped this call

    @property
    def done(self) -> np.ndarray:
        return self.terminated | self.truncated


class VecWalkerEnv:
    """A batch of independent episodes, each with its own random stream.

    Environment ``i`` draws everything from ``default_rng([seed, i])`` so a
    batch of size n reproduces the first n environments of any larger batch.
    With ``auto_reset`` finished environments restart immediately; otherwise
    they freeze until :meth:`reset` is called.
    """

    def __init__(
        self,
        source: EpisodeSource,
        num_envs: int,
        seed: int,
        sim_config: SimConfig | None = None,
        limits: TerminationLimits | None = None,
        episode_steps: int = 500,
        auto_reset: bool = True,
    ):
        if num_envs <= 0:
            raise ValueError("num_envs must be positive")
        self.source = source
        self.num_envs = num_envs
        self.cfg = sim_config or SimConfig()
        self.limits = limits or TerminationLimits()
        self.episode_steps = episode_steps
        self.auto_reset = auto_reset
        self.rngs = [np.random.default_rng([seed, i]) for i in range(num_envs)]

        specs = [source.sample_episode(rng) for rng in self.rngs]
        self.models = [s.model for s in specs]
        self.terrains = [s.terrain for s in specs]
        self.arrays = ModelArrays.from_models(self.models)
        self.terrain = TerrainArrays.from_terrains(self.terrains)
        self.q = np.stack([s.q for s in specs]).astype(np.float64)
        self.qdot = np.stack([s.qdot for s in specs]).astype(np.float64)
        self.commands = np.stack([s.command for s in specs]).astype(np.float64)
        self.prev_actions = np.zeros((num_envs, NUM_JOINTS))
        self.steps = np.zeros(num_envs, dtype=np.int64)
        self.active = np.ones(num_envs, dtype=bool)
        self.episode_counts = np.ones(num_envs, dtype=np.int64)

    def _load(self, i: int, spec: EpisodeSpec) -> None:
        self.models[i] = spec.model
        self.terrains[i] = spec.terrain
        self.arrays.set_row(i, spec.model)
        self.terrain.set_row(i, spec.terrain)
        self.q[i] = spec.q
        self.qdot[i] = spec.qdot
        self.commands[i] = spec.command
        self.prev_actions[i] = 0.0
        self.steps[i] = 0
        self.active[i] = True

    def reset(self, ids: np.ndarray | list[int] | None = None) -> np.ndarray:
        ids = range(self.num_envs) if ids is None else ids
        for i in ids:
            self._load(i, self.source.sample_episode(self.rngs[i]))
            self.episode_counts[i] += 1
        return self.observations()

    def observations(self, privileged: bool = False) -> np.ndarray:
        return batched_observation(
            self.q, self.qdot, self.commands, self.prev_actions, privileged=privileged
        )

    def features(self) -> np.ndarray:
        return amp_features(self.q, self.qdot, self.terrain)

    def step(self, actions: np.ndarray) -> VecStep:
        actions = np.asarray(actions, dtype=np.float64)
        dt = self.cfg.control_dt
        active = self.active.copy()

        for i in np.flatnonzero(active):
            kick = self.source.perturbation(self.steps[i] * dt, self.rngs[i])
            if kick is not None:
                self.qdot[i, :2] += kick

        features_before = self.features()
        joint_vel_before = self.qdot[:, 3:].copy()
        out = batched_control_step(
            self.q, self.qdot, actions, self.arrays, self.terrain, self.cfg, self.limits
        )
        stepped = np.clip(actions, -self.cfg.action_clip, self.cfg.action_clip)
        self.q[active] = out.q[active]
        self.qdot[active] = out.qdot[active]
        self.prev_actions[active] = stepped[active]
        self.steps[active] += 1

        terminated = out.terminated & active
        fault = out.fault & active
        truncated = active & ~terminated & (self.steps >= self.episode_steps)
        done = terminated | truncated

        features_after = self.features()
        terminal_priv = self.observations(privileged=True)
        base_velocity = self.qdot[:, :3].copy()
        joint_pos = self.q[:, 3:].copy()
        joint_acc = (self.qdot[:, 3:] - joint_vel_before) / dt
        commands = self.commands.copy()

        if np.any(fault):
            logger.warning(f"Non-finite state in envs {np.flatnonzero(fault).tolist()}")

        if self.auto_reset:
            for i in np.flatnonzero(done):
                self._load(i, self.source.sample_episode(self.rngs[i]))
                self.episode_counts[i] += 1
        else:
            self.active &= ~done

        return VecStep(
            obs=self.observations(),
            privileged_obs=self.observations(privileged=True),
            terminated=terminated,
            truncated=truncated,
            fault=fault,
            features_before=features_before,
            features_after=features_after,
            base_velocity=base_velocity,
            joint_pos=joint_pos,
            joint_acc=joint_acc,
            commands=commands,
            actions=stepped,
            terminal_privileged_obs=terminal_priv,
            contact=out.contact,
            active=active,
        )
