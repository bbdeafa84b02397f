"""DDPM sampling, receding-horizon control and the diffusion policy artifact."""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import torch

from ..checkpoint import load_checkpoint, save_checkpoint
from ..errors import ConfigurationError, InvalidArgumentError
from ..seeding import config_hash, seeded_init, torch_generator
from ..sim.schemas import ACTOR_OBS_DIM, COMMAND_DIM, COMMAND_SLICE, NUM_JOINTS
from .model import DenoiserModel
from .normalize import NormalizationStats, denormalize, normalize
from .schedule import NoiseSchedule, build_noise_schedule
from .schemas import DiffusionConfig

logger = logging.getLogger(__name__)

DIFFUSION_KIND = "diffusion"
FORMAT_VERSION = 1

# (noisy_actions, zero_indexed_steps, history, goal) -> predicted noise
Denoiser = Callable[[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor], torch.Tensor]


@torch.no_grad()
def sample_actions(
    model: Denoiser,
    history: torch.Tensor,
    goal: torch.Tensor,
    schedule: NoiseSchedule,
    generator: torch.Generator | None = None,
    *,
    horizon: int | None = None,
    act_dim: int | None = None,
    action_stats: NormalizationStats | None = None,
) -> torch.Tensor:
    """Ancestral DDPM sampling of a (B, H_p, act_dim) plan from unit Gaussian noise.

    ``history`` and ``goal`` are already normalized. The plan is denormalized
    when ``action_stats`` is given.
    """
    cfg = getattr(model, "cfg", None)
    horizon = horizon or (cfg.horizon if cfg is not None else None)
    act_dim = act_dim or getattr(model, "act_dim", None)
    if horizon is None or act_dim is None:
        raise InvalidArgumentError("Plan horizon and action dim are required for this model")
    if history.ndim != 3 or goal.ndim != 2 or history.shape[0] != goal.shape[0]:
        raise InvalidArgumentError(
            f"Bad conditioning shapes history={tuple(history.shape)} goal={tuple(goal.shape)}"
        )

    batch = history.shape[0]
    scheduler = schedule.scheduler()
    scheduler.set_timesteps(schedule.steps)
    x = torch.randn((batch, horizon, act_dim), generator=generator, dtype=history.dtype)
    for t in scheduler.timesteps:
        eps = model(x, t.expand(batch), history, goal)
        x = scheduler.step(eps, t, x, generator=generator).prev_sample
    if action_stats is not None:
        x = denormalize(x, action_stats)
    return x


@dataclass
class ControllerState:
    """Rolling (observation, previous action) buffer for a batch of episodes."""

    model: Denoiser
    schedule: NoiseSchedule
    obs_history: int
    horizon: int
    obs_stats: NormalizationStats
    act_stats: NormalizationStats
    generator: torch.Generator
    history: np.ndarray | None = None  # (B, H_o, obs_dim + act_dim), raw units
    prev_action: np.ndarray | None = None  # (B, act_dim)
    started: np.ndarray | None = None  # (B,) bool
    commands: np.ndarray | None = None  # (B, COMMAND_DIM), None reads them from obs
    last_plan: np.ndarray | None = None

    @property
    def act_dim(self) -> int:
        return self.act_stats.mean.shape[0]

    def reset(self, num_envs: int, commands: np.ndarray | None = None) -> None:
        obs_dim = self.obs_stats.mean.shape[0]
        self.history = np.zeros((num_envs, self.obs_history, obs_dim + self.act_dim))
        self.prev_action = np.zeros((num_envs, self.act_dim))
        self.started = np.zeros(num_envs, dtype=bool)
        self.commands = None if commands is None else np.atleast_2d(commands).astype(np.float64)
        self.last_plan = None

    def reset_envs(self, ids) -> None:
        ids = np.asarray(ids, dtype=np.int64)
        self.prev_action[ids] = 0.0
        self.started[ids] = False

    def push(self, obs: np.ndarray) -> None:
        pair = np.concatenate([obs, self.prev_action], axis=-1)
        fresh = ~self.started
        # Episode start: every slot holds the first observation with a zero action.
        self.history[fresh] = pair[fresh][:, None, :]
        running = ~fresh
        self.history[running] = np.roll(self.history[running], -1, axis=1)
        self.history[running, -1] = pair[running]
        self.started[:] = True

    def conditioning(self, obs: np.ndarray) -> tuple[torch.Tensor, torch.Tensor]:
        cond_stats = conditioning_stats(self.obs_stats, self.act_stats)
        goal_raw = obs[:, COMMAND_SLICE] if self.commands is None else self.commands
        goal_stats = goal_conditioning_stats(self.obs_stats)
        history = torch.as_tensor(normalize(self.history, cond_stats), dtype=torch.float32)
        goal = torch.as_tensor(normalize(goal_raw, goal_stats), dtype=torch.float32)
        return history, goal


def conditioning_stats(
    obs_stats: NormalizationStats, act_stats: NormalizationStats
) -> NormalizationStats:
    """Stats over concatenated (observation, action) history rows."""
    return NormalizationStats(
        np.concatenate([obs_stats.mean, act_stats.mean]),
        np.concatenate([obs_stats.std, act_stats.std]),
    ).guarded()


def goal_conditioning_stats(obs_stats: NormalizationStats) -> NormalizationStats:
    """Stats for the command columns used as the goal."""
    return NormalizationStats(
        obs_stats.mean[COMMAND_SLICE], obs_stats.std[COMMAND_SLICE]
    ).guarded()


def receding_horizon_act(ctrl: ControllerState, obs: np.ndarray) -> np.ndarray:
    """Plan H_p actions from the current history and execute only the first."""
    single = np.ndim(obs) == 1
    obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    if ctrl.history is None or ctrl.history.shape[0] != obs.shape[0]:
        ctrl.reset(obs.shape[0], ctrl.commands)
    ctrl.push(obs)
    history, goal = ctrl.conditioning(obs)
    plan = sample_actions(
        ctrl.model,
        history,
        goal,
        ctrl.schedule,
        ctrl.generator,
        horizon=ctrl.horizon,
        act_dim=ctrl.act_dim,
        action_stats=ctrl.act_stats,
    ).double().numpy()
    ctrl.last_plan = plan
    action = plan[:, 0]
    ctrl.prev_action = action.copy()
    return action[0] if single else action


@dataclass
class DiffusionPolicyArtifact:
    model: DenoiserModel
    schedule: NoiseSchedule
    config: DiffusionConfig
    obs_stats: NormalizationStats
    act_stats: NormalizationStats
    seed: int
    dataset: dict[str, Any] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def initialize(
        cls,
        config: DiffusionConfig,
        seed: int,
        obs_stats: NormalizationStats | None = None,
        act_stats: NormalizationStats | None = None,
        obs_dim: int = ACTOR_OBS_DIM,
        act_dim: int = NUM_JOINTS,
    ) -> "DiffusionPolicyArtifact":
        with seeded_init(seed):
            model = DenoiserModel(obs_dim, act_dim, COMMAND_DIM, config)
        return cls(
            model=model,
            schedule=build_noise_schedule(config),
            config=config,
            obs_stats=obs_stats or NormalizationStats.identity(obs_dim),
            act_stats=act_stats or NormalizationStats.identity(act_dim),
            seed=seed,
        )

    @property
    def obs_dim(self) -> int:
        return self.model.obs_dim

    @property
    def act_dim(self) -> int:
        return self.model.act_dim

    def controller(self, num_envs: int, seed: int,
                   commands: np.ndarray | None = None) -> ControllerState:
        self.model.eval()
        ctrl = ControllerState(
            model=self.model,
            schedule=self.schedule,
            obs_history=self.config.obs_history,
            horizon=self.config.horizon,
            obs_stats=self.obs_stats,
            act_stats=self.act_stats,
            generator=torch_generator(seed),
        )
        ctrl.reset(num_envs, commands)
        return ctrl

    def save(self, directory: str | Path) -> Path:
        manifest = {
            "kind": DIFFUSION_KIND,
            "format_version": FORMAT_VERSION,
            "obs_dim": self.obs_dim,
            "act_dim": self.act_dim,
            "seed": self.seed,
            "config": self.config.model_dump(mode="json"),
            "config_hash": config_hash(self.config.model_dump(mode="json")),
            "obs_stats": self.obs_stats.to_dict(),
            "act_stats": self.act_stats.to_dict(),
            "dataset": self.dataset,
            "metadata": self.metadata,
        }
        return save_checkpoint(directory, {"denoiser": self.model.state_dict()}, manifest)

    @classmethod
    def load(cls, directory: str | Path) -> "DiffusionPolicyArtifact":
        groups, manifest = load_checkpoint(directory, expected_kind=DIFFUSION_KIND)
        if manifest.get("format_version") != FORMAT_VERSION:
            raise ConfigurationError(
                f"Unsupported diffusion format version {manifest.get('format_version')}"
            )
        artifact = cls.initialize(
            DiffusionConfig.model_validate(manifest["config"]),
            manifest["seed"],
            NormalizationStats.from_dict(manifest["obs_stats"]),
            NormalizationStats.from_dict(manifest["act_stats"]),
            obs_dim=manifest["obs_dim"],
            act_dim=manifest["act_dim"],
        )
        artifact.model.load_state_dict(groups["denoiser"])
        artifact.model.eval()
        artifact.dataset = manifest.get("dataset", {})
        artifact.metadata = manifest.get("metadata", {})
        logger.info(f"Loaded diffusion policy from {directory}")
        return artifact
