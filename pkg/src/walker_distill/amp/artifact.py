"""Trained expert bundle: networks, normalizers and provenance."""

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import torch
from safetensors.torch import save as safetensors_save

from ..checkpoint import flatten_state, load_checkpoint, save_checkpoint
from ..errors import ConfigurationError
from ..seeding import config_hash, seeded_init
from ..sim.env import AMP_FEATURE_DIM
from ..sim.schemas import ACTOR_OBS_DIM, NUM_JOINTS, PRIVILEGED_OBS_DIM
from .networks import CriticNet, Discriminator, PolicyNet, RunningMeanStd
from .schemas import AMPConfig

logger = logging.getLogger(__name__)

EXPERT_KIND = "expert"
FORMAT_VERSION = 1


@dataclass
class PolicyArtifact:
    policy: PolicyNet
    critic: CriticNet
    discriminator: Discriminator
    obs_norm: RunningMeanStd
    priv_norm: RunningMeanStd
    amp_norm: RunningMeanStd
    config: AMPConfig
    seed: int
    step_count: int = 0
    metadata: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def initialize(cls, config: AMPConfig, seed: int) -> "PolicyArtifact":
        with seeded_init(seed):
            policy = PolicyNet(ACTOR_OBS_DIM, NUM_JOINTS, config.hidden_sizes, config.init_log_std)
            critic = CriticNet(PRIVILEGED_OBS_DIM, config.hidden_sizes)
            disc = Discriminator(2 * AMP_FEATURE_DIM, config.disc_hidden_sizes)
        return cls(
            policy=policy,
            critic=critic,
            discriminator=disc,
            obs_norm=RunningMeanStd(ACTOR_OBS_DIM),
            priv_norm=RunningMeanStd(PRIVILEGED_OBS_DIM),
            amp_norm=RunningMeanStd(2 * AMP_FEATURE_DIM),
            config=config,
            seed=seed,
        )

    @property
    def obs_dim(self) -> int:
        return self.policy.obs_dim

    @property
    def act_dim(self) -> int:
        return self.policy.act_dim

    @torch.no_grad()
    def act(self, obs: np.ndarray, deterministic: bool = True,
            generator: torch.Generator | None = None) -> np.ndarray:
        obs_t = torch.as_tensor(np.atleast_2d(obs), dtype=torch.float32)
        if obs_t.shape[-1] != self.obs_dim:
            raise ConfigurationError(
                f"Expert expects {self.obs_dim}-dim observations, got {obs_t.shape[-1]}"
            )
        mean, log_std = self.policy(self.obs_norm(obs_t))
        if deterministic:
            action = mean
        else:
            action = mean + log_std.exp() * torch.randn(mean.shape, generator=generator)
        out = action.numpy().astype(np.float64)
        return out[0] if np.ndim(obs) == 1 else out

    def content_hash(self) -> str:
        """SHA-256 of the serialized weights, independent of where they are stored."""
        return hashlib.sha256(safetensors_save(flatten_state(self.state_groups()))).hexdigest()

    def state_groups(self) -> dict[str, dict[str, torch.Tensor]]:
        return {
            "policy": self.policy.state_dict(),
            "critic": self.critic.state_dict(),
            "discriminator": self.discriminator.state_dict(),
            "obs_norm": self.obs_norm.state_dict(),
            "priv_norm": self.priv_norm.state_dict(),
            "amp_norm": self.amp_norm.state_dict(),
        }

    def load_groups(self, groups: dict[str, dict[str, torch.Tensor]]) -> None:
        self.policy.load_state_dict(groups["policy"])
        self.critic.load_state_dict(groups["critic"])
        self.discriminator.load_state_dict(groups["discriminator"])
        self.obs_norm.load_state_dict(groups["obs_norm"])
        self.priv_norm.load_state_dict(groups["priv_norm"])
        self.amp_norm.load_state_dict(groups["amp_norm"])

    def save(self, directory: str | Path) -> Path:
        manifest = {
            "kind": EXPERT_KIND,
            "format_version": FORMAT_VERSION,
            "obs_dim": self.obs_dim,
            "privileged_obs_dim": self.critic.obs_dim,
            "act_dim": self.act_dim,
            "feature_dim": self.discriminator.feature_dim,
            "seed": self.seed,
            "step_count": self.step_count,
            "config": self.config.model_dump(mode="json"),
            "config_hash": config_hash(self.config.model_dump(mode="json")),
            "metadata": self.metadata,
        }
        return save_checkpoint(directory, self.state_groups(), manifest)

    @classmethod
    def load(cls, directory: str | Path) -> "PolicyArtifact":
        groups, manifest = load_checkpoint(directory, expected_kind=EXPERT_KIND)
        if manifest.get("format_version") != FORMAT_VERSION:
            raise ConfigurationError(
                f"Unsupported expert format version {manifest.get('format_version')}"
            )
        if manifest["obs_dim"] != ACTOR_OBS_DIM or manifest["act_dim"] != NUM_JOINTS:
            raise ConfigurationError(
                f"Expert dims ({manifest['obs_dim']}, {manifest['act_dim']}) do not match the "
                f"simulator ({ACTOR_OBS_DIM}, {NUM_JOINTS})"
            )
        artifact = cls.initialize(AMPConfig.model_validate(manifest["config"]), manifest["seed"])
        artifact.load_groups(groups)
        artifact.step_count = manifest["step_count"]
        artifact.metadata = manifest.get("metadata", {})
        logger.info(f"Loaded expert from {directory} ({artifact.step_count} env steps)")
        return artifact
