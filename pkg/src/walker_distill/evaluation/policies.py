"""Concrete policies: the AMP expert, diffusion policies and two baselines."""

import logging
from pathlib import Path

import numpy as np

from ..amp.artifact import EXPERT_KIND, PolicyArtifact
from ..amp.scripted import ScriptedGaitPolicy
from ..diffusion.policy import (
    DIFFUSION_KIND,
    ControllerState,
    DiffusionPolicyArtifact,
    receding_horizon_act,
)
from ..errors import ConfigurationError
from ..motion import generate_reference_clips
from ..sim.schemas import ACTOR_OBS_DIM, NUM_JOINTS
from .base import BasePolicy, PolicyRegistry

logger = logging.getLogger(__name__)


class ExpertPolicy(BasePolicy):
    """Deterministic (mean-action) AMP expert."""

    kind = EXPERT_KIND
    display_name = "AMP expert"

    def __init__(self, path: str | Path | None = None):
        super().__init__(path)
        self.artifact: PolicyArtifact | None = None

    @classmethod
    def from_artifact(cls, artifact: PolicyArtifact) -> "ExpertPolicy":
        policy = cls()
        policy.artifact = artifact
        policy._loaded = True
        return policy

    @property
    def obs_dim(self) -> int:
        return self._require().obs_dim

    @property
    def act_dim(self) -> int:
        return self._require().act_dim

    def _require(self) -> PolicyArtifact:
        if self.artifact is None:
            raise ConfigurationError("Expert policy is not loaded")
        return self.artifact

    def load(self) -> None:
        if self.path is None:
            raise ConfigurationError("Expert policy needs a checkpoint path")
        self.artifact = PolicyArtifact.load(self.path)
        self._loaded = True

    def unload(self) -> None:
        self.artifact = None
        self._loaded = False

    def reset(self, num_envs: int, seed: int) -> None:
        self._require()

    def act(self, obs: np.ndarray) -> np.ndarray:
        return self._require().act(obs, deterministic=True)


class DiffusionPolicy(BasePolicy):
    """Receding-horizon diffusion policy: re-plans every step, executes plan[0]."""

    kind = DIFFUSION_KIND
    display_name = "Diffusion policy"

    def __init__(self, path: str | Path | None = None):
        super().__init__(path)
        self.artifact: DiffusionPolicyArtifact | None = None
        self.controller: ControllerState | None = None

    @classmethod
    def from_artifact(cls, artifact: DiffusionPolicyArtifact) -> "DiffusionPolicy":
        policy = cls()
        policy.artifact = artifact
        policy._loaded = True
        return policy

    @property
    def obs_dim(self) -> int:
        return self._require().obs_dim

    @property
    def act_dim(self) -> int:
        return self._require().act_dim

    def _require(self) -> DiffusionPolicyArtifact:
        if self.artifact is None:
            raise ConfigurationError("Diffusion policy is not loaded")
        return self.artifact

    def load(self) -> None:
        if self.path is None:
            raise ConfigurationError("Diffusion policy needs a checkpoint path")
        self.artifact = DiffusionPolicyArtifact.load(self.path)
        self._loaded = True

    def unload(self) -> None:
        self.artifact = None
        self.controller = None
        self._loaded = False

    def reset(self, num_envs: int, seed: int) -> None:
        self.controller = self._require().controller(num_envs, seed)

    def reset_envs(self, ids) -> None:
        if self.controller is not None:
            self.controller.reset_envs(ids)

    def act(self, obs: np.ndarray) -> np.ndarray:
        if self.controller is None:
            raise ConfigurationError("Diffusion policy used before reset()")
        return receding_horizon_act(self.controller, obs)


class ScriptedPolicy(BasePolicy):
    """Reference gait playback through the PD targets."""

    kind = "scripted"
    display_name = "Scripted gait"

    def __init__(self, path: str | Path | None = None):
        super().__init__(path)
        self.gait: ScriptedGaitPolicy | None = None

    @classmethod
    def from_gait(cls, gait: ScriptedGaitPolicy) -> "ScriptedPolicy":
        policy = cls()
        policy.gait = gait
        policy._loaded = True
        return policy

    @property
    def obs_dim(self) -> int:
        return ACTOR_OBS_DIM

    @property
    def act_dim(self) -> int:
        return NUM_JOINTS

    def load(self) -> None:
        self.gait = ScriptedGaitPolicy(generate_reference_clips())
        self._loaded = True

    def unload(self) -> None:
        self.gait = None
        self._loaded = False

    def reset(self, num_envs: int, seed: int) -> None:
        if self.gait is None:
            self.load()
        self.gait.reset(num_envs)

    def reset_envs(self, ids) -> None:
        self.gait.reset_envs(ids)

    def act(self, obs: np.ndarray) -> np.ndarray:
        return self.gait.act(obs)


class ZeroPolicy(BasePolicy):
    """Holds the default pose."""

    kind = "zero"
    display_name = "Default pose"

    @property
    def obs_dim(self) -> int:
        return ACTOR_OBS_DIM

    @property
    def act_dim(self) -> int:
        return NUM_JOINTS

    def load(self) -> None:
        self._loaded = True

    def reset(self, num_envs: int, seed: int) -> None:
        self._loaded = True

    def act(self, obs: np.ndarray) -> np.ndarray:
        return np.zeros((np.atleast_2d(obs).shape[0], NUM_JOINTS))


PolicyRegistry.register(EXPERT_KIND, ExpertPolicy)
PolicyRegistry.register(DIFFUSION_KIND, DiffusionPolicy)
PolicyRegistry.register(ScriptedPolicy.kind, ScriptedPolicy)
PolicyRegistry.register(ZeroPolicy.kind, ZeroPolicy)


def load_policy(spec: str | Path) -> BasePolicy:
    return PolicyRegistry.load_policy(spec)
