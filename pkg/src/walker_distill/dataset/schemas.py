"""Transition records, dataset manifests and collection settings."""

from dataclasses import dataclass
from enum import Enum
from typing import Annotated

import numpy as np
from pydantic import BaseModel, Field, model_validator

from ..randomization.schemas import RangeProfile, SetupId

FORMAT_VERSION = 1
STD_EPSILON = 1e-6


class SizePreset(str, Enum):
    DESK = "desk"
    FULL = "full"


SIZE_PRESETS: dict[SizePreset, list[int]] = {
    SizePreset.DESK: [50_000, 200_000, 800_000],
    SizePreset.FULL: [500_000, 2_000_000, 8_000_000],
}


class DatasetConfig(BaseModel):
    preset: SizePreset = SizePreset.DESK
    sizes: Annotated[
        list[int] | None, Field(description="explicit transition counts; overrides the preset")
    ] = None
    num_envs: Annotated[int, Field(gt=0, description="parallel episodes per shard")] = 32
    shards: Annotated[int, Field(gt=0, description="independent collection workers")] = 1

    @model_validator(mode="after")
    def _check(self) -> "DatasetConfig":
        if self.sizes is not None and any(s <= 0 for s in self.sizes):
            raise ValueError("Dataset sizes must be positive")
        return self

    def resolved_sizes(self) -> list[int]:
        return list(self.sizes) if self.sizes is not None else list(SIZE_PRESETS[self.preset])


class DatasetManifest(BaseModel):
    format_version: int = FORMAT_VERSION
    obs_dim: int
    act_dim: int
    count: int
    setup_id: SetupId
    range_profile: RangeProfile = RangeProfile.TRAINING
    expert_hash: str
    seed: int
    created_at: str
    obs_mean: list[float]
    obs_std: list[float]
    act_mean: list[float]
    act_std: list[float]
    episodes: Annotated[int, Field(ge=0, description="distinct episode ids in the payload")] = 0

    @model_validator(mode="after")
    def _check(self) -> "DatasetManifest":
        if any(s <= 0 for s in self.obs_std + self.act_std):
            raise ValueError("Manifest standard deviations must be positive")
        return self


@dataclass(frozen=True)
class TransitionRecord:
    observation: np.ndarray
    action: np.ndarray
    episode_id: int
    step_index: int


@dataclass
class TransitionBatch:
    """Column-oriented transitions; rows of one episode are contiguous and in step order."""

    observations: np.ndarray  # (n, obs_dim) float32
    actions: np.ndarray  # (n, act_dim) float32
    episode_ids: np.ndarray  # (n,) int64
    step_indices: np.ndarray  # (n,) int64

    def __post_init__(self):
        self.observations = np.ascontiguousarray(self.observations, dtype=np.float32)
        self.actions = np.ascontiguousarray(self.actions, dtype=np.float32)
        self.episode_ids = np.asarray(self.episode_ids, dtype=np.int64)
        self.step_indices = np.asarray(self.step_indices, dtype=np.int64)
        n = self.observations.shape[0]
        if not (self.actions.shape[0] == self.episode_ids.shape[0] == self.step_indices.shape[0]
                == n):
            raise ValueError("Transition columns differ in length")

    def __len__(self) -> int:
        return self.observations.shape[0]

    def __getitem__(self, i: int) -> TransitionRecord:
        return TransitionRecord(
            self.observations[i], self.actions[i], int(self.episode_ids[i]),
            int(self.step_indices[i]),
        )

    @property
    def obs_dim(self) -> int:
        return self.observations.shape[1]

    @property
    def act_dim(self) -> int:
        return self.actions.shape[1]

    @classmethod
    def empty(cls, obs_dim: int, act_dim: int) -> "TransitionBatch":
        return cls(
            np.zeros((0, obs_dim)), np.zeros((0, act_dim)), np.zeros(0), np.zeros(0)
        )

    @classmethod
    def concatenate(cls, batches: list["TransitionBatch"]) -> "TransitionBatch":
        return cls(
            np.concatenate([b.observations for b in batches]),
            np.concatenate([b.actions for b in batches]),
            np.concatenate([b.episode_ids for b in batches]),
            np.concatenate([b.step_indices for b in batches]),
        )
