"""Per-column standardization using dataset manifest statistics."""

from dataclasses import dataclass

import numpy as np
import torch

from ..dataset.schemas import STD_EPSILON, DatasetManifest


@dataclass(frozen=True)
class NormalizationStats:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.maximum(np.asarray(self.std, dtype=np.float64), STD_EPSILON)
        if mean.shape != std.shape:
            raise ValueError(f"mean shape {mean.shape} != std shape {std.shape}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @classmethod
    def identity(cls, dim: int) -> "NormalizationStats":
        return cls(np.zeros(dim), np.ones(dim))

    @classmethod
    def from_manifest(
        cls, manifest: DatasetManifest
    ) -> tuple["NormalizationStats", "NormalizationStats"]:
        """(observation stats, action stats)."""
        return (
            cls(np.asarray(manifest.obs_mean), np.asarray(manifest.obs_std)),
            cls(np.asarray(manifest.act_mean), np.asarray(manifest.act_std)),
        )

    def guarded(self, min_std: float = 1e-3) -> "NormalizationStats":
        """Treat near-constant columns as unit-scale so unseen values stay bounded."""
        return NormalizationStats(self.mean, np.where(self.std < min_std, 1.0, self.std))

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "NormalizationStats":
        return cls(np.asarray(data["mean"]), np.asarray(data["std"]))


def normalize(x, stats: NormalizationStats):
    if isinstance(x, torch.Tensor):
        mean = torch.as_tensor(stats.mean, dtype=x.dtype, device=x.device)
        std = torch.as_tensor(stats.std, dtype=x.dtype, device=x.device)
        return (x - mean) / std
    return (np.asarray(x, dtype=np.float64) - stats.mean) / stats.std


def denormalize(x, stats: NormalizationStats):
    if isinstance(x, torch.Tensor):
        mean = torch.as_tensor(stats.mean, dtype=x.dtype, device=x.device)
        std = torch.as_tensor(stats.std, dtype=x.dtype, device=x.device)
        return x * std + mean
    return np.asarray(x, dtype=np.float64) * stats.std + stats.mean
