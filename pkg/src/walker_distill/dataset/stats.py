"""Exact streaming statistics over transition columns."""

from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError
from .schemas import STD_EPSILON, TransitionBatch


@dataclass
class ColumnStats:
    """Population mean/std plus range per dimension, merged chunk by chunk."""

    count: int
    mean: np.ndarray
    m2: np.ndarray
    minimum: np.ndarray
    maximum: np.ndarray

    @classmethod
    def of(cls, block: np.ndarray) -> "ColumnStats":
        block = np.asarray(block, dtype=np.float64)
        mean = block.mean(axis=0)
        return cls(
            count=block.shape[0],
            mean=mean,
            m2=np.sum((block - mean) ** 2, axis=0),
            minimum=block.min(axis=0),
            maximum=block.max(axis=0),
        )

    def merge(self, other: "ColumnStats") -> "ColumnStats":
        if self.count == 0:
            return other
        if other.count == 0:
            return self
        total = self.count + other.count
        delta = other.mean - self.mean
        return ColumnStats(
            count=total,
            mean=self.mean + delta * (other.count / total),
            m2=self.m2 + other.m2 + delta**2 * (self.count * other.count / total),
            minimum=np.minimum(self.minimum, other.minimum),
            maximum=np.maximum(self.maximum, other.maximum),
        )

    @property
    def std(self) -> np.ndarray:
        return np.maximum(np.sqrt(self.m2 / self.count), STD_EPSILON)


@dataclass
class DatasetStats:
    observations: ColumnStats
    actions: ColumnStats

    @property
    def count(self) -> int:
        return self.observations.count

    def summary(self) -> dict[str, list[float] | int]:
        return {
            "count": self.count,
            "obs_min": self.observations.minimum.tolist(),
            "obs_max": self.observations.maximum.tolist(),
            "act_min": self.actions.minimum.tolist(),
            "act_max": self.actions.maximum.tolist(),
        }


def stats_from_chunks(chunks: Iterable[tuple[np.ndarray, np.ndarray]]) -> DatasetStats:
    obs_stats: ColumnStats | None = None
    act_stats: ColumnStats | None = None
    for obs, act in chunks:
        if len(obs) == 0:
            continue
        o, a = ColumnStats.of(obs), ColumnStats.of(act)
        obs_stats = o if obs_stats is None else obs_stats.merge(o)
        act_stats = a if act_stats is None else act_stats.merge(a)
    if obs_stats is None or act_stats is None:
        raise InvalidArgumentError("Dataset statistics need at least one transition")
    return DatasetStats(obs_stats, act_stats)


def dataset_stats(batch: TransitionBatch, chunk_rows: int = 65536) -> DatasetStats:
    return stats_from_chunks(
        (batch.observations[i:i + chunk_rows], batch.actions[i:i + chunk_rows])
        for i in range(0, len(batch), chunk_rows)
    )
