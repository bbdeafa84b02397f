"""Expert rollouts into size-controlled transition datasets."""

import copy
import logging
import os
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Protocol

import numpy as np

from ..errors import ConfigurationError, InvalidArgumentError
from ..motion import MotionLibrary, generate_reference_clips
from ..progress import TrainingProgress
from ..randomization import EpisodeSampler, RandomizationConfig
from ..seeding import derive_seed
from ..sim.env import VecWalkerEnv
from ..sim.schemas import (
    ACTOR_OBS_DIM,
    NUM_JOINTS,
    RobotModel,
    SimConfig,
    TerminationLimits,
)
from .io import write_dataset
from .schemas import DatasetManifest, TransitionBatch
from .stats import dataset_stats

logger = logging.getLogger(__name__)


class Actor(Protocol):
    def act(self, obs: np.ndarray) -> np.ndarray: ...


def creation_timestamp() -> str:
    """UTC ISO timestamp, pinned by SOURCE_DATE_EPOCH for reproducible manifests."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    moment = (
        datetime.fromtimestamp(int(epoch), tz=timezone.utc) if epoch
        else datetime.now(tz=timezone.utc)
    )
    return moment.isoformat()


def shard_sizes(total: int, shards: int) -> list[int]:
    base, extra = divmod(total, shards)
    return [base + (1 if k < extra else 0) for k in range(shards)]


def shard_seeds(seed: int, shards: int) -> list[int]:
    return [derive_seed(seed, "shard", k) for k in range(shards)]


def _check_actor(actor: Actor) -> None:
    obs_dim = getattr(actor, "obs_dim", ACTOR_OBS_DIM)
    act_dim = getattr(actor, "act_dim", NUM_JOINTS)
    if (obs_dim, act_dim) != (ACTOR_OBS_DIM, NUM_JOINTS):
        raise ConfigurationError(
            f"Expert dims ({obs_dim}, {act_dim}) do not match the environment "
            f"({ACTOR_OBS_DIM}, {NUM_JOINTS})"
        )


def _collect_shard(
    actor: Actor,
    make_env: Callable[[int], VecWalkerEnv],
    n_rows: int,
    seed: int,
    progress: TrainingProgress | None = None,
) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """Complete episodes, keyed by start order, until at least ``n_rows`` rows exist."""
    if n_rows == 0:
        return []
    env = make_env(seed)
    n = env.num_envs
    if hasattr(actor, "reset"):
        actor = copy.copy(actor)
        actor.reset(n)

    episode_of_env = np.arange(n)
    next_episode = n
    obs_buf: list[list[np.ndarray]] = [[] for _ in range(n)]
    act_buf: list[list[np.ndarray]] = [[] for _ in range(n)]
    completed: list[tuple[int, np.ndarray, np.ndarray]] = []
    rows = 0

    obs = env.observations()
    while rows < n_rows:
        out = env.step(actor.act(obs))
        for i in range(n):
            obs_buf[i].append(obs[i])
            act_buf[i].append(out.actions[i])
        for i in np.flatnonzero(out.done):
            completed.append((int(episode_of_env[i]), np.array(obs_buf[i]), np.array(act_buf[i])))
            rows += len(obs_buf[i])
            obs_buf[i], act_buf[i] = [], []
            episode_of_env[i] = next_episode
            next_episode += 1
            if hasattr(actor, "reset_envs"):
                actor.reset_envs([i])
        obs = out.obs
        if progress is not None:
            progress.update(min(rows, n_rows))
    return sorted(completed, key=lambda item: item[0])


def collect(
    expert: Actor,
    setup: RandomizationConfig,
    n_transitions: int,
    seed: int,
    *,
    library: MotionLibrary | None = None,
    base_model: RobotModel | None = None,
    sim_config: SimConfig | None = None,
    limits: TerminationLimits | None = None,
    num_envs: int = 32,
    shards: int = 1,
    workers: int = 1,
    episode_steps: int = 500,
    progress: TrainingProgress | None = None,
) -> TransitionBatch:
    """Roll out the expert's mean action and keep exactly ``n_transitions`` rows.

    Shards run with derived seeds and are concatenated in shard order, so the
    result does not depend on ``workers``.
    """
    if n_transitions <= 0:
        raise InvalidArgumentError(f"n_transitions must be positive, got {n_transitions}")
    _check_actor(expert)
    library = library or generate_reference_clips(model=base_model)

    def make_env(shard_seed: int) -> VecWalkerEnv:
        sampler = EpisodeSampler(setup, library, base_model)
        return VecWalkerEnv(
            sampler, num_envs, shard_seed, sim_config, limits, episode_steps=episode_steps
        )

    sizes = shard_sizes(n_transitions, shards)
    seeds = shard_seeds(seed, shards)
    if progress is not None:
        progress.start(n_transitions)
    try:
        with ThreadPoolExecutor(max_workers=max(1, min(workers, shards))) as pool:
            futures = [
                pool.submit(
                    _collect_shard, expert, make_env, size, s, progress if k == 0 else None
                )
                for k, (size, s) in enumerate(zip(sizes, seeds))
            ]
            results = [f.result() for f in futures]
    finally:
        if progress is not None:
            progress.finish()

    parts: list[TransitionBatch] = []
    episode = 0
    for size, episodes in zip(sizes, results):
        remaining = size
        for _, obs, act in episodes:
            if remaining <= 0:
                break
            take = min(remaining, len(obs))
            parts.append(
                TransitionBatch(
                    obs[:take], act[:take], np.full(take, episode), np.arange(take)
                )
            )
            episode += 1
            remaining -= take
    batch = TransitionBatch.concatenate(parts)
    logger.info(
        f"Collected {len(batch)} transitions over {episode} episodes "
        f"(setup {setup.setup_id.value}, seed {seed})"
    )
    return batch


def build_manifest(
    batch: TransitionBatch, setup: RandomizationConfig, expert_hash: str, seed: int
) -> DatasetManifest:
    stats = dataset_stats(batch)
    return DatasetManifest(
        obs_dim=batch.obs_dim,
        act_dim=batch.act_dim,
        count=len(batch),
        setup_id=setup.setup_id,
        range_profile=setup.range_profile,
        expert_hash=expert_hash,
        seed=seed,
        created_at=creation_timestamp(),
        obs_mean=stats.observations.mean.tolist(),
        obs_std=stats.observations.std.tolist(),
        act_mean=stats.actions.mean.tolist(),
        act_std=stats.actions.std.tolist(),
        episodes=int(len(np.unique(batch.episode_ids))),
    )


def collect_to_file(
    expert: Actor,
    setup: RandomizationConfig,
    n_transitions: int,
    seed: int,
    path: str | Path,
    expert_hash: str,
    **kwargs,
) -> tuple[Path, DatasetManifest]:
    batch = collect(expert, setup, n_transitions, seed, **kwargs)
    manifest = build_manifest(batch, setup, expert_hash, seed)
    return write_dataset(batch, manifest, path), manifest
