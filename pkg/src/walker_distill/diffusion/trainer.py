"""Noise-prediction training of the diffusion policy on expert transitions."""

import copy
import logging
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch.utils.data import DataLoader, Dataset

from ..checkpoint import file_sha256
from ..dataset.io import read_dataset
from ..dataset.schemas import DatasetManifest, TransitionBatch
from ..errors import ConfigurationError, NumericalError
from ..progress import TrainingProgress
from ..seeding import derive_seed, numpy_rng, torch_generator
from ..sim.schemas import COMMAND_SLICE
from .model import DenoiserModel
from .normalize import NormalizationStats, normalize
from .policy import DiffusionPolicyArtifact, conditioning_stats, goal_conditioning_stats
from .schedule import NoiseSchedule, forward_noising
from .schemas import DiffusionConfig, DPTrainConfig

logger = logging.getLogger(__name__)


class WindowIndex:
    """Valid (history, plan) windows of a transition table.

    A window at row ``t`` conditions on rows ``t - H_o + 1 .. t`` (clamped to
    the episode's first row) and targets actions ``t .. t + H_p - 1``, which
    must all lie inside the same episode.
    """

    def __init__(self, episode_ids: np.ndarray, obs_history: int, horizon: int):
        self.episode_ids = np.asarray(episode_ids, dtype=np.int64)
        self.obs_history = obs_history
        self.horizon = horizon
        n = self.episode_ids.shape[0]
        boundary = np.ones(n, dtype=bool)
        if n > 1:
            boundary[1:] = self.episode_ids[1:] != self.episode_ids[:-1]
        starts = np.flatnonzero(boundary)
        ends = np.append(starts[1:], n)
        lengths = ends - starts
        self.episode_start = np.repeat(starts, lengths)
        self.episode_end = np.repeat(ends, lengths)
        rows = np.arange(n)
        self.starts = rows[self.episode_end - rows >= horizon]

    def __len__(self) -> int:
        return self.starts.shape[0]

    def history_rows(self, t: int) -> np.ndarray:
        rows = np.arange(t - self.obs_history + 1, t + 1)
        return np.maximum(rows, self.episode_start[t])

    def target_rows(self, t: int) -> np.ndarray:
        return np.arange(t, t + self.horizon)

    def audit(self, t: int) -> None:
        rows = np.concatenate([self.history_rows(t), self.target_rows(t)])
        if np.any(self.episode_ids[rows] != self.episode_ids[t]):
            raise ConfigurationError(f"Window at row {t} crosses an episode boundary")


def previous_actions(batch: TransitionBatch) -> np.ndarray:
    """a_{t-1} per row, zero on each episode's first row."""
    prev = np.zeros_like(batch.actions)
    if len(batch) > 1:
        same = batch.episode_ids[1:] == batch.episode_ids[:-1]
        prev[1:][same] = batch.actions[:-1][same]
    return prev


class WindowDataset(Dataset):
    """Normalized (history, goal, action plan) samples."""

    def __init__(
        self,
        batch: TransitionBatch,
        index: WindowIndex,
        obs_stats: NormalizationStats,
        act_stats: NormalizationStats,
        starts: np.ndarray | None = None,
    ):
        self.index = index
        self.starts = index.starts if starts is None else starts
        pairs = np.concatenate([batch.observations, previous_actions(batch)], axis=-1)
        self.pairs = normalize(pairs, conditioning_stats(obs_stats, act_stats)).astype(np.float32)
        self.goals = normalize(
            batch.observations[:, COMMAND_SLICE], goal_conditioning_stats(obs_stats)
        ).astype(np.float32)
        self.actions = normalize(batch.actions, act_stats).astype(np.float32)

    def __len__(self) -> int:
        return self.starts.shape[0]

    def __getitem__(self, i: int):
        t = int(self.starts[i])
        self.index.audit(t)
        return (
            torch.from_numpy(self.pairs[self.index.history_rows(t)]),
            torch.from_numpy(self.goals[t]),
            torch.from_numpy(self.actions[self.index.target_rows(t)]),
        )


def diffusion_loss(
    batch, model: DenoiserModel, schedule: NoiseSchedule, generator: torch.Generator | None
) -> torch.Tensor:
    history, goal, x0 = batch
    t = torch.randint(1, schedule.steps + 1, (x0.shape[0],), generator=generator)
    eps = torch.randn(x0.shape, generator=generator, dtype=x0.dtype)
    x_t = forward_noising(x0, t, eps, schedule)
    return F.mse_loss(model(x_t, t - 1, history, goal), eps)


def training_step(
    batch,
    model: DenoiserModel,
    schedule: NoiseSchedule,
    optimizer: torch.optim.Optimizer,
    generator: torch.Generator | None = None,
    max_grad_norm: float | None = None,
) -> float:
    """One optimizer step on the noise-prediction MSE; returns the loss."""
    model.train()
    loss = diffusion_loss(batch, model, schedule, generator)
    if not torch.isfinite(loss):
        raise NumericalError(
            "Diffusion loss is not finite",
            diagnostics={
                "loss": float(loss.detach()),
                "history_finite": bool(torch.isfinite(batch[0]).all()),
                "target_finite": bool(torch.isfinite(batch[2]).all()),
            },
        )
    optimizer.zero_grad()
    loss.backward()
    if max_grad_norm is not None:
        torch.nn.utils.clip_grad_norm_(model.parameters(), max_grad_norm)
    optimizer.step()
    return float(loss.detach())


@torch.no_grad()
def validation_loss(
    loader: DataLoader, model: DenoiserModel, schedule: NoiseSchedule, seed: int
) -> float:
    model.eval()
    gen = torch_generator(seed)
    total, count = 0.0, 0
    for batch in loader:
        total += float(diffusion_loss(batch, model, schedule, gen)) * batch[2].shape[0]
        count += batch[2].shape[0]
    return total / max(count, 1)


def split_episodes(
    index: WindowIndex, episode_ids: np.ndarray, fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Hold out whole episodes for validation; returns (train starts, validation starts)."""
    episodes = np.unique(episode_ids[index.starts])
    n_val = int(round(fraction * len(episodes)))
    if fraction <= 0.0 or len(episodes) < 2 or n_val == 0:
        return index.starts, index.starts[:0]
    held = numpy_rng(seed, "validation").choice(episodes, size=n_val, replace=False)
    mask = np.isin(episode_ids[index.starts], held)
    return index.starts[~mask], index.starts[mask]


def train_dp(
    dataset: str | Path | tuple[TransitionBatch, DatasetManifest],
    cfg: DiffusionConfig,
    seed: int,
    train_cfg: DPTrainConfig | None = None,
    *,
    out_dir: str | Path | None = None,
    progress: TrainingProgress | None = None,
) -> DiffusionPolicyArtifact:
    """Fit a diffusion policy to a dataset; returns the best-by-validation checkpoint."""
    train_cfg = train_cfg or DPTrainConfig()
    dataset_info: dict = {}
    if isinstance(dataset, (str, Path)):
        batch, manifest = read_dataset(dataset)
        dataset_info = {"path": str(dataset), "sha256": file_sha256(dataset)}
    else:
        batch, manifest = dataset
    dataset_info.update(
        setup_id=manifest.setup_id.value,
        count=manifest.count,
        expert_hash=manifest.expert_hash,
        seed=manifest.seed,
    )

    obs_stats, act_stats = NormalizationStats.from_manifest(manifest)
    index = WindowIndex(batch.episode_ids, cfg.obs_history, cfg.horizon)
    if len(index) == 0:
        raise ConfigurationError(
            f"Dataset of {len(batch)} transitions has no episode with {cfg.horizon} actions "
            f"for a single training window"
        )

    artifact = DiffusionPolicyArtifact.initialize(
        cfg, seed, obs_stats, act_stats, obs_dim=batch.obs_dim, act_dim=batch.act_dim
    )
    artifact.dataset = dataset_info
    if train_cfg.epochs == 0:
        logger.info("Zero epochs; returning the initialized diffusion policy")
        if out_dir is not None:
            artifact.save(out_dir)
        return artifact

    train_starts, val_starts = split_episodes(
        index, batch.episode_ids, train_cfg.validation_fraction, seed
    )
    train_set = WindowDataset(batch, index, obs_stats, act_stats, train_starts)
    val_set = WindowDataset(batch, index, obs_stats, act_stats, val_starts)
    train_loader = DataLoader(
        train_set,
        batch_size=train_cfg.batch_size,
        shuffle=True,
        generator=torch_generator(derive_seed(seed, "shuffle")),
        num_workers=train_cfg.loader_workers,
    )
    val_loader = DataLoader(val_set, batch_size=train_cfg.batch_size, shuffle=False)

    model, schedule = artifact.model, artifact.schedule
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=train_cfg.learning_rate, weight_decay=train_cfg.weight_decay
    )
    gen = torch_generator(derive_seed(seed, "noise"))
    val_seed = derive_seed(seed, "validation-noise")

    logger.info(
        f"Training diffusion policy on {len(train_set)} windows "
        f"({len(val_set)} validation) for {train_cfg.epochs} epochs"
    )
    best_loss, best_epoch = float("inf"), -1
    best_state = copy.deepcopy(model.state_dict())
    train_losses: list[float] = []
    val_losses: list[float] = []
    if progress is not None:
        progress.start(train_cfg.epochs)
    try:
        for epoch in range(train_cfg.epochs):
            total, count = 0.0, 0
            for mb in train_loader:
                loss = training_step(mb, model, schedule, optimizer, gen, train_cfg.max_grad_norm)
                total += loss * mb[2].shape[0]
                count += mb[2].shape[0]
            train_loss = total / max(count, 1)
            train_losses.append(train_loss)
            score = train_loss
            if len(val_set) > 0:
                score = validation_loss(val_loader, model, schedule, val_seed)
                val_losses.append(score)
            if score < best_loss:
                best_loss, best_epoch = score, epoch
                best_state = copy.deepcopy(model.state_dict())
            if progress is not None:
                progress.update(epoch + 1, train_loss=train_loss, val_loss=score)
            if epoch % train_cfg.log_interval == 0 or epoch == train_cfg.epochs - 1:
                logger.info(
                    f"epoch {epoch + 1}/{train_cfg.epochs}: train {train_loss:.4f} "
                    f"val {score:.4f} (best {best_loss:.4f} @ {best_epoch + 1})"
                )
    finally:
        if progress is not None:
            progress.finish()

    model.load_state_dict(best_state)
    model.eval()
    artifact.metadata = {
        "best_epoch": best_epoch,
        "best_loss": best_loss,
        "train_losses": train_losses,
        "validation_losses": val_losses,
    }
    if out_dir is not None:
        artifact.save(out_dir)
    return artifact
