"""Success rate, velocity tracking error and action smoothness."""

import logging
from collections.abc import Sequence

import numpy as np

from ..errors import InvalidArgumentError
from .schemas import METRICS, EpisodeOutcome, SeedMetrics

logger = logging.getLogger(__name__)


def success_rate(outcomes: Sequence[EpisodeOutcome] | Sequence[bool]) -> float:
    if len(outcomes) == 0:
        raise InvalidArgumentError("success_rate needs at least one episode")
    survived = [o.survived if isinstance(o, EpisodeOutcome) else bool(o) for o in outcomes]
    return sum(survived) / len(survived)


def tracking_error(velocities: np.ndarray, command: float) -> float:
    """Mean |v_x - v_hat_x| over the executed steps of one episode."""
    v = np.asarray(velocities, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise InvalidArgumentError("tracking_error of an empty trajectory")
    return float(np.mean(np.abs(v - command)))


def smoothness(actions: np.ndarray) -> float:
    """Sum over consecutive actions of the squared L2 norm of their difference."""
    a = np.asarray(actions, dtype=np.float64)
    if a.shape[0] < 2:
        logger.debug(f"smoothness of {a.shape[0]} action(s) is 0 by convention")
        return 0.0
    diffs = np.diff(a.reshape(a.shape[0], -1), axis=0)
    return float(np.sum(diffs * diffs))


def summarize_seed(seed: int, outcomes: list[EpisodeOutcome]) -> SeedMetrics:
    ordered = sorted(outcomes, key=lambda o: o.episode)
    return SeedMetrics(
        seed=seed,
        success_rate=success_rate(ordered),
        tracking_error=float(np.mean([o.tracking_error for o in ordered])),
        smoothness=float(np.mean([o.smoothness for o in ordered])),
        episodes=ordered,
    )


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Mean and population standard deviation."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise InvalidArgumentError("mean_std of no values")
    return float(arr.mean()), float(arr.std())


def aggregate_seeds(per_seed: list[SeedMetrics]) -> tuple[dict[str, float], dict[str, float]]:
    ordered = sorted(per_seed, key=lambda s: s.seed)
    mean, std = {}, {}
    for name in METRICS:
        mean[name], std[name] = mean_std([s.metric(name) for s in ordered])
    return mean, std
