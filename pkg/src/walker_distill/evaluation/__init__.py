"""Evaluation harness: target environments, policies and metrics."""

from .base import BasePolicy, PolicyRegistry
from .harness import evaluate, recompute_from_trajectories, run_seed, target_sampler
from .metrics import (
    aggregate_seeds,
    mean_std,
    smoothness,
    success_rate,
    summarize_seed,
    tracking_error,
)
from .policies import DiffusionPolicy, ExpertPolicy, ScriptedPolicy, ZeroPolicy, load_policy
from .schemas import METRICS, EpisodeOutcome, EvalProtocol, MetricsReport, SeedMetrics

__all__ = [
    "METRICS",
    "BasePolicy",
    "DiffusionPolicy",
    "EpisodeOutcome",
    "EvalProtocol",
    "ExpertPolicy",
    "MetricsReport",
    "PolicyRegistry",
    "ScriptedPolicy",
    "SeedMetrics",
    "ZeroPolicy",
    "aggregate_seeds",
    "evaluate",
    "load_policy",
    "mean_std",
    "recompute_from_trajectories",
    "run_seed",
    "smoothness",
    "success_rate",
    "summarize_seed",
    "target_sampler",
    "tracking_error",
]
