"""Batched evaluation of a policy on a target environment."""

import logging
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from ..motion import MotionLibrary, generate_reference_clips
from ..progress import TrainingProgress
from ..randomization.schemas import CommandRanges
from ..randomization.setups import EpisodeSampler, build_target_env
from ..seeding import derive_seed
from ..sim.env import VecWalkerEnv
from ..sim.schemas import ACTOR_OBS_DIM, NUM_JOINTS, RobotModel, SimConfig, TerminationLimits
from .base import BasePolicy
from .metrics import aggregate_seeds, smoothness, summarize_seed, tracking_error
from .schemas import EpisodeOutcome, EvalProtocol, MetricsReport, SeedMetrics

logger = logging.getLogger(__name__)


def _check_dims(policy: BasePolicy) -> None:
    if (policy.obs_dim, policy.act_dim) != (ACTOR_OBS_DIM, NUM_JOINTS):
        raise ConfigurationError(
            f"Policy {policy.model_id} has dims ({policy.obs_dim}, {policy.act_dim}); the "
            f"environment needs ({ACTOR_OBS_DIM}, {NUM_JOINTS})"
        )


def target_sampler(
    protocol: EvalProtocol, library: MotionLibrary, base_model: RobotModel | None = None
) -> EpisodeSampler:
    config = build_target_env(protocol.target).model_copy(
        update={
            "command_ranges": CommandRanges(
                v_x=(protocol.command, protocol.command), omega=(0.0, 0.0)
            )
        }
    )
    return EpisodeSampler(config, library, base_model)


def run_seed(
    policy: BasePolicy,
    protocol: EvalProtocol,
    seed: int,
    *,
    library: MotionLibrary,
    base_model: RobotModel | None = None,
    sim_config: SimConfig | None = None,
    limits: TerminationLimits | None = None,
    trajectory_path: Path | None = None,
) -> SeedMetrics:
    """Run ``protocol.episodes`` episodes side by side, without auto-reset."""
    sim_config = sim_config or SimConfig(control_rate_hz=protocol.control_rate_hz)
    env = VecWalkerEnv(
        target_sampler(protocol, library, base_model),
        protocol.episodes,
        derive_seed(seed, "eval", protocol.target.value),
        sim_config,
        limits,
        episode_steps=protocol.episode_steps,
        auto_reset=False,
    )
    n, steps = protocol.episodes, protocol.episode_steps
    policy.reset(n, derive_seed(seed, "policy"))

    velocities = np.zeros((steps, n))
    actions = np.zeros((steps, n, NUM_JOINTS))
    executed = np.zeros(n, dtype=np.int64)
    terminated = np.zeros(n, dtype=bool)
    commands = env.commands[:, 0].copy()

    obs = env.observations()
    for t in range(steps):
        if not env.active.any():
            break
        out = env.step(policy.act(obs))
        rows = np.flatnonzero(out.active)
        velocities[t, rows] = out.base_velocity[rows, 0]
        actions[t, rows] = out.actions[rows]
        executed[rows] += 1
        terminated |= out.terminated
        obs = out.obs

    outcomes = []
    for i in range(n):
        k = int(executed[i])
        outcomes.append(
            EpisodeOutcome(
                seed=seed,
                episode=i,
                survived=not terminated[i],
                steps=k,
                tracking_error=tracking_error(velocities[:k, i], float(commands[i])),
                smoothness=smoothness(actions[:k, i]),
            )
        )

    if trajectory_path is not None:
        trajectory_path.parent.mkdir(parents=True, exist_ok=True)
        np.savez_compressed(
            trajectory_path,
            base_velocity_x=velocities,
            actions=actions,
            executed_steps=executed,
            terminated=terminated,
            commands=commands,
        )
    metrics = summarize_seed(seed, outcomes)
    logger.info(
        f"{policy.model_id} on {protocol.target.value} seed {seed}: "
        f"success {metrics.success_rate:.3f} tracking {metrics.tracking_error:.3f} "
        f"smoothness {metrics.smoothness:.3f}"
    )
    return metrics


def evaluate(
    policy: BasePolicy,
    protocol: EvalProtocol,
    *,
    library: MotionLibrary | None = None,
    base_model: RobotModel | None = None,
    sim_config: SimConfig | None = None,
    limits: TerminationLimits | None = None,
    trajectory_dir: str | Path | None = None,
    progress: TrainingProgress | None = None,
) -> MetricsReport:
    """Evaluate a loaded policy for every protocol seed; aggregates mean ± std over seeds."""
    _check_dims(policy)
    library = library or generate_reference_clips(model=base_model)
    if progress is not None:
        progress.start(len(protocol.seeds))
    per_seed = []
    try:
        for k, seed in enumerate(protocol.seeds):
            path = None
            if trajectory_dir is not None and protocol.record_trajectories:
                path = Path(trajectory_dir) / f"{protocol.target.value}_seed{seed}.npz"
            per_seed.append(
                run_seed(
                    policy,
                    protocol,
                    seed,
                    library=library,
                    base_model=base_model,
                    sim_config=sim_config,
                    limits=limits,
                    trajectory_path=path,
                )
            )
            if progress is not None:
                progress.update(k + 1, success_rate=per_seed[-1].success_rate)
    finally:
        if progress is not None:
            progress.finish()

    mean, std = aggregate_seeds(per_seed)
    return MetricsReport(
        policy=policy.model_id,
        target=protocol.target,
        protocol=protocol,
        per_seed=per_seed,
        mean=mean,
        std=std,
    )


def recompute_from_trajectories(path: str | Path, seed: int) -> SeedMetrics:
    """Offline recomputation of one seed's metrics from a stored trajectory dump."""
    data = np.load(path)
    outcomes = []
    for i, k in enumerate(data["executed_steps"]):
        k = int(k)
        outcomes.append(
            EpisodeOutcome(
                seed=seed,
                episode=i,
                survived=not bool(data["terminated"][i]),
                steps=k,
                tracking_error=tracking_error(
                    data["base_velocity_x"][:k, i], float(data["commands"][i])
                ),
                smoothness=smoothness(data["actions"][:k, i]),
            )
        )
    return summarize_seed(seed, outcomes)
