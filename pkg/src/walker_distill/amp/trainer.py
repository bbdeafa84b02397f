"""Expert training loop: rollouts, style rewards, policy and discriminator updates."""

import copy
import logging
from collections import deque
from collections.abc import Callable
from pathlib import Path

import numpy as np
import torch

from ..errors import (
    ConfigurationError,
    NumericalError,
    TrainingDivergedError,
    WalkerDistillError,
)
from ..motion import MotionLibrary, generate_reference_clips
from ..progress import TrainingProgress
from ..randomization import (
    EpisodeSampler,
    RandomizationConfig,
    SetupId,
    build_setup,
)
from ..seeding import derive_seed, torch_generator
from ..sim.env import VecWalkerEnv
from ..sim.schemas import (
    ACTOR_OBS_DIM,
    NUM_JOINTS,
    PRIVILEGED_OBS_DIM,
    RobotModel,
    SimConfig,
    TerminationLimits,
)
from .artifact import PolicyArtifact
from .discriminator import discriminator_update
from .ppo import RolloutBuffer, ppo_update
from .rewards import regularization_terms, style_reward
from .schemas import AMPConfig

logger = logging.getLogger(__name__)

EnvFactory = Callable[[int, int], VecWalkerEnv]


def default_env_factory(
    randomization: RandomizationConfig,
    library: MotionLibrary,
    base_model: RobotModel | None = None,
    sim_config: SimConfig | None = None,
    limits: TerminationLimits | None = None,
    episode_steps: int = 500,
) -> EnvFactory:
    def factory(num_envs: int, seed: int) -> VecWalkerEnv:
        sampler = EpisodeSampler(randomization, library, base_model)
        return VecWalkerEnv(
            sampler, num_envs, seed, sim_config, limits, episode_steps=episode_steps
        )

    return factory


def _to_tensor(x: np.ndarray) -> torch.Tensor:
    return torch.as_tensor(x, dtype=torch.float32)


def checkpoint_score(
    artifact: PolicyArtifact,
    cfg: AMPConfig,
    seed: int,
    *,
    library: MotionLibrary,
    base_model: RobotModel | None = None,
    sim_config: SimConfig | None = None,
    limits: TerminationLimits | None = None,
) -> float:
    """Success rate minus tracking error of the mean-action policy on the fixed target."""
    # evaluation imports the expert artifact, so it is resolved at call time
    from ..evaluation.harness import run_seed
    from ..evaluation.policies import ExpertPolicy
    from ..evaluation.schemas import EvalProtocol

    protocol = EvalProtocol(target="fixed", episodes=cfg.eval_episodes, seeds=[seed])
    metrics = run_seed(
        ExpertPolicy.from_artifact(artifact),
        protocol,
        seed,
        library=library,
        base_model=base_model,
        sim_config=sim_config,
        limits=limits,
    )
    return metrics.success_rate - metrics.tracking_error


def train(
    cfg: AMPConfig,
    seed: int,
    env_factory: EnvFactory | None = None,
    *,
    randomization: RandomizationConfig | None = None,
    library: MotionLibrary | None = None,
    base_model: RobotModel | None = None,
    sim_config: SimConfig | None = None,
    limits: TerminationLimits | None = None,
    out_dir: str | Path | None = None,
    progress: TrainingProgress | None = None,
    require_full_randomization: bool = True,
) -> PolicyArtifact:
    """Train the expert until the step budget is spent; returns the best checkpoint."""
    randomization = randomization or build_setup(SetupId.ALL)
    flags = randomization.flags
    if require_full_randomization and not all(dict(flags).values()):
        raise ConfigurationError(
            f"Expert training expects every randomization cluster on, got setup "
            f"{randomization.setup_id.value}"
        )
    library = library or generate_reference_clips(model=base_model)
    env_factory = env_factory or default_env_factory(
        randomization, library, base_model, sim_config, limits, cfg.episode_steps
    )

    artifact = PolicyArtifact.initialize(cfg, seed)
    ref_features = _to_tensor(library.transitions())
    artifact.amp_norm.update(ref_features)

    steps_per_iter = cfg.num_envs * cfg.horizon
    iterations = cfg.total_env_steps // steps_per_iter
    if iterations == 0:
        logger.info("Zero training budget; returning the initialized expert")
        if out_dir is not None:
            artifact.save(out_dir)
        return artifact

    env = env_factory(cfg.num_envs, derive_seed(seed, "env"))
    gen = torch_generator(derive_seed(seed, "ppo"))
    ref_rng = np.random.default_rng(derive_seed(seed, "reference"))
    optimizer = torch.optim.Adam(
        list(artifact.policy.parameters()) + list(artifact.critic.parameters()),
        lr=cfg.learning_rate,
    )
    disc_optimizer = torch.optim.Adam(
        artifact.discriminator.parameters(), lr=cfg.disc_learning_rate
    )

    w = cfg.rewards
    n, horizon = cfg.num_envs, cfg.horizon
    obs = env.observations()
    priv = env.observations(privileged=True)
    ep_return = np.zeros(n)
    ep_length = np.zeros(n, dtype=np.int64)
    recent_returns: deque[float] = deque(maxlen=100)
    recent_lengths: deque[int] = deque(maxlen=100)

    best_score = -np.inf
    best_iter = 0
    peak_iter, peak_length = 0, 0.0
    best_state = copy.deepcopy(artifact.state_groups())
    if progress is not None:
        progress.start(iterations)

    try:
        for it in range(iterations):
            buffer = RolloutBuffer.allocate(
                horizon, n, ACTOR_OBS_DIM, PRIVILEGED_OBS_DIM, NUM_JOINTS
            )
            features = np.zeros((horizon, n, ref_features.shape[1]), dtype=np.float32)
            task = np.zeros((horizon, n))
            regularization = np.zeros((horizon, n))
            bootstrap = np.zeros((horizon, n))

            for t in range(horizon):
                obs_t, priv_t = _to_tensor(obs), _to_tensor(priv)
                artifact.obs_norm.update(obs_t)
                artifact.priv_norm.update(priv_t)
                with torch.no_grad():
                    obs_n = artifact.obs_norm(obs_t)
                    priv_n = artifact.priv_norm(priv_t)
                    dist = artifact.policy.distribution(obs_n)
                    noise = torch.randn(dist.mean.shape, generator=gen)
                    action = dist.mean + dist.stddev * noise
                    log_prob = dist.log_prob(action).sum(-1)
                    value = artifact.critic(priv_n)

                out = env.step(action.numpy())
                after = out.features_after
                vel = out.base_velocity
                task[t] = w.w_v * np.exp(-np.abs(out.commands[:, 0] - vel[:, 0])) + (
                    w.w_omega * np.exp(-np.abs(out.commands[:, 1] - vel[:, 2]))
                )
                terms = regularization_terms(
                    out.joint_pos, after[:, 4:8], out.joint_acc, after[:, 9:11],
                    env.arrays.joint_lower, env.arrays.joint_upper, w,
                )
                regularization[t] = sum(terms.values())
                if np.any(out.truncated):
                    with torch.no_grad():
                        terminal_v = artifact.critic(
                            artifact.priv_norm(_to_tensor(out.terminal_privileged_obs))
                        ).numpy()
                    bootstrap[t] = np.where(out.truncated, cfg.gamma * terminal_v, 0.0)

                features[t] = np.concatenate([out.features_before, after], axis=-1)
                buffer.obs[t] = obs_n
                buffer.privileged_obs[t] = priv_n
                buffer.actions[t] = action
                buffer.log_probs[t] = log_prob
                buffer.values[t] = value
                buffer.dones[t] = _to_tensor(out.done.astype(np.float32))
                obs, priv = out.obs, out.privileged_obs

            with torch.no_grad():
                buffer.last_values = artifact.critic(artifact.priv_norm(_to_tensor(priv)))
                feats_t = _to_tensor(features)
                style = style_reward(
                    artifact.discriminator, artifact.amp_norm(feats_t)
                ).numpy()
            rewards = task + w.w_style * style + regularization
            if not np.all(np.isfinite(rewards)):
                raise NumericalError(f"Non-finite rewards at iteration {it}", {"iteration": it})
            buffer.rewards = _to_tensor(rewards + bootstrap)

            dones = buffer.dones.numpy().astype(bool)
            for t in range(horizon):
                ep_return += rewards[t]
                ep_length += 1
                for i in np.flatnonzero(dones[t]):
                    recent_returns.append(float(ep_return[i]))
                    recent_lengths.append(int(ep_length[i]))
                    ep_return[i] = 0.0
                    ep_length[i] = 0

            stats = ppo_update(buffer, artifact.policy, artifact.critic, optimizer, cfg, gen)

            policy_feats = feats_t.reshape(-1, feats_t.shape[-1])
            for _ in range(cfg.disc_updates):
                size = min(cfg.disc_batch_size, policy_feats.shape[0], ref_features.shape[0])
                pol_idx = torch.randperm(policy_feats.shape[0], generator=gen)[:size]
                ref_idx = torch.as_tensor(
                    ref_rng.choice(ref_features.shape[0], size=size, replace=False)
                )
                stats.update(
                    discriminator_update(
                        artifact.amp_norm(ref_features[ref_idx]),
                        artifact.amp_norm(policy_feats[pol_idx]),
                        artifact.discriminator,
                        disc_optimizer,
                        cfg.gradient_penalty,
                    )
                )

            artifact.step_count = (it + 1) * steps_per_iter
            mean_return = float(np.mean(recent_returns)) if recent_returns else float("nan")
            mean_length = float(np.mean(recent_lengths)) if recent_lengths else 0.0
            stats.update(
                task_reward=float(task.mean()),
                style_reward=float(style.mean()),
                regularization_reward=float(regularization.mean()),
                episode_return=mean_return,
                episode_length=mean_length,
            )

            if recent_lengths and mean_length > peak_length:
                peak_iter, peak_length = it, mean_length
            if (it + 1) % cfg.eval_interval == 0 or it == iterations - 1:
                score = checkpoint_score(
                    artifact, cfg, derive_seed(seed, "checkpoint"), library=library,
                    base_model=base_model, sim_config=sim_config, limits=limits,
                )
                stats["checkpoint_score"] = score
                logger.info(f"[expert] checkpoint at iter {it + 1}: score {score:.3f}")
                if score > best_score:
                    best_score, best_iter = score, it
                    best_state = copy.deepcopy(artifact.state_groups())

            if progress is not None:
                progress.update(it + 1, **{k: v for k, v in stats.items() if np.isfinite(v)})
            if it % cfg.log_interval == 0 or it == iterations - 1:
                logger.info(
                    f"[expert] iter {it + 1}/{iterations} steps {artifact.step_count} "
                    f"return {mean_return:.2f} length {mean_length:.1f} "
                    f"task {stats['task_reward']:.3f} style {stats['style_reward']:.3f} "
                    f"reg {stats['regularization_reward']:.4f} kl {stats['kl']:.4f} "
                    f"disc {stats.get('disc_loss', float('nan')):.3f}"
                )

            if (
                it - peak_iter > cfg.divergence_patience
                and recent_lengths
                and mean_length < 0.05 * max(peak_length, 1.0)
            ):
                raise TrainingDivergedError(
                    f"Episode length collapsed to {mean_length:.1f} (peak {peak_length:.1f} "
                    f"at iteration {peak_iter})"
                )
    except WalkerDistillError:
        artifact.load_groups(best_state)
        artifact.metadata = {"best_score": best_score, "failed": True}
        if out_dir is not None:
            artifact.save(out_dir)
        raise
    finally:
        if progress is not None:
            progress.finish()

    artifact.load_groups(best_state)
    artifact.metadata = {"best_score": best_score, "best_iteration": best_iter}
    if out_dir is not None:
        artifact.save(out_dir)
    return artifact
