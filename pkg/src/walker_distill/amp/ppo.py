"""Rollout storage, generalized advantage estimation and the clipped-surrogate update."""

import logging
from dataclasses import dataclass

import torch
from torch import nn

from ..errors import NumericalError
from .networks import CriticNet, PolicyNet
from .schemas import AMPConfig

logger = logging.getLogger(__name__)


@dataclass
class RolloutBuffer:
    """Time-major rollout tensors of shape (T, N, ...)."""

    obs: torch.Tensor
    privileged_obs: torch.Tensor
    actions: torch.Tensor
    log_probs: torch.Tensor
    values: torch.Tensor
    rewards: torch.Tensor
    dones: torch.Tensor
    last_values: torch.Tensor  # (N,)
    advantages: torch.Tensor | None = None
    returns: torch.Tensor | None = None

    @classmethod
    def allocate(cls, horizon: int, num_envs: int, obs_dim: int, priv_dim: int, act_dim: int):
        z = torch.zeros
        return cls(
            obs=z(horizon, num_envs, obs_dim),
            privileged_obs=z(horizon, num_envs, priv_dim),
            actions=z(horizon, num_envs, act_dim),
            log_probs=z(horizon, num_envs),
            values=z(horizon, num_envs),
            rewards=z(horizon, num_envs),
            dones=z(horizon, num_envs),
            last_values=z(num_envs),
        )


def compute_gae(
    rewards: torch.Tensor,
    values: torch.Tensor,
    dones: torch.Tensor,
    last_values: torch.Tensor,
    gamma: float,
    lam: float,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Advantages and returns; ``dones[t]`` cuts bootstrapping after step t."""
    horizon = rewards.shape[0]
    advantages = torch.zeros_like(rewards)
    gae = torch.zeros_like(last_values)
    for t in reversed(range(horizon)):
        next_values = last_values if t == horizon - 1 else values[t + 1]
        not_done = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_values * not_done - values[t]
        gae = delta + gamma * lam * not_done * gae
        advantages[t] = gae
    return advantages, advantages + values


def normalize_advantages(adv: torch.Tensor) -> torch.Tensor:
    if adv.numel() < 2:
        return adv - adv.mean()
    return (adv - adv.mean()) / (adv.std(unbiased=False) + 1e-8)


def clipped_surrogate(
    log_probs: torch.Tensor, old_log_probs: torch.Tensor, advantages: torch.Tensor, clip: float
) -> torch.Tensor:
    """Mean clipped surrogate objective (to be maximized)."""
    ratio = torch.exp(log_probs - old_log_probs)
    unclipped = ratio * advantages
    clipped = torch.clamp(ratio, 1.0 - clip, 1.0 + clip) * advantages
    return torch.min(unclipped, clipped).mean()


def _check_finite(loss: torch.Tensor, parts: dict[str, torch.Tensor], what: str) -> None:
    if not torch.isfinite(loss):
        raise NumericalError(
            f"Non-finite {what} loss", {k: float(v.detach()) for k, v in parts.items()}
        )


def ppo_update(
    buffer: RolloutBuffer,
    policy: PolicyNet,
    critic: CriticNet,
    optimizer: torch.optim.Optimizer,
    cfg: AMPConfig,
    generator: torch.Generator | None = None,
) -> dict[str, float]:
    advantages, returns = compute_gae(
        buffer.rewards, buffer.values, buffer.dones, buffer.last_values,
        cfg.gamma, cfg.gae_lambda,
    )
    buffer.advantages, buffer.returns = advantages, returns

    obs = buffer.obs.flatten(0, 1)
    priv = buffer.privileged_obs.flatten(0, 1)
    actions = buffer.actions.flatten(0, 1)
    old_log_probs = buffer.log_probs.flatten(0, 1)
    adv_all = advantages.flatten(0, 1)
    ret_all = returns.flatten(0, 1)

    total = obs.shape[0]
    mb_size = max(1, total // cfg.minibatches)
    stats = {"surrogate": 0.0, "value_loss": 0.0, "entropy": 0.0, "kl": 0.0}
    updates = 0
    params = list(policy.parameters()) + list(critic.parameters())

    for _ in range(cfg.epochs):
        order = torch.randperm(total, generator=generator)
        for start in range(0, total, mb_size):
            idx = order[start:start + mb_size]
            dist = policy.distribution(obs[idx])
            log_probs = dist.log_prob(actions[idx]).sum(-1)
            entropy = dist.entropy().sum(-1).mean()
            adv = normalize_advantages(adv_all[idx])

            surrogate = clipped_surrogate(log_probs, old_log_probs[idx], adv, cfg.clip_ratio)
            value_loss = (critic(priv[idx]) - ret_all[idx]).pow(2).mean()
            loss = -surrogate + cfg.value_coef * value_loss - cfg.entropy_coef * entropy
            _check_finite(
                loss, {"surrogate": surrogate, "value_loss": value_loss, "entropy": entropy},
                "policy",
            )

            optimizer.zero_grad()
            loss.backward()
            grad_norm = nn.utils.clip_grad_norm_(params, cfg.max_grad_norm)
            if not torch.isfinite(grad_norm):
                raise NumericalError("Non-finite policy gradient", {"grad_norm": float(grad_norm)})
            optimizer.step()

            with torch.no_grad():
                log_ratio = log_probs - old_log_probs[idx]
                kl = ((log_ratio.exp() - 1) - log_ratio).mean()
            stats["surrogate"] += float(surrogate)
            stats["value_loss"] += float(value_loss)
            stats["entropy"] += float(entropy)
            stats["kl"] += float(kl)
            updates += 1

    return {k: v / max(updates, 1) for k, v in stats.items()}
