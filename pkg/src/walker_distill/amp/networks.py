"""Actor, critic, discriminator and running observation normalizer."""

import torch
from torch import nn


def mlp(in_dim: int, hidden: list[int], out_dim: int, activation=nn.ELU) -> nn.Sequential:
    layers: list[nn.Module] = []
    last = in_dim
    for width in hidden:
        layers += [nn.Linear(last, width), activation()]
        last = width
    layers.append(nn.Linear(last, out_dim))
    return nn.Sequential(*layers)


class PolicyNet(nn.Module):
    """Gaussian policy with a state-independent log-std."""

    LOG_STD_MIN = -4.0
    LOG_STD_MAX = 1.0

    def __init__(self, obs_dim: int, act_dim: int, hidden: list[int], init_log_std: float = -0.5):
        super().__init__()
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.net = mlp(obs_dim, hidden, act_dim)
        self.log_std = nn.Parameter(torch.full((act_dim,), init_log_std))

    def forward(self, obs: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        mean = self.net(obs)
        log_std = torch.clamp(self.log_std, self.LOG_STD_MIN, self.LOG_STD_MAX)
        return mean, log_std.expand_as(mean)

    def distribution(self, obs: torch.Tensor) -> torch.distributions.Normal:
        mean, log_std = self(obs)
        return torch.distributions.Normal(mean, log_std.exp())


class CriticNet(nn.Module):
    def __init__(self, obs_dim: int, hidden: list[int]):
        super().__init__()
        self.obs_dim = obs_dim
        self.net = mlp(obs_dim, hidden, 1)

    def forward(self, obs: torch.Tensor) -> torch.Tensor:
        return self.net(obs).squeeze(-1)


class Discriminator(nn.Module):
    """Scores a transition feature pair; ~1 for reference-like, ~-1 for policy-like."""

    def __init__(self, feature_dim: int, hidden: list[int]):
        super().__init__()
        self.feature_dim = feature_dim
        self.net = mlp(feature_dim, hidden, 1)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return self.net(features)


class RunningMeanStd(nn.Module):
    """Streaming per-dimension mean/variance (parallel-merge update), stored as buffers."""

    def __init__(self, dim: int, epsilon: float = 1e-4, clip: float = 10.0):
        super().__init__()
        self.clip = clip
        self.register_buffer("mean", torch.zeros(dim, dtype=torch.float64))
        self.register_buffer("var", torch.ones(dim, dtype=torch.float64))
        self.register_buffer("count", torch.tensor(epsilon, dtype=torch.float64))

    @torch.no_grad()
    def update(self, x: torch.Tensor) -> None:
        x = x.reshape(-1, self.mean.shape[0]).to(torch.float64)
        batch_mean = x.mean(0)
        batch_var = x.var(0, unbiased=False)
        n = x.shape[0]
        delta = batch_mean - self.mean
        total = self.count + n
        self.mean += delta * n / total
        m2 = self.var * self.count + batch_var * n + delta.pow(2) * self.count * n / total
        self.var.copy_(m2 / total)
        self.count.copy_(total)

    def normalize(self, x: torch.Tensor) -> torch.Tensor:
        std = torch.sqrt(self.var + 1e-8).to(x.dtype)
        out = (x - self.mean.to(x.dtype)) / std
        return torch.clamp(out, -self.clip, self.clip)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.normalize(x)
