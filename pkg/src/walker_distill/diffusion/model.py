"""Transformer denoiser conditioned on observation-action history and the command."""

import math

import torch
from einops import rearrange
from torch import nn

from .schemas import DiffusionConfig


def encoder_mlp(in_dim: int, width: int, depth: int) -> nn.Sequential:
    layers: list[nn.Module] = []
    last = in_dim
    for _ in range(depth):
        layers += [nn.Linear(last, width), nn.Mish()]
        last = width
    layers.append(nn.Linear(last, width))
    return nn.Sequential(*layers)


class SinusoidalTimestepEmbedding(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.dim = dim

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        half = self.dim // 2
        dtype = t.dtype if t.is_floating_point() else torch.float32
        freqs = torch.exp(
            -math.log(10000.0) * torch.arange(half, device=t.device, dtype=dtype) / half
        )
        args = t.to(dtype)[:, None] * freqs[None, :]
        emb = torch.cat([args.sin(), args.cos()], dim=-1)
        if self.dim % 2:
            emb = nn.functional.pad(emb, (0, 1))
        return emb


class DenoiserModel(nn.Module):
    """Predicts the noise in a (H_p, act_dim) action sequence.

    Conditioning is three memory tokens (history, goal, diffusion step) that the
    decoder cross-attends to; the noisy actions are the decoder's query sequence.
    """

    def __init__(self, obs_dim: int, act_dim: int, goal_dim: int, cfg: DiffusionConfig):
        super().__init__()
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.goal_dim = goal_dim
        self.cfg = cfg
        w = cfg.width

        self.history_encoder = encoder_mlp(cfg.obs_history * (obs_dim + act_dim), w,
                                           cfg.encoder_layers)
        self.goal_encoder = encoder_mlp(goal_dim, w, cfg.encoder_layers)
        self.timestep_embedding = nn.Sequential(
            SinusoidalTimestepEmbedding(w), nn.Linear(w, 4 * w), nn.Mish(), nn.Linear(4 * w, w)
        )

        self.action_proj = nn.Linear(act_dim, w)
        self.position = nn.Parameter(torch.zeros(1, cfg.horizon, w))
        nn.init.normal_(self.position, std=0.02)
        layer = nn.TransformerDecoderLayer(
            d_model=w,
            nhead=cfg.heads,
            dim_feedforward=4 * w,
            dropout=cfg.dropout,
            activation="gelu",
            batch_first=True,
            norm_first=True,
        )
        self.decoder = nn.TransformerDecoder(layer, num_layers=cfg.decoder_layers)
        self.out_norm = nn.LayerNorm(w)
        self.out_proj = nn.Linear(w, act_dim)

    def forward(
        self,
        noisy_actions: torch.Tensor,
        timesteps: torch.Tensor,
        history: torch.Tensor,
        goal: torch.Tensor,
    ) -> torch.Tensor:
        """
        :param noisy_actions: (B, H_p, act_dim)
        :param timesteps: (B,) zero-indexed diffusion steps
        :param history: (B, H_o, obs_dim + act_dim)
        :param goal: (B, goal_dim)
        :return: predicted noise, same shape as noisy_actions
        """
        batch = noisy_actions.shape[0]
        if timesteps.ndim == 0:
            timesteps = timesteps.expand(batch)
        memory = torch.stack(
            [
                self.history_encoder(rearrange(history, "b h d -> b (h d)")),
                self.goal_encoder(goal),
                self.timestep_embedding(timesteps.to(noisy_actions.dtype)),
            ],
            dim=1,
        )
        tokens = self.action_proj(noisy_actions) + self.position[:, : noisy_actions.shape[1]]
        out = self.decoder(tokens, memory)
        return self.out_proj(self.out_norm(out))
