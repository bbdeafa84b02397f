"""Linear DDPM noise schedule and the forward noising process."""

from dataclasses import dataclass

import torch
from diffusers import DDPMScheduler

from ..errors import InvalidArgumentError
from .schemas import DiffusionConfig

MAX_BETA = 0.999


@dataclass
class NoiseSchedule:
    """betas, alphas and alphas_cumprod are indexed 0..K-1 for steps t = 1..K."""

    betas: torch.Tensor
    alphas: torch.Tensor
    alphas_cumprod: torch.Tensor

    @property
    def steps(self) -> int:
        return self.betas.shape[0]

    def scheduler(self) -> DDPMScheduler:
        """Ancestral sampler over exactly these betas (fixed-small posterior variance)."""
        return DDPMScheduler(
            num_train_timesteps=self.steps,
            trained_betas=self.betas.tolist(),
            variance_type="fixed_small",
            clip_sample=False,
            prediction_type="epsilon",
        )


def build_noise_schedule(
    cfg: DiffusionConfig | None = None,
    *,
    steps: int | None = None,
    beta_min: float | None = None,
    beta_max: float | None = None,
) -> NoiseSchedule:
    """Linear beta schedule over ``steps`` denoising steps.

    By default the bounds are rescaled: ``DiffusionConfig.reference_steps`` is
    1000, so with K steps both betas are multiplied by 1000 / K and capped at
    ``MAX_BETA``. A config with ``reference_steps=None`` gives the plain
    ``linspace(beta_min, beta_max, K)`` schedule.
    """
    cfg = cfg or DiffusionConfig()
    steps = steps if steps is not None else cfg.denoising_steps
    beta_min = beta_min if beta_min is not None else cfg.beta_min
    beta_max = beta_max if beta_max is not None else cfg.beta_max
    if steps < 1:
        raise InvalidArgumentError(f"Need at least one denoising step, got {steps}")
    if not 0.0 < beta_min <= beta_max < 1.0:
        raise InvalidArgumentError(f"Invalid beta bounds ({beta_min}, {beta_max})")

    if cfg.reference_steps is not None and steps != cfg.reference_steps:
        ratio = cfg.reference_steps / steps
        beta_min = min(beta_min * ratio, MAX_BETA)
        beta_max = min(beta_max * ratio, MAX_BETA)

    if steps == 1:
        betas = torch.tensor([beta_min], dtype=torch.float64)
    else:
        betas = torch.linspace(beta_min, beta_max, steps, dtype=torch.float64)
    alphas = 1.0 - betas
    return NoiseSchedule(betas, alphas, torch.cumprod(alphas, dim=0))


def _check_timesteps(t: torch.Tensor, schedule: NoiseSchedule) -> None:
    if torch.any(t < 1) or torch.any(t > schedule.steps):
        raise InvalidArgumentError(
            f"Diffusion step must lie in [1, {schedule.steps}], got {t.tolist()}"
        )


def forward_noising(
    x0: torch.Tensor, t: int | torch.Tensor, eps: torch.Tensor, schedule: NoiseSchedule
) -> torch.Tensor:
    """x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, with t in [1, K] (scalar or per sample)."""
    if eps.shape != x0.shape:
        raise InvalidArgumentError(f"Noise shape {tuple(eps.shape)} != {tuple(x0.shape)}")
    t = torch.as_tensor(t, dtype=torch.long)
    _check_timesteps(t, schedule)
    abar = schedule.alphas_cumprod.to(x0.dtype)[t - 1]
    if abar.ndim > 0:
        abar = abar.reshape(-1, *([1] * (x0.ndim - 1)))
    return abar.sqrt() * x0 + (1.0 - abar).sqrt() * eps
