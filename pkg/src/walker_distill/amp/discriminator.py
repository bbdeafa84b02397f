"""Least-squares style discriminator objective with a gradient penalty on reference data."""

import torch
from torch import nn

from ..errors import InvalidArgumentError, NumericalError


def discriminator_loss(
    disc: nn.Module, ref_batch: torch.Tensor, policy_batch: torch.Tensor, gradient_penalty: float
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Returns (total, prediction, penalty) where total = prediction + w_gp * penalty."""
    if ref_batch.shape[0] != policy_batch.shape[0]:
        raise InvalidArgumentError(
            f"Reference and policy batches differ in size: {ref_batch.shape[0]} vs "
            f"{policy_batch.shape[0]}"
        )
    ref = ref_batch.detach().clone().requires_grad_(True)
    ref_scores = disc(ref).reshape(-1)
    pol_scores = disc(policy_batch.detach()).reshape(-1)
    prediction = (ref_scores - 1.0).pow(2).mean() + (pol_scores + 1.0).pow(2).mean()

    grad = torch.autograd.grad(ref_scores.sum(), ref, create_graph=True)[0]
    penalty = grad.pow(2).sum(-1).mean()
    return prediction + gradient_penalty * penalty, prediction, penalty


def discriminator_update(
    ref_batch: torch.Tensor,
    policy_batch: torch.Tensor,
    disc: nn.Module,
    optimizer: torch.optim.Optimizer,
    gradient_penalty: float = 5.0,
) -> dict[str, float]:
    total, prediction, penalty = discriminator_loss(disc, ref_batch, policy_batch, gradient_penalty)
    if not torch.isfinite(total):
        raise NumericalError(
            "Non-finite discriminator loss",
            {"prediction": float(prediction.detach()), "penalty": float(penalty.detach())},
        )
    optimizer.zero_grad()
    total.backward()
    optimizer.step()
    return {
        "disc_loss": float(total.detach()),
        "disc_prediction": float(prediction.detach()),
        "disc_penalty": float(penalty.detach()),
    }
