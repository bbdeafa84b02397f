"""Expert training configuration."""

from typing import Annotated

from pydantic import BaseModel, Field


class RewardWeights(BaseModel):
    w_v: Annotated[float, Field(description="forward-velocity tracking weight")] = 1.0
    w_omega: Annotated[float, Field(description="pitch-rate tracking weight")] = 0.5
    w_style: Annotated[float, Field(ge=0.0, description="discriminator style reward weight")] = 0.5
    joint_upper_limit: float = -4.0
    joint_lower_limit: float = -4.0
    joint_velocity: float = -3.0e-5
    joint_acceleration: float = -1.0e-7
    base_orientation: float = -1.0
    squared_norms: Annotated[
        bool, Field(description="square the velocity, acceleration and gravity norms")
    ] = True


class AMPConfig(BaseModel):
    """Actor-critic plus style discriminator hyperparameters."""

    total_env_steps: Annotated[int, Field(ge=0, description="environment step budget")] = 2_000_000
    num_envs: Annotated[int, Field(gt=0)] = 64
    horizon: Annotated[int, Field(gt=0, description="rollout length per iteration")] = 32
    epochs: Annotated[int, Field(gt=0)] = 5
    minibatches: Annotated[int, Field(gt=0)] = 4
    learning_rate: Annotated[float, Field(gt=0.0)] = 3e-4
    gamma: Annotated[float, Field(gt=0.0, le=1.0)] = 0.99
    gae_lambda: Annotated[float, Field(ge=0.0, le=1.0)] = 0.95
    clip_ratio: Annotated[float, Field(gt=0.0)] = 0.2
    value_coef: Annotated[float, Field(ge=0.0)] = 1.0
    entropy_coef: Annotated[float, Field(ge=0.0)] = 1e-3
    max_grad_norm: Annotated[float, Field(gt=0.0)] = 1.0
    hidden_sizes: list[int] = [256, 256]
    init_log_std: float = -0.5

    disc_hidden_sizes: list[int] = [256, 256]
    disc_learning_rate: Annotated[float, Field(gt=0.0)] = 1e-4
    disc_updates: Annotated[int, Field(ge=0, description="discriminator steps per iteration")] = 2
    disc_batch_size: Annotated[int, Field(gt=0)] = 512
    gradient_penalty: Annotated[float, Field(ge=0.0)] = 5.0

    episode_steps: Annotated[int, Field(gt=0, description="10 s at 50 Hz")] = 500
    divergence_patience: Annotated[
        int, Field(gt=0, description="iterations without improvement before collapse checks")
    ] = 200
    eval_interval: Annotated[
        int, Field(gt=0, description="iterations between checkpoint evaluations")
    ] = 50
    eval_episodes: Annotated[
        int, Field(gt=0, description="fixed-target episodes per checkpoint evaluation")
    ] = 8
    log_interval: Annotated[int, Field(gt=0)] = 10
    rewards: RewardWeights = RewardWeights()
