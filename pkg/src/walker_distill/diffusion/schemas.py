"""Diffusion policy architecture and training settings."""

from enum import Enum
from typing import Annotated

from pydantic import BaseModel, Field, model_validator


class ScheduleKind(str, Enum):
    LINEAR = "linear"


class DiffusionConfig(BaseModel):
    obs_history: Annotated[int, Field(ge=1, description="H_o conditioning pairs")] = 4
    horizon: Annotated[int, Field(ge=1, description="H_p predicted actions")] = 8
    denoising_steps: Annotated[int, Field(ge=1, description="K")] = 10
    schedule: ScheduleKind = ScheduleKind.LINEAR
    beta_min: Annotated[float, Field(gt=0.0, lt=1.0)] = 1e-4
    beta_max: Annotated[float, Field(gt=0.0, lt=1.0)] = 0.02
    reference_steps: Annotated[
        int | None,
        Field(ge=1, description="step count the beta bounds refer to; None disables rescaling"),
    ] = 1000
    width: Annotated[int, Field(gt=0)] = 256
    heads: Annotated[int, Field(gt=0)] = 8
    decoder_layers: Annotated[int, Field(gt=0)] = 6
    encoder_layers: Annotated[int, Field(ge=1, description="MLP depth of each encoder")] = 2
    dropout: Annotated[float, Field(ge=0.0, lt=1.0)] = 0.0

    @model_validator(mode="after")
    def _check(self) -> "DiffusionConfig":
        if self.width % self.heads != 0:
            raise ValueError(f"heads ({self.heads}) must divide width ({self.width})")
        if self.beta_min > self.beta_max:
            raise ValueError("beta_min must not exceed beta_max")
        return self


class DPTrainConfig(BaseModel):
    epochs: Annotated[int, Field(ge=0)] = 50
    batch_size: Annotated[int, Field(gt=0)] = 256
    learning_rate: Annotated[float, Field(gt=0.0)] = 1e-4
    weight_decay: Annotated[float, Field(ge=0.0)] = 1e-6
    validation_fraction: Annotated[float, Field(ge=0.0, lt=1.0)] = 0.05
    max_grad_norm: Annotated[float, Field(gt=0.0)] = 1.0
    loader_workers: Annotated[int, Field(ge=0)] = 0
    log_interval: Annotated[int, Field(gt=0, description="epochs between log lines")] = 1
