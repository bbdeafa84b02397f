"""Evaluation protocol and metric records."""

from typing import Annotated

from pydantic import BaseModel, Field, model_validator

from ..randomization.setups import EVALUATION_SPEED, TargetKind

METRICS = ("success_rate", "tracking_error", "smoothness")
EPISODE_SECONDS = 10.0


class EvalProtocol(BaseModel):
    target: TargetKind = TargetKind.FIXED
    episodes: Annotated[int, Field(ge=1, description="episodes per seed")] = 100
    episode_steps: Annotated[int, Field(ge=1, description="control steps per episode")] = 500
    control_rate_hz: Annotated[float, Field(gt=0.0)] = 50.0
    command: Annotated[float, Field(description="commanded forward speed (m/s)")] = (
        EVALUATION_SPEED
    )
    seeds: Annotated[list[int], Field(min_length=1)] = [0]
    record_trajectories: Annotated[
        bool, Field(description="keep per-episode velocity/action traces for offline audit")
    ] = False

    @model_validator(mode="after")
    def _check(self) -> "EvalProtocol":
        if abs(self.episode_steps / self.control_rate_hz - EPISODE_SECONDS) > 1e-9:
            raise ValueError(
                f"{self.episode_steps} steps at {self.control_rate_hz} Hz is not "
                f"{EPISODE_SECONDS:g} s"
            )
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("Evaluation seeds must be distinct")
        return self

    @property
    def duration(self) -> float:
        return self.episode_steps / self.control_rate_hz


class EpisodeOutcome(BaseModel):
    seed: int
    episode: int
    survived: bool
    steps: int
    tracking_error: float
    smoothness: float


class SeedMetrics(BaseModel):
    seed: int
    success_rate: float
    tracking_error: float
    smoothness: float
    episodes: list[EpisodeOutcome] = []

    def metric(self, name: str) -> float:
        return float(getattr(self, name))


class MetricsReport(BaseModel):
    policy: str
    target: TargetKind
    protocol: EvalProtocol
    per_seed: list[SeedMetrics]
    mean: dict[str, float]
    std: dict[str, float]

    def to_text(self) -> str:
        """One record per seed plus the aggregate row."""
        lines = []
        for s in self.per_seed:
            lines.append(
                f"policy={self.policy} target={self.target.value} seed={s.seed} "
                f"success_rate={s.success_rate:.4f} tracking_error={s.tracking_error:.4f} "
                f"smoothness={s.smoothness:.4f}"
            )
        cells = " ".join(
            f"{m}={self.mean[m]:.4f}±{self.std[m]:.4f}" for m in METRICS
        )
        lines.append(f"policy={self.policy} target={self.target.value} aggregate {cells}")
        return "\n".join(lines) + "\n"
