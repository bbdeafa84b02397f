"""Procedural reference gaits standing in for motion-capture clips."""

import logging
from dataclasses import dataclass
from typing import Annotated

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .errors import ConfigurationError
from .sim.control import projected_gravity
from .sim.dynamics import ModelArrays, TerrainArrays
from .sim.schemas import RobotModel, Terrain
from .sim.step import ground_clearance_height

logger = logging.getLogger(__name__)


class GaitParams(BaseModel):
    """Sinusoidal walk: hip_i = A_h sin(2 pi f t + phi_i), knee_i = A_k max(0, sin(... + phi_k))."""

    frequency_hz: Annotated[float, Field(gt=0.0, description="stride cycles per second")] = 1.0
    speeds: Annotated[
        list[float], Field(description="m/s per clip; negative walks backwards")
    ] = [-0.5, 0.0, 0.5, 1.0]
    knee_amplitude: Annotated[float, Field(ge=0.0, description="rad")] = 0.6
    knee_phase: Annotated[float, Field(description="rad lead of knee flexion over hip")] = (
        np.pi / 2
    )
    max_hip_amplitude: Annotated[float, Field(gt=0.0, description="rad")] = 0.6
    duration_s: Annotated[float, Field(gt=0.0)] = 4.0
    fps: Annotated[int, Field(gt=0)] = 50

    @model_validator(mode="after")
    def _check(self) -> "GaitParams":
        if len(set(self.speeds)) < 2:
            raise ValueError("Need at least two clips with distinct speeds")
        return self


@dataclass
class MotionClip:
    joint_pos: np.ndarray  # (T, 4)
    joint_vel: np.ndarray  # (T, 4)
    base_height: np.ndarray  # (T,)
    pitch: np.ndarray  # (T,)
    speed: float
    fps: int

    def __len__(self) -> int:
        return self.joint_pos.shape[0]

    def features(self) -> np.ndarray:
        """Per-frame discriminator features (T, 11), same layout as the simulator's."""
        return np.concatenate(
            [
                self.joint_pos,
                self.joint_vel,
                self.base_height[:, None],
                projected_gravity(self.pitch),
            ],
            axis=-1,
        )


@dataclass
class MotionLibrary:
    clips: list[MotionClip]

    def __post_init__(self):
        for clip in self.clips:
            if len(clip) < 2:
                raise ConfigurationError("Reference clips need at least two frames")
            if not np.all(np.isfinite(clip.features())):
                raise ConfigurationError("Reference clip contains non-finite frames")

    def __len__(self) -> int:
        return len(self.clips)

    def sample_frame(self, rng: np.random.Generator) -> tuple[MotionClip, int]:
        if not self.clips:
            raise ConfigurationError("Reference motion library is empty")
        clip = self.clips[rng.integers(len(self.clips))]
        return clip, int(rng.integers(len(clip)))

    def transitions(self) -> np.ndarray:
        """All consecutive frame pairs as (M, 22) discriminator inputs."""
        pairs = []
        for clip in self.clips:
            f = clip.features()
            pairs.append(np.concatenate([f[:-1], f[1:]], axis=-1))
        return np.concatenate(pairs, axis=0)

    def closest_clip(self, speed: float) -> MotionClip:
        return min(self.clips, key=lambda c: abs(c.speed - speed))


def hip_amplitude(speed: float, params: GaitParams, leg_length: float) -> float:
    # Stance sweep covers 2 L sin(A) twice per cycle.
    ratio = abs(speed) / (4.0 * params.frequency_hz * leg_length)
    return float(min(np.arcsin(min(ratio, 1.0)), params.max_hip_amplitude))


def generate_reference_clips(
    params: GaitParams | None = None, model: RobotModel | None = None
) -> MotionLibrary:
    params = params or GaitParams()
    model = model or RobotModel()
    leg_length = model.link_lengths[1] + model.link_lengths[2]
    lower = np.array([lo for lo, _ in model.joint_limits])
    upper = np.array([hi for _, hi in model.joint_limits])

    n = int(round(params.duration_s * params.fps))
    t = np.arange(n) / params.fps
    omega = 2 * np.pi * params.frequency_hz
    phases = (0.0, np.pi)  # left, right

    clips = []
    for speed in params.speeds:
        direction = -1.0 if speed < 0 else 1.0
        a_h = hip_amplitude(speed, params, leg_length)
        a_k = params.knee_amplitude
        pos = np.zeros((n, 4))
        vel = np.zeros((n, 4))
        for leg, phi in enumerate(phases):
            arg = direction * omega * t + phi
            pos[:, 2 * leg] = a_h * np.sin(arg)
            vel[:, 2 * leg] = a_h * direction * omega * np.cos(arg)
            knee_arg = arg + params.knee_phase
            flex = np.sin(knee_arg)
            pos[:, 2 * leg + 1] = a_k * np.maximum(0.0, flex)
            knee_rate = a_k * direction * omega * np.cos(knee_arg)
            vel[:, 2 * leg + 1] = np.where(flex > 0, knee_rate, 0.0)
        if np.any(pos < lower) or np.any(pos > upper):
            raise ConfigurationError(f"Gait at {speed} m/s leaves the joint limits")

        q = np.zeros((n, 7))
        q[:, 3:] = pos
        arrays = ModelArrays.from_models([model] * n)
        flat = TerrainArrays.from_terrains([Terrain.flat(length=2.0, spacing=1.0, origin=-1.0)] * n)
        height = ground_clearance_height(q, arrays, flat)
        clips.append(MotionClip(pos, vel, height, np.zeros(n), float(speed), params.fps))

    logger.info(
        f"Generated {len(clips)} reference clips at {params.fps} Hz "
        f"(speeds {', '.join(f'{s:+.2f}' for s in params.speeds)} m/s)"
    )
    return MotionLibrary(clips)
