"""Model, terrain and state types for the planar biped simulator."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Annotated, Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

# Generalized coordinates: base x, base z (hip point), pitch, then actuated joints.
NUM_COORDS = 7
NUM_JOINTS = 4
NUM_LINKS = 5
JOINT_NAMES = ("hip_left", "knee_left", "hip_right", "knee_right")
LINK_NAMES = ("torso", "thigh_left", "shank_left", "thigh_right", "shank_right")

ACTOR_OBS_DIM = 16
PRIVILEGED_OBS_DIM = 19
COMMAND_DIM = 2
# command (v_hat_x, omega_hat) columns of the actor observation
COMMAND_SLICE = slice(10, 12)

Pair = tuple[float, float]


class RobotModel(BaseModel):
    """Planar five-link biped: torso plus two thigh/shank legs hinged at one hip point.

    Link order is torso, thigh_left, shank_left, thigh_right, shank_right.
    The torso COM sits ``com_offsets[0]`` above the hip; leg COMs sit
    ``com_offsets[i]`` below their proximal joint. Knee angles are flexion
    (positive folds the shank backwards).
    """

    model_config = ConfigDict(frozen=True)

    link_masses: Annotated[
        tuple[float, float, float, float, float], Field(description="kg per link")
    ] = (30.0, 5.0, 3.0, 5.0, 3.0)
    link_lengths: Annotated[
        tuple[float, float, float, float, float], Field(description="m per link")
    ] = (0.6, 0.4, 0.4, 0.4, 0.4)
    link_inertias: Annotated[
        tuple[float, float, float, float, float],
        Field(description="kg*m^2 about each link COM"),
    ] = (0.9, 0.0667, 0.04, 0.0667, 0.04)
    com_offsets: Annotated[
        tuple[float, float, float, float, float],
        Field(description="m from the proximal joint along each link"),
    ] = (0.2, 0.2, 0.2, 0.2, 0.2)
    pd_gains: Annotated[
        tuple[Pair, Pair, Pair, Pair], Field(description="(kp N*m/rad, kd N*m*s/rad) per joint")
    ] = ((60.0, 2.0), (60.0, 2.0), (60.0, 2.0), (60.0, 2.0))
    torque_limits: Annotated[
        tuple[float, float, float, float], Field(description="N*m per joint")
    ] = (80.0, 80.0, 80.0, 80.0)
    joint_limits: Annotated[
        tuple[Pair, Pair, Pair, Pair], Field(description="(lower, upper) rad per joint")
    ] = ((-1.2, 1.2), (-0.1, 2.0), (-1.2, 1.2), (-0.1, 2.0))
    joint_friction: Annotated[
        float, Field(ge=0.0, description="Coulomb joint friction coefficient (x 1 N*m)")
    ] = 0.05
    joint_damping: Annotated[float, Field(ge=0.0, description="N*m*s/rad")] = 0.5
    scale: Annotated[float, Field(gt=0.0, description="morphology scale factor k")] = 1.0
    default_pose: Annotated[
        tuple[float, float, float, float],
        Field(description="joint angles the action offsets are measured from"),
    ] = (0.2, 0.2, -0.1, 0.1)
    action_scale: Annotated[float, Field(gt=0.0, description="rad per unit action")] = 0.5

    @model_validator(mode="after")
    def _check_positive(self) -> "RobotModel":
        groups = {
            "link_masses": self.link_masses,
            "link_lengths": self.link_lengths,
            "link_inertias": self.link_inertias,
            "torque_limits": self.torque_limits,
            "pd_gains": [g for pair in self.pd_gains for g in pair],
        }
        for name, values in groups.items():
            if any(not np.isfinite(v) or v <= 0 for v in values):
                raise ValueError(f"{name} must be strictly positive, got {values}")
        for i, (lo, hi) in enumerate(self.joint_limits):
            if not lo < hi:
                raise ValueError(f"joint_limits[{i}] needs lower < upper, got ({lo}, {hi})")
        return self

    @property
    def kp(self) -> np.ndarray:
        return np.array([g[0] for g in self.pd_gains])

    @property
    def kd(self) -> np.ndarray:
        return np.array([g[1] for g in self.pd_gains])

    @property
    def total_mass(self) -> float:
        return float(sum(self.link_masses))


class TerminationLimits(BaseModel):
    min_base_height: Annotated[
        float, Field(gt=0.0, description="m of hip height above local terrain")
    ] = 0.5
    max_pitch: Annotated[float, Field(gt=0.0, description="rad")] = 1.0


class SimConfig(BaseModel):
    control_rate_hz: Annotated[int, Field(gt=0)] = 50
    substeps: Annotated[int, Field(gt=0, description="physics substeps per control step")] = 10
    gravity: Annotated[float, Field(ge=0.0, description="m/s^2, acts along -z")] = 9.81
    contact_stiffness: Annotated[float, Field(gt=0.0, description="N/m")] = 2.0e4
    contact_damping: Annotated[float, Field(ge=0.0, description="N*s/m")] = 200.0
    tangential_damping: Annotated[
        float, Field(gt=0.0, description="N*s/m viscous ground friction before the cone clamp")
    ] = 400.0
    joint_friction_velocity: Annotated[
        float, Field(gt=0.0, description="rad/s smoothing of Coulomb joint friction")
    ] = 0.1
    action_clip: Annotated[float, Field(gt=0.0)] = 4.0

    @property
    def control_dt(self) -> float:
        return 1.0 / self.control_rate_hz

    @property
    def physics_dt(self) -> float:
        return self.control_dt / self.substeps


class TerrainKind(str, Enum):
    FLAT = "flat"
    BUMPY = "bumpy"
    OBSTACLES = "obstacles"


@dataclass(frozen=True)
class Terrain:
    """Heightfield sampled every ``spacing`` metres starting at ``origin``."""

    kind: TerrainKind
    heightfield: np.ndarray
    spacing: float
    friction: float = 1.0
    origin: float = 0.0

    def __post_init__(self):
        if self.spacing <= 0:
            raise ValueError(f"Terrain spacing must be positive, got {self.spacing}")
        if self.heightfield.ndim != 1 or len(self.heightfield) < 2:
            raise ValueError("Terrain heightfield needs at least two samples")
        if not np.all(np.isfinite(self.heightfield)):
            raise ValueError("Terrain heightfield must be finite")
        if self.kind == TerrainKind.FLAT and np.ptp(self.heightfield) != 0:
            raise ValueError("Flat terrain must have a constant heightfield")

    @property
    def xs(self) -> np.ndarray:
        return self.origin + self.spacing * np.arange(len(self.heightfield))

    @classmethod
    def flat(cls, length: float = 40.0, spacing: float = 0.05, origin: float = -5.0,
             friction: float = 1.0) -> "Terrain":
        n = int(round(length / spacing)) + 1
        return cls(TerrainKind.FLAT, np.zeros(n), spacing, friction, origin)

    def with_friction(self, friction: float) -> "Terrain":
        return Terrain(self.kind, self.heightfield, self.spacing, friction, self.origin)


@dataclass(frozen=True)
class Command:
    v_hat_x: float = 0.0
    omega_hat: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.v_hat_x, self.omega_hat])


@dataclass
class SimState:
    q: np.ndarray
    qdot: np.ndarray
    time: float = 0.0
    prev_action: np.ndarray = field(default_factory=lambda: np.zeros(NUM_JOINTS))
    rng_cursor: dict[str, Any] | None = None

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=np.float64)
        self.qdot = np.asarray(self.qdot, dtype=np.float64)
        self.prev_action = np.asarray(self.prev_action, dtype=np.float64)
        if self.q.shape != (NUM_COORDS,) or self.qdot.shape != (NUM_COORDS,):
            raise ValueError(f"SimState needs {NUM_COORDS} coordinates, got {self.q.shape}")
        if self.time < 0:
            raise ValueError("SimState time must be non-negative")

    @property
    def joint_pos(self) -> np.ndarray:
        return self.q[3:]

    @property
    def joint_vel(self) -> np.ndarray:
        return self.qdot[3:]

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.qdot)))

    def copy(self) -> "SimState":
        return SimState(
            self.q.copy(), self.qdot.copy(), self.time, self.prev_action.copy(),
            None if self.rng_cursor is None else dict(self.rng_cursor),
        )


@dataclass
class ContactReport:
    """Per-foot contact quantities, index 0 = left foot, 1 = right foot."""

    in_contact: np.ndarray
    normal_force: np.ndarray
    tangential_force: np.ndarray
    penetration: np.ndarray
