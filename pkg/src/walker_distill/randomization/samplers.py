"""Per-episode samplers: dynamics, morphology scale, kicks, initial state, commands."""

import numpy as np

from ..errors import ConfigurationError, InvalidArgumentError
from ..motion import MotionLibrary
from ..sim.dynamics import ModelArrays, TerrainArrays
from ..sim.schemas import NUM_COORDS, Command, RobotModel, SimState, Terrain
from ..sim.step import ground_clearance_height
from .schemas import (
    CommandRanges,
    DynamicsDraw,
    DynamicsRanges,
    InitStateConfig,
    PerturbationConfig,
)


def sample_dynamics(rng: np.random.Generator, ranges: DynamicsRanges) -> DynamicsDraw:
    values = {name: float(rng.uniform(lo, hi)) for name, (lo, hi) in ranges}
    return DynamicsDraw(**values)


def nominal_draw(model: RobotModel) -> DynamicsDraw:
    """The draw that leaves ``model`` unchanged (ground friction 1)."""
    return DynamicsDraw(
        body_friction=1.0,
        added_base_mass=0.0,
        link_mass_multiplier=1.0,
        pd_gain_multiplier=1.0,
        com_displacement=0.0,
        joint_friction=model.joint_friction,
        joint_damping=model.joint_damping,
    )


def apply_dynamics(model: RobotModel, draw: DynamicsDraw) -> RobotModel:
    """New model with the draw applied; ground friction is applied to the terrain instead.

    The link-mass multiplier also scales inertias so link densities stay
    consistent; the added base mass and COM displacement act on the torso.
    """
    mult = draw.link_mass_multiplier
    masses = [m * mult for m in model.link_masses]
    masses[0] += draw.added_base_mass
    if masses[0] <= 0:
        raise InvalidArgumentError(f"Added base mass leaves a non-positive torso ({masses[0]})")
    offsets = list(model.com_offsets)
    offsets[0] += draw.com_displacement
    return model.model_copy(
        update={
            "link_masses": tuple(masses),
            "link_inertias": tuple(i * mult for i in model.link_inertias),
            "com_offsets": tuple(offsets),
            "pd_gains": tuple(
                (kp * draw.pd_gain_multiplier, kd * draw.pd_gain_multiplier)
                for kp, kd in model.pd_gains
            ),
            "joint_friction": draw.joint_friction,
            "joint_damping": draw.joint_damping,
        }
    )


def apply_scale(model: RobotModel, k: float) -> RobotModel:
    """Geometric scaling: lengths k, masses k^3, inertias k^5, gains and torque limits k^4."""
    if not k > 0:
        raise InvalidArgumentError(f"Scale factor must be positive, got {k}")
    k3, k4, k5 = k**3, k**4, k**5
    return model.model_copy(
        update={
            "link_lengths": tuple(v * k for v in model.link_lengths),
            "com_offsets": tuple(v * k for v in model.com_offsets),
            "link_masses": tuple(v * k3 for v in model.link_masses),
            "link_inertias": tuple(v * k5 for v in model.link_inertias),
            "pd_gains": tuple((kp * k4, kd * k4) for kp, kd in model.pd_gains),
            "torque_limits": tuple(v * k4 for v in model.torque_limits),
            "scale": model.scale * k,
        }
    )


def schedule_perturbation(
    time: float, rng: np.random.Generator, cfg: PerturbationConfig
) -> np.ndarray | None:
    """Base-velocity kick (dvx, dvz) at every positive multiple of the interval."""
    if time <= 0:
        return None
    ratio = time / cfg.interval_s
    if abs(ratio - round(ratio)) > 1e-9:
        return None
    magnitude = rng.uniform(0.0, cfg.max_speed)
    angle = rng.uniform(0.0, 2 * np.pi)
    return magnitude * np.array([np.cos(angle), np.sin(angle)])


def sample_command(rng: np.random.Generator, ranges: CommandRanges) -> Command:
    return Command(
        v_hat_x=float(rng.uniform(*ranges.v_x)),
        omega_hat=float(rng.uniform(*ranges.omega)),
    )


def standing_state(model: RobotModel, terrain: Terrain) -> SimState:
    q = np.zeros(NUM_COORDS)
    q[3:] = model.default_pose
    q[1] = _clearance(q, model, terrain)
    return SimState(q=q, qdot=np.zeros(NUM_COORDS))


def _clearance(q: np.ndarray, model: RobotModel, terrain: Terrain) -> float:
    return float(
        ground_clearance_height(
            q[None], ModelArrays.from_models([model]), TerrainArrays.from_terrains([terrain])
        )[0]
    )


def sample_initial_state(
    rng: np.random.Generator,
    library: MotionLibrary,
    cfg: InitStateConfig,
    model: RobotModel | None = None,
    terrain: Terrain | None = None,
) -> tuple[SimState, bool]:
    """Reference-state initialization with optional joint noise.

    Returns the state and whether noise was applied. The clip's base height is
    raised, never lowered, when the feet would start below the terrain.
    """
    if len(library) == 0:
        raise ConfigurationError("Reference motion library is empty")
    model = model or RobotModel()
    terrain = terrain or Terrain.flat()

    clip, frame = library.sample_frame(rng)
    joint_pos = clip.joint_pos[frame].copy()
    joint_vel = clip.joint_vel[frame].copy()
    noisy = bool(rng.random() < cfg.noise_probability)
    if noisy:
        lower = np.array([lo for lo, _ in model.joint_limits])
        upper = np.array([hi for _, hi in model.joint_limits])
        joint_pos = joint_pos + rng.uniform(-cfg.joint_pos_range, cfg.joint_pos_range, 4)
        joint_pos = np.clip(joint_pos, lower, upper)
        joint_vel = joint_vel + rng.uniform(-cfg.joint_vel_range, cfg.joint_vel_range, 4)

    q = np.zeros(NUM_COORDS)
    q[1] = clip.base_height[frame]
    q[2] = clip.pitch[frame]
    q[3:] = joint_pos
    q[1] = max(q[1], _clearance(q, model, terrain))
    qdot = np.zeros(NUM_COORDS)
    qdot[0] = clip.speed
    qdot[3:] = joint_vel
    return SimState(q=q, qdot=qdot), noisy
