"""The eight environment setups and the two evaluation targets."""

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import InvalidArgumentError
from ..motion import MotionLibrary
from ..sim.env import EpisodeSpec
from ..sim.schemas import RobotModel, TerrainKind
from .samplers import (
    apply_dynamics,
    apply_scale,
    nominal_draw,
    sample_command,
    sample_dynamics,
    sample_initial_state,
    schedule_perturbation,
    standing_state,
)
from .schemas import (
    ClusterFlags,
    CommandRanges,
    DynamicsDraw,
    DynamicsRanges,
    InitStateConfig,
    OmegaRange,
    RandomizationConfig,
    RangeProfile,
    SetupId,
    TerrainParams,
)
from .terrain import generate_terrain

logger = logging.getLogger(__name__)

TRAINING_RANGES = DynamicsRanges()
EVALUATION_RANGES = DynamicsRanges(
    body_friction=(0.8, 1.2),
    added_base_mass=(-1.0, 1.0),
    link_mass_multiplier=(0.9, 1.1),
    pd_gain_multiplier=(0.9, 1.1),
    com_displacement=(-0.1, 0.1),
    joint_friction=(0.01, 0.5),
    joint_damping=(0.3, 1.0),
)
TURNING_RANGE = (-1.57, 1.57)
EVALUATION_SPEED = 1.0

_SETUP_CLUSTERS: dict[SetupId, set[str]] = {
    SetupId.NONE: set(),
    SetupId.DYNAMICS: {"dynamics"},
    SetupId.PERTURBATIONS: {"perturbations"},
    SetupId.TERRAIN: {"terrain"},
    SetupId.SCALES: {"scales"},
    SetupId.INIT_STATE: {"init_state"},
    SetupId.TERRAIN_PERTURB: {"terrain", "perturbations"},
    SetupId.ALL: {"dynamics", "perturbations", "terrain", "scales", "init_state"},
}


class TargetKind(str, Enum):
    FIXED = "fixed"
    RANDOMIZED = "randomized"


def build_setup(
    setup_id: SetupId | str,
    range_profile: RangeProfile | str = RangeProfile.TRAINING,
    omega_range: OmegaRange | str = OmegaRange.ZERO,
    terrain_params: TerrainParams | None = None,
) -> RandomizationConfig:
    """Resolve a setup id into concrete per-cluster ranges.

    The evaluation profile keeps only the terrain and dynamics clusters of the
    requested setup, uses the milder evaluation ranges on bumpy ground and
    commands a fixed forward speed.
    """
    try:
        setup_id = SetupId(setup_id)
        range_profile = RangeProfile(range_profile)
        omega_range = OmegaRange(omega_range)
    except ValueError as exc:
        raise InvalidArgumentError(str(exc)) from exc

    enabled = _SETUP_CLUSTERS[setup_id]
    terrain_params = terrain_params or TerrainParams()

    if range_profile == RangeProfile.EVALUATION:
        enabled = enabled & {"terrain", "dynamics"}
        flags = ClusterFlags(**{name: True for name in enabled})
        return RandomizationConfig(
            setup_id=setup_id,
            range_profile=range_profile,
            flags=flags,
            dynamics_ranges=EVALUATION_RANGES,
            terrain_kinds=[TerrainKind.BUMPY] if flags.terrain else [TerrainKind.FLAT],
            terrain_params=terrain_params,
            scale_choices=[1.0],
            init_state=InitStateConfig(use_reference=False, standing_probability=1.0),
            command_ranges=CommandRanges(
                v_x=(EVALUATION_SPEED, EVALUATION_SPEED), omega=(0.0, 0.0)
            ),
        )

    flags = ClusterFlags(**{name: True for name in enabled})
    return RandomizationConfig(
        setup_id=setup_id,
        range_profile=range_profile,
        flags=flags,
        dynamics_ranges=TRAINING_RANGES,
        terrain_kinds=(
            [TerrainKind.BUMPY, TerrainKind.OBSTACLES] if flags.terrain else [TerrainKind.FLAT]
        ),
        terrain_params=terrain_params,
        scale_choices=[0.8, 1.0, 1.2] if flags.scales else [1.0],
        init_state=(
            InitStateConfig() if flags.init_state
            else InitStateConfig(use_reference=False, standing_probability=1.0)
        ),
        command_ranges=CommandRanges(
            omega=TURNING_RANGE if omega_range == OmegaRange.FULL else (0.0, 0.0)
        ),
    )


def build_target_env(kind: TargetKind | str) -> RandomizationConfig:
    """Fixed target: flat ground, nominal dynamics. Randomized: bumpy ground plus mild dynamics."""
    try:
        kind = TargetKind(kind)
    except ValueError as exc:
        raise InvalidArgumentError(f"Unknown evaluation target: {kind!r}") from exc
    setup = SetupId.NONE if kind == TargetKind.FIXED else SetupId.ALL
    return build_setup(setup, RangeProfile.EVALUATION)


@dataclass
class EpisodeEnvironment:
    """The concrete draw for one episode, kept for provenance and debugging."""

    scale: float
    dynamics: DynamicsDraw
    terrain_kind: TerrainKind
    noisy_init: bool


class EpisodeSampler:
    """Turns a RandomizationConfig into per-episode simulator inputs.

    Draw order is fixed (scale, dynamics, terrain, initial state, command) so a
    given random stream always maps to the same episode.
    """

    def __init__(
        self,
        config: RandomizationConfig,
        library: MotionLibrary,
        base_model: RobotModel | None = None,
    ):
        self.config = config
        self.library = library
        self.base_model = base_model or RobotModel()
        self.last: EpisodeEnvironment | None = None

    def sample_environment(self, rng: np.random.Generator):
        cfg = self.config
        k = float(rng.choice(cfg.scale_choices)) if cfg.flags.scales else 1.0
        model = apply_scale(self.base_model, k) if k != 1.0 else self.base_model
        draw = (
            sample_dynamics(rng, cfg.dynamics_ranges) if cfg.flags.dynamics
            else nominal_draw(model)
        )
        model = apply_dynamics(model, draw)
        kind = (
            cfg.terrain_kinds[int(rng.integers(len(cfg.terrain_kinds)))] if cfg.flags.terrain
            else TerrainKind.FLAT
        )
        terrain = generate_terrain(rng, kind, cfg.terrain_params, friction=draw.body_friction)
        return model, terrain, k, draw, kind

    def sample_episode(self, rng: np.random.Generator) -> EpisodeSpec:
        cfg = self.config
        model, terrain, k, draw, kind = self.sample_environment(rng)

        noisy = False
        standing = not cfg.init_state.use_reference or (
            rng.random() < cfg.init_state.standing_probability
        )
        if standing:
            state = standing_state(model, terrain)
        else:
            state, noisy = sample_initial_state(rng, self.library, cfg.init_state, model, terrain)
        command = sample_command(rng, cfg.command_ranges)

        self.last = EpisodeEnvironment(k, draw, kind, noisy)
        return EpisodeSpec(model, terrain, state.q, state.qdot, command.as_array())

    def perturbation(self, time: float, rng: np.random.Generator) -> np.ndarray | None:
        if not self.config.flags.perturbations:
            return None
        return schedule_perturbation(time, rng, self.config.perturbation)
