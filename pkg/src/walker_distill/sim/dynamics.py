"""Batched rigid-body dynamics of the planar biped.

Everything here operates on a leading batch axis ``n`` so a whole vector of
environments with different morphologies is advanced with a handful of numpy
calls. Link angles are absolute (measured from the downward vertical for leg
links, from the upward vertical for the torso).
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError
from .schemas import NUM_COORDS, RobotModel, SimConfig, Terrain

# Absolute link angle = SELECTOR @ q. Columns: x, z, pitch, hipL, kneeL, hipR, kneeR.
SELECTOR = np.array(
    [
        [0, 0, 1, 0, 0, 0, 0],
        [0, 0, 1, 1, 0, 0, 0],
        [0, 0, 1, 1, -1, 0, 0],
        [0, 0, 1, 0, 0, 1, 0],
        [0, 0, 1, 0, 0, 1, -1],
    ],
    dtype=np.float64,
)

# Tracked points: five link COMs followed by the left and right foot.
NUM_POINTS = 7
FOOT_POINTS = (5, 6)


@dataclass
class ModelArrays:
    """RobotModel parameters stacked along a batch axis."""

    masses: np.ndarray  # (n, 5)
    inertias: np.ndarray  # (n, 5)
    lengths: np.ndarray  # (n, 5)
    com_offsets: np.ndarray  # (n, 5)
    kp: np.ndarray  # (n, 4)
    kd: np.ndarray  # (n, 4)
    torque_limits: np.ndarray  # (n, 4)
    joint_lower: np.ndarray  # (n, 4)
    joint_upper: np.ndarray  # (n, 4)
    joint_friction: np.ndarray  # (n,)
    joint_damping: np.ndarray  # (n,)
    default_pose: np.ndarray  # (n, 4)
    action_scale: np.ndarray  # (n,)

    @classmethod
    def from_models(cls, models: Sequence[RobotModel]) -> "ModelArrays":
        return cls(
            masses=np.array([m.link_masses for m in models], dtype=np.float64),
            inertias=np.array([m.link_inertias for m in models], dtype=np.float64),
            lengths=np.array([m.link_lengths for m in models], dtype=np.float64),
            com_offsets=np.array([m.com_offsets for m in models], dtype=np.float64),
            kp=np.array([m.kp for m in models]),
            kd=np.array([m.kd for m in models]),
            torque_limits=np.array([m.torque_limits for m in models], dtype=np.float64),
            joint_lower=np.array([[lo for lo, _ in m.joint_limits] for m in models]),
            joint_upper=np.array([[hi for _, hi in m.joint_limits] for m in models]),
            joint_friction=np.array([m.joint_friction for m in models]),
            joint_damping=np.array([m.joint_damping for m in models]),
            default_pose=np.array([m.default_pose for m in models], dtype=np.float64),
            action_scale=np.array([m.action_scale for m in models]),
        )

    def set_row(self, index: int, model: RobotModel) -> None:
        row = ModelArrays.from_models([model])
        for name in self.__dataclass_fields__:
            getattr(self, name)[index] = getattr(row, name)[0]

    @property
    def size(self) -> int:
        return self.masses.shape[0]


@dataclass
class TerrainArrays:
    """Heightfields of a batch of environments sharing one sample grid."""

    heights: np.ndarray  # (n, samples)
    friction: np.ndarray  # (n,)
    origin: float
    spacing: float

    @classmethod
    def from_terrains(cls, terrains: Sequence[Terrain]) -> "TerrainArrays":
        first = terrains[0]
        for t in terrains[1:]:
            if t.spacing != first.spacing or t.origin != first.origin or len(
                t.heightfield
            ) != len(first.heightfield):
                raise ValueError("Batched terrains must share origin, spacing and length")
        return cls(
            heights=np.stack([t.heightfield for t in terrains]).astype(np.float64),
            friction=np.array([t.friction for t in terrains], dtype=np.float64),
            origin=first.origin,
            spacing=first.spacing,
        )

    def set_row(self, index: int, terrain: Terrain) -> None:
        if terrain.heightfield.shape[0] != self.heights.shape[1]:
            raise ValueError("Terrain length does not match the batch grid")
        self.heights[index] = terrain.heightfield
        self.friction[index] = terrain.friction

    @property
    def xs(self) -> np.ndarray:
        return self.origin + self.spacing * np.arange(self.heights.shape[1])


def heights_at(terrain: TerrainArrays, x: np.ndarray) -> np.ndarray:
    """Linear interpolation of each row's heightfield at ``x`` (shape (n,) or (n, k)).

    Queries outside the grid clamp to the end samples.
    """
    xs = terrain.xs
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    xc = np.clip(x, xs[0], xs[-1])
    idx = np.clip(np.searchsorted(xs, xc, side="right") - 1, 0, len(xs) - 2)
    rows = np.arange(terrain.heights.shape[0])[:, None]
    h0 = terrain.heights[rows, idx]
    h1 = terrain.heights[rows, idx + 1]
    h = h0 + (h1 - h0) * ((xc - xs[idx]) / terrain.spacing)
    return h[:, 0] if squeeze else h


def link_angles(q: np.ndarray) -> np.ndarray:
    return q @ SELECTOR.T


def _point_coefficients(arrays: ModelArrays) -> np.ndarray:
    """(n, points, links) weights of each link direction in each point position."""
    n = arrays.size
    L, c = arrays.lengths, arrays.com_offsets
    A = np.zeros((n, NUM_POINTS, 5))
    A[:, 0, 0] = -c[:, 0]  # torso points up, d(pitch) points down
    A[:, 1, 1] = c[:, 1]
    A[:, 2, 1] = L[:, 1]
    A[:, 2, 2] = c[:, 2]
    A[:, 3, 3] = c[:, 3]
    A[:, 4, 3] = L[:, 3]
    A[:, 4, 4] = c[:, 4]
    A[:, 5, 1] = L[:, 1]
    A[:, 5, 2] = L[:, 2]
    A[:, 6, 3] = L[:, 3]
    A[:, 6, 4] = L[:, 4]
    return A


@dataclass
class Kinematics:
    positions: np.ndarray  # (n, points, 2)
    jacobians: np.ndarray  # (n, points, 2, 7)
    bias_accel: np.ndarray  # (n, points, 2), J_dot @ qdot


def kinematics(q: np.ndarray, qdot: np.ndarray, arrays: ModelArrays) -> Kinematics:
    phi = link_angles(q)
    phidot = link_angles(qdot)
    A = _point_coefficients(arrays)
    down = np.stack([np.sin(phi), -np.cos(phi)], axis=-1)  # (n, 5, 2)
    ddown = np.stack([np.cos(phi), np.sin(phi)], axis=-1)

    positions = q[:, None, :2] + np.einsum("npj,njc->npc", A, down)
    jac = np.einsum("npj,njc,jk->npck", A, ddown, SELECTOR)
    jac[:, :, 0, 0] += 1.0
    jac[:, :, 1, 1] += 1.0
    bias = np.einsum("npj,njc,nj->npc", A, -down, phidot**2)
    return Kinematics(positions, jac, bias)


def mass_matrix(kin: Kinematics, arrays: ModelArrays) -> np.ndarray:
    J = kin.jacobians[:, :5]
    M = np.einsum("ni,nick,nicl->nkl", arrays.masses, J, J)
    M += np.einsum("ni,ik,il->nkl", arrays.inertias, SELECTOR, SELECTOR)
    return M


def mechanical_energy(
    q: np.ndarray, qdot: np.ndarray, arrays: ModelArrays, gravity: float
) -> np.ndarray:
    """Kinetic plus gravitational potential energy per environment (J)."""
    kin = kinematics(q, qdot, arrays)
    M = mass_matrix(kin, arrays)
    kinetic = 0.5 * np.einsum("nk,nkl,nl->n", qdot, M, qdot)
    potential = gravity * np.einsum("ni,ni->n", arrays.masses, kin.positions[:, :5, 1])
    return kinetic + potential


@dataclass
class ContactForces:
    in_contact: np.ndarray  # (n, 2) bool
    normal: np.ndarray  # (n, 2)
    tangential: np.ndarray  # (n, 2)
    penetration: np.ndarray  # (n, 2)
    generalized: np.ndarray  # (n, 7)


def contact_forces(
    kin: Kinematics, qdot: np.ndarray, terrain: TerrainArrays, cfg: SimConfig
) -> ContactForces:
    feet = list(FOOT_POINTS)
    foot_pos = kin.positions[:, feet]  # (n, 2, 2)
    foot_jac = kin.jacobians[:, feet]  # (n, 2, 2, 7)
    foot_vel = np.einsum("nfck,nk->nfc", foot_jac, qdot)

    ground = heights_at(terrain, foot_pos[..., 0])
    depth = ground - foot_pos[..., 1]
    in_contact = depth > 0.0
    normal = cfg.contact_stiffness * depth - cfg.contact_damping * foot_vel[..., 1]
    normal = np.where(in_contact, np.maximum(normal, 0.0), 0.0)
    cone = terrain.friction[:, None] * normal
    tangential = np.clip(-cfg.tangential_damping * foot_vel[..., 0], -cone, cone)

    force = np.stack([tangential, normal], axis=-1)
    generalized = np.einsum("nfck,nfc->nk", foot_jac, force)
    return ContactForces(in_contact, normal, tangential, np.maximum(depth, 0.0), generalized)


def passive_joint_torques(
    joint_vel: np.ndarray, arrays: ModelArrays, cfg: SimConfig
) -> np.ndarray:
    """Smoothed Coulomb friction plus viscous damping, opposing joint motion."""
    friction = arrays.joint_friction[:, None] * np.tanh(joint_vel / cfg.joint_friction_velocity)
    return -friction - arrays.joint_damping[:, None] * joint_vel


def batched_forward_dynamics(
    q: np.ndarray,
    qdot: np.ndarray,
    joint_torques: np.ndarray,
    external_forces: np.ndarray | None,
    arrays: ModelArrays,
    terrain: TerrainArrays,
    cfg: SimConfig,
    locked: Sequence[int] = (),
) -> tuple[np.ndarray, ContactForces]:
    """Solve M(q) qdd = Q for every environment in the batch.

    ``locked`` coordinates are held fixed: their rows are dropped from the
    solve and their accelerations are zero (used for pinned-base setups).
    """
    kin = kinematics(q, qdot, arrays)
    M = mass_matrix(kin, arrays)
    J = kin.jacobians[:, :5]

    gravity = np.array([0.0, -cfg.gravity])
    Q = np.einsum("ni,nick,c->nk", arrays.masses, J, gravity)
    Q -= np.einsum("ni,nick,nic->nk", arrays.masses, J, kin.bias_accel[:, :5])
    Q[:, 3:] += joint_torques + passive_joint_torques(qdot[:, 3:], arrays, cfg)

    contact = contact_forces(kin, qdot, terrain, cfg)
    Q += contact.generalized
    if external_forces is not None:
        Q += external_forces

    free = [k for k in range(NUM_COORDS) if k not in set(locked)]
    qdd = np.zeros_like(q)
    try:
        sub = M[:, free][:, :, free]
        qdd[:, free] = np.linalg.solve(sub, Q[:, free][..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            "Singular mass matrix", {"q": q.tolist(), "masses": arrays.masses.tolist()}
        ) from exc
    return qdd, contact
