"""Control-step integration (semi-implicit Euler over physics substeps)."""

from typing import NamedTuple

import numpy as np

from .control import batched_pd_torques, batched_termination
from .dynamics import (
    FOOT_POINTS,
    ModelArrays,
    TerrainArrays,
    batched_forward_dynamics,
    heights_at,
    kinematics,
)
from .schemas import (
    Command,
    ContactReport,
    RobotModel,
    SimConfig,
    SimState,
    Terrain,
    TerminationLimits,
)


class BatchStep(NamedTuple):
    q: np.ndarray
    qdot: np.ndarray
    contact: ContactReport
    terminated: np.ndarray
    fault: np.ndarray
    torques: np.ndarray


class StepResult(NamedTuple):
    state: SimState
    contact: ContactReport
    terminated: bool
    fault: bool


def batched_control_step(
    q: np.ndarray,
    qdot: np.ndarray,
    actions: np.ndarray,
    arrays: ModelArrays,
    terrain: TerrainArrays,
    cfg: SimConfig,
    limits: TerminationLimits,
) -> BatchStep:
    """Advance every environment by one control period.

    PD torques are recomputed at every substep from the fixed joint targets.
    Environments whose state turns non-finite are flagged as faults and frozen
    at their last finite state.
    """
    actions = np.clip(actions, -cfg.action_clip, cfg.action_clip)
    targets = arrays.default_pose + arrays.action_scale[:, None] * actions
    dt = cfg.physics_dt
    q, qdot = q.copy(), qdot.copy()
    fault = np.zeros(q.shape[0], dtype=bool)

    with np.errstate(all="ignore"):
        for _ in range(cfg.substeps):
            tau = batched_pd_torques(targets, q[:, 3:], qdot[:, 3:], arrays)
            qdd, contact = batched_forward_dynamics(q, qdot, tau, None, arrays, terrain, cfg)
            new_qdot = qdot + dt * qdd
            new_q = q + dt * new_qdot
            bad = ~(np.all(np.isfinite(new_q), axis=1) & np.all(np.isfinite(new_qdot), axis=1))
            fault |= bad
            keep = ~fault
            q[keep] = new_q[keep]
            qdot[keep] = new_qdot[keep]

    report = ContactReport(
        in_contact=contact.in_contact,
        normal_force=np.nan_to_num(contact.normal),
        tangential_force=np.nan_to_num(contact.tangential),
        penetration=np.nan_to_num(contact.penetration),
    )
    terminated = batched_termination(q, terrain, limits) | fault
    return BatchStep(q, qdot, report, terminated, fault, tau)


def forward_dynamics(
    q: np.ndarray,
    qdot: np.ndarray,
    joint_torques: np.ndarray,
    external_forces: np.ndarray | None,
    model: RobotModel,
    terrain: Terrain,
    cfg: SimConfig | None = None,
) -> np.ndarray:
    cfg = cfg or SimConfig()
    ext = None if external_forces is None else np.asarray(external_forces)[None]
    qdd, _ = batched_forward_dynamics(
        np.asarray(q, dtype=np.float64)[None],
        np.asarray(qdot, dtype=np.float64)[None],
        np.asarray(joint_torques, dtype=np.float64)[None],
        ext,
        ModelArrays.from_models([model]),
        TerrainArrays.from_terrains([terrain]),
        cfg,
    )
    return qdd[0]


def step(
    state: SimState,
    action: np.ndarray,
    model: RobotModel,
    terrain: Terrain,
    command: Command,
    cfg: SimConfig | None = None,
    limits: TerminationLimits | None = None,
) -> StepResult:
    """Single-environment control step. The command is carried for the caller's reward."""
    del command
    cfg = cfg or SimConfig()
    limits = limits or TerminationLimits()
    action = np.asarray(action, dtype=np.float64)
    if action.shape != (4,):
        raise ValueError(f"Action must have 4 entries, got shape {action.shape}")

    out = batched_control_step(
        state.q[None],
        state.qdot[None],
        action[None],
        ModelArrays.from_models([model]),
        TerrainArrays.from_terrains([terrain]),
        cfg,
        limits,
    )
    new_state = SimState(
        q=out.q[0],
        qdot=out.qdot[0],
        time=state.time + cfg.control_dt,
        prev_action=action.copy(),
        rng_cursor=state.rng_cursor,
    )
    contact = ContactReport(
        in_contact=out.contact.in_contact[0],
        normal_force=out.contact.normal_force[0],
        tangential_force=out.contact.tangential_force[0],
        penetration=out.contact.penetration[0],
    )
    return StepResult(new_state, contact, bool(out.terminated[0]), bool(out.fault[0]))


def ground_clearance_height(
    q: np.ndarray, arrays: ModelArrays, terrain: TerrainArrays
) -> np.ndarray:
    """Base height at which the lowest foot just touches the terrain."""
    zeroed = q.copy()
    zeroed[:, 1] = 0.0
    kin = kinematics(zeroed, np.zeros_like(q), arrays)
    feet = kin.positions[:, list(FOOT_POINTS)]
    ground = heights_at(terrain, feet[..., 0])
    return np.max(ground - feet[..., 1], axis=1)
