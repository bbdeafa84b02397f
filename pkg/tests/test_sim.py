import math

import numpy as np
import pytest

from walker_distill.sim import (
    ACTOR_OBS_DIM,
    PRIVILEGED_OBS_DIM,
    Command,
    ModelArrays,
    RobotModel,
    SimConfig,
    SimState,
    Terrain,
    TerrainArrays,
    TerrainKind,
    TerminationLimits,
    check_termination,
    compute_observation,
    forward_dynamics,
    mechanical_energy,
    pd_torques,
    projected_gravity,
    step,
    terrain_height,
)
from walker_distill.sim.dynamics import (
    FOOT_POINTS,
    SELECTOR,
    batched_forward_dynamics,
    kinematics,
)


def standing_state(model: RobotModel, height: float = 0.75) -> SimState:
    q = np.array([0.0, height, 0.0, *model.default_pose])
    return SimState(q=q, qdot=np.zeros(7))


def test_straight_legs_put_feet_under_the_hip(model):
    arrays = ModelArrays.from_models([model])
    q = np.array([[0.3, 1.2, 0.0, 0.0, 0.0, 0.0, 0.0]])
    kin = kinematics(q, np.zeros_like(q), arrays)
    leg = model.link_lengths[1] + model.link_lengths[2]
    for foot in FOOT_POINTS:
        assert kin.positions[0, foot] == pytest.approx([0.3, 1.2 - leg], abs=1e-12)


def test_jacobians_match_finite_differences(model, rng):
    arrays = ModelArrays.from_models([model])
    q = np.concatenate([[0.0, 1.0], rng.uniform(-0.5, 0.5, size=5)])[None, :]
    kin = kinematics(q, np.zeros_like(q), arrays)
    eps = 1e-6
    for k in range(7):
        dq = np.zeros_like(q)
        dq[0, k] = eps
        plus = kinematics(q + dq, np.zeros_like(q), arrays).positions
        minus = kinematics(q - dq, np.zeros_like(q), arrays).positions
        numeric = (plus - minus) / (2 * eps)
        np.testing.assert_allclose(kin.jacobians[..., k], numeric, atol=1e-7)


def test_pd_torques_examples(model):
    zeros = np.zeros(4)
    assert np.allclose(pd_torques(zeros, zeros, zeros, model), 0.0)
    tau = pd_torques(np.full(4, 0.1), zeros, zeros, model)
    assert tau == pytest.approx(np.full(4, 6.0))
    huge = pd_torques(np.array([100.0, -100.0, 100.0, -100.0]), zeros, zeros, model)
    assert np.array_equal(huge, np.array([80.0, -80.0, 80.0, -80.0]))


def test_projected_gravity():
    assert projected_gravity(0.0) == pytest.approx(np.array([0.0, -1.0]))
    assert projected_gravity(math.pi / 2) == pytest.approx(np.array([-1.0, 0.0]), abs=1e-12)


def test_terrain_height_interpolates():
    assert terrain_height(Terrain.flat(), 3.7) == 0.0
    field = Terrain(TerrainKind.BUMPY, np.array([0.1, 0.3, -0.2]), spacing=1.0)
    assert terrain_height(field, 1.0) == pytest.approx(0.3)
    assert terrain_height(field, 0.5) == pytest.approx(0.2)
    # outside the grid clamps to the end samples
    assert terrain_height(field, -4.0) == pytest.approx(0.1)
    assert terrain_height(field, 9.0) == pytest.approx(-0.2)


def test_termination_boundaries(model, flat):
    limits = TerminationLimits()
    assert not check_termination(standing_state(model), flat, limits)
    assert check_termination(standing_state(model, height=0.0), flat, limits)
    tilted = standing_state(model)
    tilted.q[2] = limits.max_pitch
    assert not check_termination(tilted, flat, limits)
    tilted.q[2] = limits.max_pitch + 1e-9
    assert check_termination(tilted, flat, limits)


def test_observation_dims(model):
    state = standing_state(model)
    actor = compute_observation(state, Command(1.0, 0.0))
    privileged = compute_observation(state, Command(1.0, 0.0), privileged=True)
    assert actor.shape == (ACTOR_OBS_DIM,)
    assert privileged.shape == (PRIVILEGED_OBS_DIM,)
    assert PRIVILEGED_OBS_DIM - ACTOR_OBS_DIM == 3
    assert actor[:2] == pytest.approx([0.0, -1.0])
    assert actor[10:12] == pytest.approx([1.0, 0.0])


def test_free_fall_acceleration(model, flat):
    q = np.array([0.0, 5.0, 0.1, 0.3, 0.4, -0.2, 0.1])
    qdd = forward_dynamics(q, np.zeros(7), np.zeros(4), None, model, flat)
    # joint angles stay put, every link falls with g
    assert qdd[1] == pytest.approx(-9.81, abs=1e-9)
    assert np.allclose(np.delete(qdd, 1), 0.0, atol=1e-9)


def test_zero_gravity_equilibrium(model, flat):
    cfg = SimConfig(gravity=0.0)
    state = standing_state(model, height=3.0)
    result = step(state, np.zeros(4), model, flat, Command(), cfg)
    assert np.allclose(result.state.q, state.q, atol=1e-12)
    assert np.allclose(result.state.qdot, 0.0, atol=1e-12)
    assert result.state.time == pytest.approx(cfg.control_dt)
    assert not result.terminated


def test_step_is_deterministic(model, flat):
    state = standing_state(model, height=0.78)
    state.qdot[:] = [0.2, -0.1, 0.05, 0.3, -0.3, 0.1, 0.0]
    action = np.array([0.3, -0.2, 0.1, 0.4])
    a = step(state, action, model, flat, Command(1.0))
    b = step(state, action, model, flat, Command(1.0))
    assert np.array_equal(a.state.q, b.state.q)
    assert np.array_equal(a.state.qdot, b.state.qdot)
    assert np.array_equal(a.state.prev_action, action)


def test_step_rejects_wrong_action_shape(model, flat):
    with pytest.raises(ValueError):
        step(standing_state(model), np.zeros(3), model, flat, Command())


def test_contact_forces_are_unilateral(model, flat):
    state = standing_state(model, height=0.70)
    state.qdot[0] = 1.5
    for _ in range(20):
        result = step(state, np.zeros(4), model, flat, Command())
        contact = result.contact
        assert np.all(contact.normal_force >= 0.0)
        cone = flat.friction * contact.normal_force + 1e-9
        assert np.all(np.abs(contact.tangential_force) <= cone)
        state = result.state


def test_energy_drift_without_dissipation():
    model = RobotModel(joint_friction=0.0, joint_damping=0.0)
    cfg = SimConfig(gravity=0.0)
    arrays = ModelArrays.from_models([model])
    terrain = TerrainArrays.from_terrains([Terrain.flat()])
    q = np.array([[0.0, 5.0, 0.0, 0.2, 0.3, -0.1, 0.4]])
    qdot = np.array([[0.1, 0.0, 0.2, 0.5, -0.4, 0.3, 0.6]])
    e0 = mechanical_energy(q, qdot, arrays, cfg.gravity)[0]

    dt = cfg.physics_dt
    for _ in range(round(1.0 / dt)):
        qdd, _ = batched_forward_dynamics(q, qdot, np.zeros((1, 4)), None, arrays, terrain, cfg)
        qdot = qdot + dt * qdd
        q = q + dt * qdot
    e1 = mechanical_energy(q, qdot, arrays, cfg.gravity)[0]
    assert abs(e1 - e0) / e0 < 0.01


def test_energy_drift_in_free_flight_under_gravity():
    model = RobotModel(joint_friction=0.0, joint_damping=0.0)
    cfg = SimConfig()
    arrays = ModelArrays.from_models([model])
    terrain = TerrainArrays.from_terrains([Terrain.flat()])
    q = np.array([[0.0, 10.0, 0.0, 0.2, 0.3, -0.1, 0.4]])
    qdot = np.array([[0.5, 1.0, 0.2, 0.5, -0.4, 0.3, 0.6]])
    e0 = mechanical_energy(q, qdot, arrays, cfg.gravity)[0]

    dt = cfg.physics_dt
    for _ in range(round(1.0 / dt)):
        qdd, contact = batched_forward_dynamics(
            q, qdot, np.zeros((1, 4)), None, arrays, terrain, cfg
        )
        assert not contact.in_contact.any()
        qdot = qdot + dt * qdd
        q = q + dt * qdot
    feet = kinematics(q, qdot, arrays).positions[0, list(FOOT_POINTS), 1]
    assert np.all(feet > 1.0)

    e1 = mechanical_energy(q, qdot, arrays, cfg.gravity)[0]
    kinetic = mechanical_energy(q, qdot, arrays, 0.0)[0]
    assert abs(e1 - e0) / kinetic < 0.01


def _central_difference(f, x: np.ndarray, direction: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Fourth-order derivative of ``f`` along ``direction``."""
    return (
        -f(x + 2 * h * direction) + 8 * f(x + h * direction)
        - 8 * f(x - h * direction) + f(x - 2 * h * direction)
    ) / (12 * h)


def _lagrangian_mass_matrix(q: np.ndarray, arrays: ModelArrays) -> np.ndarray:
    """Mass matrix from the kinetic energy of complex-step point velocities."""
    h = 1e-20
    columns = []
    for k in range(7):
        dq = np.zeros(7, dtype=complex)
        dq[k] = 1j * h
        positions = kinematics(q + dq, np.zeros_like(q, dtype=complex), arrays).positions
        columns.append(positions.imag[:, :5] / h)
    J = np.stack(columns, axis=-1)
    M = np.einsum("ni,nick,nicl->nkl", arrays.masses, J, J)
    return M + np.einsum("ni,ik,il->nkl", arrays.inertias, SELECTOR, SELECTOR)


def test_forward_dynamics_matches_euler_lagrange(rng):
    model = RobotModel(joint_friction=0.0, joint_damping=0.0)
    cfg = SimConfig()
    arrays = ModelArrays.from_models([model])

    def kinetic(q, qdot):
        return 0.5 * np.einsum("nk,nkl,nl->n", qdot, _lagrangian_mass_matrix(q, arrays), qdot)

    def potential(q):
        heights = kinematics(q, np.zeros_like(q), arrays).positions[:, :5, 1]
        return cfg.gravity * np.einsum("ni,ni->n", arrays.masses, heights)

    for _ in range(5):
        q = np.concatenate([rng.uniform(-1, 1, 1), [5.0], rng.uniform(-1.0, 1.0, 5)])[None]
        qdot = rng.normal(0.0, 1.0, size=(1, 7))
        tau = rng.normal(0.0, 20.0, size=4)
        external = rng.normal(0.0, 10.0, size=7)

        M = _lagrangian_mass_matrix(q, arrays)
        m_dot = _central_difference(lambda x: _lagrangian_mass_matrix(x, arrays), q, qdot)
        dT = np.zeros((1, 7))
        dV = np.zeros((1, 7))
        for k in range(7):
            e = np.eye(7)[k][None]
            dT[:, k] = _central_difference(lambda x: kinetic(x, qdot), q, e)
            dV[:, k] = _central_difference(potential, q, e)

        generalized = external[None].copy()
        generalized[:, 3:] += tau
        rhs = generalized - np.einsum("nkl,nl->nk", m_dot, qdot) + dT - dV
        expected = np.linalg.solve(M, rhs[..., None])[0, :, 0]

        qdd = forward_dynamics(q[0], qdot[0], tau, external, model, Terrain.flat(), cfg)
        np.testing.assert_allclose(qdd, expected, rtol=1e-6, atol=1e-6)


def test_rigid_pendulum_period():
    """Locking everything but pitch turns the robot into a compound pendulum about the hip."""
    model = RobotModel(link_masses=(1.0, 5.0, 3.0, 5.0, 3.0), joint_friction=0.0,
                       joint_damping=0.0)
    cfg = SimConfig()
    arrays = ModelArrays.from_models([model])
    terrain = TerrainArrays.from_terrains([Terrain.flat()])

    # signed COM distance below the hip with every joint at zero
    below = np.array([-0.2, 0.2, 0.6, 0.2, 0.6])
    masses = np.array(model.link_masses)
    i_pivot = float(np.sum(np.array(model.link_inertias) + masses * below**2))
    mgl = cfg.gravity * float(np.sum(masses * below))
    expected = 2 * math.pi * math.sqrt(i_pivot / mgl)

    q = np.array([[0.0, 5.0, 0.02, 0.0, 0.0, 0.0, 0.0]])
    qdot = np.zeros((1, 7))
    locked = (0, 1, 3, 4, 5, 6)
    dt = 2e-4
    crossings = []
    prev = q[0, 2]
    for k in range(int(2.5 * expected / dt)):
        qdd, _ = batched_forward_dynamics(
            q, qdot, np.zeros((1, 4)), None, arrays, terrain, cfg, locked=locked
        )
        qdot = qdot + dt * qdd
        q = q + dt * qdot
        if prev < 0.0 <= q[0, 2]:
            crossings.append(k * dt)
        prev = q[0, 2]
    assert len(crossings) >= 2
    assert crossings[1] - crossings[0] == pytest.approx(expected, rel=0.01)


@pytest.mark.slow
def test_standing_pose_survives_episode(model, flat):
    from walker_distill.sim.step import ground_clearance_height

    q = np.array([[0.0, 0.0, 0.0, *model.default_pose]])
    height = ground_clearance_height(
        q, ModelArrays.from_models([model]), TerrainArrays.from_terrains([flat])
    )[0]
    state = standing_state(model, height=height)
    for _ in range(500):
        result = step(state, np.zeros(4), model, flat, Command())
        assert not result.terminated
        state = result.state
