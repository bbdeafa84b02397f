import numpy as np
import pytest
import torch

from walker_distill.dataset import STD_EPSILON, TransitionBatch, build_manifest
from walker_distill.diffusion import (
    ControllerState,
    DenoiserModel,
    DiffusionConfig,
    DiffusionPolicyArtifact,
    DPTrainConfig,
    NormalizationStats,
    WindowDataset,
    WindowIndex,
    build_noise_schedule,
    denormalize,
    forward_noising,
    normalize,
    previous_actions,
    receding_horizon_act,
    sample_actions,
    train_dp,
    training_step,
)
from walker_distill.diffusion.trainer import diffusion_loss
from walker_distill.errors import ConfigurationError, InvalidArgumentError, NumericalError
from walker_distill.randomization import SetupId, build_setup
from walker_distill.seeding import torch_generator
from walker_distill.sim import ACTOR_OBS_DIM, COMMAND_DIM, NUM_JOINTS

UNSCALED = DiffusionConfig(reference_steps=None)
TINY = DiffusionConfig(obs_history=2, horizon=3, denoising_steps=5, width=16, heads=2,
                       decoder_layers=1)


def unscaled_schedule(steps: int, beta_min: float = 1e-4, beta_max: float = 0.02):
    return build_noise_schedule(UNSCALED, steps=steps, beta_min=beta_min, beta_max=beta_max)


class OracleDenoiser:
    """Closed-form noise prediction for a known clean sample."""

    def __init__(self, schedule, target: torch.Tensor):
        self.abar = schedule.alphas_cumprod
        self.target = target
        self.calls = 0

    def __call__(self, x, t, history, goal):
        self.calls += 1
        abar = self.abar.to(x.dtype)[t].reshape(-1, 1, 1)
        return (x - abar.sqrt() * self.target) / (1.0 - abar).sqrt()


def episode_batch(episodes: int, length: int, seed: int = 0) -> TransitionBatch:
    rng = np.random.default_rng(seed)
    n = episodes * length
    return TransitionBatch(
        rng.normal(size=(n, ACTOR_OBS_DIM)),
        rng.normal(size=(n, NUM_JOINTS)),
        np.arange(n) // length,
        np.arange(n) % length,
    )


def as_dataset(batch: TransitionBatch):
    return batch, build_manifest(batch, build_setup(SetupId.NONE), "expert-hash", seed=0)


# --- noise schedule ---------------------------------------------------------


def test_single_step_schedule():
    schedule = unscaled_schedule(1)
    assert schedule.alphas_cumprod.tolist() == pytest.approx([1.0 - 1e-4])


def test_linear_schedule_matches_direct_product():
    schedule = unscaled_schedule(10)
    abar = schedule.alphas_cumprod
    assert torch.all(abar[1:] < abar[:-1])
    assert schedule.betas[0].item() == pytest.approx(1e-4)
    assert schedule.betas[-1].item() == pytest.approx(0.02)
    assert abar[-1].item() == pytest.approx(float(np.prod(1.0 - np.linspace(1e-4, 0.02, 10))))
    assert torch.all((abar.sqrt() ** 2 + (1.0 - abar) - 1.0).abs() < 1e-12)


def test_constant_betas_give_closed_form():
    schedule = unscaled_schedule(6, beta_min=0.01, beta_max=0.01)
    expected = [0.99**t for t in range(1, 7)]
    assert schedule.alphas_cumprod.tolist() == pytest.approx(expected, rel=1e-12)


def test_schedule_rescales_reference_betas():
    schedule = build_noise_schedule(DiffusionConfig(denoising_steps=10, reference_steps=1000))
    assert schedule.betas[0].item() == pytest.approx(1e-2)
    assert schedule.betas[-1].item() == pytest.approx(0.999)
    assert torch.all(schedule.betas < 1.0)


def test_default_config_rescales_to_a_thousand_steps():
    assert DiffusionConfig().reference_steps == 1000
    one_step = build_noise_schedule(steps=1)
    assert one_step.alphas_cumprod.tolist() == pytest.approx([1.0 - 1e-4 * 1000])
    plain = build_noise_schedule(UNSCALED, steps=1)
    assert plain.alphas_cumprod.tolist() == pytest.approx([1.0 - 1e-4])


@pytest.mark.parametrize(
    "kwargs",
    [
        {"steps": 0},
        {"steps": 5, "beta_min": 0.0},
        {"steps": 5, "beta_max": 1.0},
        {"steps": 5, "beta_min": 0.05, "beta_max": 0.01},
    ],
)
def test_invalid_schedule_raises(kwargs):
    with pytest.raises(InvalidArgumentError):
        build_noise_schedule(UNSCALED, **kwargs)


# --- forward noising --------------------------------------------------------


def test_noiseless_forward_noising_scales_signal():
    schedule = unscaled_schedule(10)
    x0 = torch.randn(3, 8, 4, dtype=torch.float64)
    x_t = forward_noising(x0, 7, torch.zeros_like(x0), schedule)
    assert torch.allclose(x_t, schedule.alphas_cumprod[6].sqrt() * x0)


def test_forward_noising_accepts_per_sample_steps():
    schedule = unscaled_schedule(10)
    x0 = torch.ones(2, 3, 4, dtype=torch.float64)
    eps = torch.zeros_like(x0)
    x_t = forward_noising(x0, torch.tensor([1, 10]), eps, schedule)
    assert torch.allclose(x_t[0], schedule.alphas_cumprod[0].sqrt() * x0[0])
    assert torch.allclose(x_t[1], schedule.alphas_cumprod[9].sqrt() * x0[1])


def test_forward_noising_is_mostly_noise_at_the_end():
    schedule = build_noise_schedule(DiffusionConfig(denoising_steps=10))
    x0 = torch.full((4, 8, 4), 3.0, dtype=torch.float64)
    eps = torch.randn_like(x0)
    x_t = forward_noising(x0, 10, eps, schedule)
    assert torch.allclose(x_t, eps, atol=5e-3)


@pytest.mark.parametrize("t", [0, 11, -1])
def test_forward_noising_rejects_out_of_range_steps(t):
    x0 = torch.zeros(1, 8, 4)
    with pytest.raises(InvalidArgumentError):
        forward_noising(x0, t, torch.zeros_like(x0), unscaled_schedule(10))


def test_forward_noising_rejects_mismatched_noise():
    with pytest.raises(InvalidArgumentError):
        forward_noising(torch.zeros(1, 8, 4), 1, torch.zeros(1, 8, 3), unscaled_schedule(10))


def test_forward_noising_variance():
    schedule = unscaled_schedule(10)
    gen = torch_generator(0)
    x0 = 2.0 * torch.randn(100_000, dtype=torch.float64, generator=gen)
    eps = torch.randn(100_000, dtype=torch.float64, generator=gen)
    abar = schedule.alphas_cumprod[4].item()
    x_t = forward_noising(x0, 5, eps, schedule)
    expected = abar * x0.var().item() + (1.0 - abar)
    assert x_t.var().item() == pytest.approx(expected, rel=0.02)


# --- denoiser, loss and sampling --------------------------------------------


def tiny_inputs(batch: int = 2, dtype=torch.float32):
    gen = torch_generator(1)
    return (
        torch.randn(batch, TINY.horizon, NUM_JOINTS, generator=gen, dtype=dtype),
        torch.tensor([0, 4] * (batch // 2) + [2] * (batch % 2)),
        torch.randn(batch, TINY.obs_history, ACTOR_OBS_DIM + NUM_JOINTS, generator=gen,
                    dtype=dtype),
        torch.randn(batch, COMMAND_DIM, generator=gen, dtype=dtype),
    )


def test_denoiser_preserves_action_shape():
    model = DenoiserModel(ACTOR_OBS_DIM, NUM_JOINTS, COMMAND_DIM, TINY)
    noisy, t, history, goal = tiny_inputs(5)
    assert model(noisy, t, history, goal).shape == noisy.shape


def test_denoiser_gradient_matches_finite_differences():
    torch.manual_seed(0)
    model = DenoiserModel(ACTOR_OBS_DIM, NUM_JOINTS, COMMAND_DIM, TINY).double()
    model.train()
    noisy, t, history, goal = tiny_inputs(2, torch.float64)
    target = torch.randn_like(noisy)

    def loss() -> torch.Tensor:
        return ((model(noisy, t, history, goal) - target) ** 2).mean()

    checks = [(model.out_proj.weight, (1, 3)), (model.history_encoder[0].weight, (2, 7))]
    for weight, idx in checks:
        (grad,) = torch.autograd.grad(loss(), weight)
        eps = 1e-6
        with torch.no_grad():
            weight[idx] += eps
            plus = loss().item()
            weight[idx] -= 2 * eps
            minus = loss().item()
            weight[idx] += eps
        numeric = (plus - minus) / (2 * eps)
        assert numeric == pytest.approx(grad[idx].item(), rel=1e-4, abs=1e-9)


def test_loss_of_a_zero_predictor_is_about_one():
    schedule = unscaled_schedule(10)

    def zero(x, t, history, goal):
        return torch.zeros_like(x)

    _, _, history, goal = tiny_inputs(64)
    x0 = torch.randn(64, 8, 4)
    loss = diffusion_loss((history, goal, x0), zero, schedule, torch_generator(3))
    assert loss.item() == pytest.approx(1.0, abs=0.15)


def test_training_step_reports_non_finite_loss():
    model = DenoiserModel(ACTOR_OBS_DIM, NUM_JOINTS, COMMAND_DIM, TINY)
    optimizer = torch.optim.AdamW(model.parameters(), lr=1e-3)
    _, _, history, goal = tiny_inputs(2)
    x0 = torch.full((2, TINY.horizon, NUM_JOINTS), float("nan"))
    with pytest.raises(NumericalError) as info:
        training_step((history, goal, x0), model, build_noise_schedule(TINY), optimizer)
    assert info.value.diagnostics["target_finite"] is False


def test_training_step_loss_is_non_negative():
    model = DenoiserModel(ACTOR_OBS_DIM, NUM_JOINTS, COMMAND_DIM, TINY)
    optimizer = torch.optim.AdamW(model.parameters(), lr=1e-3)
    noisy, _, history, goal = tiny_inputs(4)
    schedule = build_noise_schedule(TINY)
    for _ in range(3):
        assert training_step((history, goal, noisy), model, schedule, optimizer) >= 0.0


@pytest.mark.slow
def test_training_overfits_a_fixed_batch():
    torch.manual_seed(0)
    cfg = DiffusionConfig(obs_history=2, horizon=3, denoising_steps=10, width=64, heads=4,
                          decoder_layers=2)
    model = DenoiserModel(ACTOR_OBS_DIM, NUM_JOINTS, COMMAND_DIM, cfg)
    optimizer = torch.optim.AdamW(model.parameters(), lr=1e-3)
    schedule = build_noise_schedule(cfg)
    noisy, _, history, goal = tiny_inputs(4)
    gen = torch_generator(0)
    losses = [training_step((history, goal, noisy), model, schedule, optimizer, gen)
              for _ in range(2000)]
    assert np.mean(losses[-50:]) < 0.05


def test_oracle_sampler_recovers_target():
    schedule = unscaled_schedule(50)
    target = torch.randn(3, 8, 4, generator=torch_generator(5))
    oracle = OracleDenoiser(schedule, target)
    history, goal = torch.zeros(3, 4, 20), torch.zeros(3, 2)
    out = sample_actions(oracle, history, goal, schedule, torch_generator(0), horizon=8,
                         act_dim=4)
    assert out.shape == (3, 8, 4)
    assert torch.sqrt(((out - target) ** 2).mean()).item() < 0.05
    assert oracle.calls == 50


def test_sampler_is_deterministic_for_a_fixed_generator():
    artifact = DiffusionPolicyArtifact.initialize(TINY, seed=0)
    history = torch.randn(2, TINY.obs_history, ACTOR_OBS_DIM + NUM_JOINTS)
    goal = torch.randn(2, COMMAND_DIM)
    a = sample_actions(artifact.model, history, goal, artifact.schedule, torch_generator(9))
    b = sample_actions(artifact.model, history, goal, artifact.schedule, torch_generator(9))
    assert a.shape == (2, TINY.horizon, NUM_JOINTS)
    assert torch.equal(a, b)


def test_sampler_rejects_bad_conditioning():
    artifact = DiffusionPolicyArtifact.initialize(TINY, seed=0)
    with pytest.raises(InvalidArgumentError):
        sample_actions(artifact.model, torch.zeros(2, 20), torch.zeros(2, 2), artifact.schedule)
    with pytest.raises(InvalidArgumentError):
        sample_actions(artifact.model, torch.zeros(2, 2, 20), torch.zeros(3, 2),
                       artifact.schedule)


def test_sampler_needs_plan_shape_for_bare_callables():
    schedule = unscaled_schedule(2)
    with pytest.raises(InvalidArgumentError):
        sample_actions(OracleDenoiser(schedule, torch.zeros(1)), torch.zeros(1, 2, 20),
                       torch.zeros(1, 2), schedule)


# --- normalization ----------------------------------------------------------


def test_normalization_examples():
    stats = NormalizationStats(np.array([1.0, -2.0, 0.5]), np.array([2.0, 1.0, 0.1]))
    assert np.allclose(normalize(stats.mean, stats), 0.0)
    x = np.array([[3.0, 4.0, -1.0], [0.0, 0.0, 0.0]])
    assert np.allclose(denormalize(normalize(x, stats), stats), x, atol=1e-6)
    shifted = normalize(x, stats)[:, 1]
    assert np.allclose(shifted, x[:, 1] + 2.0)
    t = torch.tensor(x, dtype=torch.float32)
    assert torch.allclose(denormalize(normalize(t, stats), stats), t, atol=1e-6)


def test_normalization_stats_clamp_and_guard():
    stats = NormalizationStats(np.zeros(2), np.array([0.0, 5e-4]))
    assert stats.std[0] == STD_EPSILON
    assert stats.guarded().std.tolist() == [1.0, 1.0]
    with pytest.raises(ValueError):
        NormalizationStats(np.zeros(2), np.ones(3))


# --- receding-horizon control -----------------------------------------------


def oracle_controller(steps: int, value: float = 0.5, obs_history: int = 4):
    schedule = unscaled_schedule(steps)
    target = torch.full((1, 3, NUM_JOINTS), value)
    oracle = OracleDenoiser(schedule, target)
    ctrl = ControllerState(
        model=oracle,
        schedule=schedule,
        obs_history=obs_history,
        horizon=3,
        obs_stats=NormalizationStats.identity(ACTOR_OBS_DIM),
        act_stats=NormalizationStats(np.ones(NUM_JOINTS), np.full(NUM_JOINTS, 2.0)),
        generator=torch_generator(0),
    )
    return ctrl, oracle


def test_episode_start_pads_history_with_first_observation():
    ctrl, _ = oracle_controller(steps=1)
    first = np.arange(ACTOR_OBS_DIM, dtype=np.float64)
    action = receding_horizon_act(ctrl, first)
    assert action.shape == (NUM_JOINTS,)
    expected = np.concatenate([first, np.zeros(NUM_JOINTS)])
    assert ctrl.history.shape == (1, 4, ACTOR_OBS_DIM + NUM_JOINTS)
    assert np.allclose(ctrl.history[0], expected[None, :])

    second = first + 1.0
    receding_horizon_act(ctrl, second)
    assert np.allclose(ctrl.history[0, -1], np.concatenate([second, action]))
    assert np.allclose(ctrl.history[0, :3], expected[None, :])


def test_constant_oracle_gives_constant_first_actions():
    ctrl, oracle = oracle_controller(steps=1, value=0.5)
    obs = np.zeros(ACTOR_OBS_DIM)
    actions = [receding_horizon_act(ctrl, obs + k) for k in range(4)]
    # 0.5 normalized, std 2 and mean 1 in raw units
    for a in actions:
        assert np.allclose(a, 2.0, atol=1e-5)
    assert ctrl.last_plan.shape == (1, 3, NUM_JOINTS)
    assert oracle.calls == 4


def test_controller_replans_every_step():
    ctrl, oracle = oracle_controller(steps=3)
    for k in range(5):
        receding_horizon_act(ctrl, np.zeros(ACTOR_OBS_DIM))
        assert oracle.calls == 3 * (k + 1)


def test_reset_envs_restarts_padding():
    ctrl, _ = oracle_controller(steps=1, obs_history=2)
    ctrl.reset(2)
    obs = np.zeros((2, ACTOR_OBS_DIM))
    receding_horizon_act(ctrl, obs)
    ctrl.reset_envs([1])
    fresh = np.full((2, ACTOR_OBS_DIM), 7.0)
    receding_horizon_act(ctrl, fresh)
    assert np.allclose(ctrl.history[1, :, :ACTOR_OBS_DIM], 7.0)
    assert np.allclose(ctrl.history[1, :, ACTOR_OBS_DIM:], 0.0)
    assert np.allclose(ctrl.history[0, 0, :ACTOR_OBS_DIM], 0.0)


# --- windows and training ---------------------------------------------------


def test_window_index_stays_inside_episodes():
    index = WindowIndex(np.array([0, 0, 0, 0, 1, 1, 1]), obs_history=2, horizon=3)
    assert index.starts.tolist() == [0, 1, 4]
    assert index.history_rows(1).tolist() == [0, 1]
    assert index.history_rows(4).tolist() == [4, 4]
    assert index.target_rows(4).tolist() == [4, 5, 6]
    for t in index.starts:
        index.audit(int(t))
    with pytest.raises(ConfigurationError):
        index.audit(2)


def test_previous_actions_reset_at_episode_start():
    batch = episode_batch(episodes=2, length=3)
    prev = previous_actions(batch)
    assert np.all(prev[[0, 3]] == 0.0)
    assert np.array_equal(prev[[1, 2, 4, 5]], batch.actions[[0, 1, 3, 4]])


def test_window_dataset_shapes():
    batch, manifest = as_dataset(episode_batch(episodes=3, length=10))
    obs_stats, act_stats = NormalizationStats.from_manifest(manifest)
    index = WindowIndex(batch.episode_ids, TINY.obs_history, TINY.horizon)
    data = WindowDataset(batch, index, obs_stats, act_stats)
    assert len(data) == 3 * (10 - TINY.horizon + 1)
    history, goal, plan = data[0]
    assert history.shape == (TINY.obs_history, ACTOR_OBS_DIM + NUM_JOINTS)
    assert goal.shape == (COMMAND_DIM,)
    assert plan.shape == (TINY.horizon, NUM_JOINTS)


def test_dataset_too_small_for_a_window():
    with pytest.raises(ConfigurationError):
        train_dp(as_dataset(episode_batch(episodes=4, length=2)), TINY, seed=0)


def test_zero_epochs_returns_usable_artifact(tmp_path):
    artifact = train_dp(as_dataset(episode_batch(episodes=4, length=12)), TINY, seed=0,
                        train_cfg=DPTrainConfig(epochs=0), out_dir=tmp_path / "dp")
    ctrl = artifact.controller(num_envs=2, seed=0)
    actions = receding_horizon_act(ctrl, np.zeros((2, ACTOR_OBS_DIM)))
    assert actions.shape == (2, NUM_JOINTS) and np.all(np.isfinite(actions))
    assert (tmp_path / "dp").exists()


def test_training_is_deterministic_per_seed():
    dataset = as_dataset(episode_batch(episodes=6, length=20))
    train_cfg = DPTrainConfig(epochs=2, batch_size=16)
    a = train_dp(dataset, TINY, seed=4, train_cfg=train_cfg)
    b = train_dp(dataset, TINY, seed=4, train_cfg=train_cfg)
    assert len(a.metadata["train_losses"]) == 2
    assert a.metadata == b.metadata
    for key, value in a.model.state_dict().items():
        assert torch.equal(value, b.model.state_dict()[key])


def test_artifact_save_and_load(tmp_path):
    dataset = as_dataset(episode_batch(episodes=4, length=12))
    artifact = train_dp(dataset, TINY, seed=1, train_cfg=DPTrainConfig(epochs=1, batch_size=8))
    artifact.save(tmp_path / "dp")
    loaded = DiffusionPolicyArtifact.load(tmp_path / "dp")
    assert loaded.config == artifact.config
    assert np.allclose(loaded.obs_stats.std, artifact.obs_stats.std)
    assert loaded.dataset["expert_hash"] == "expert-hash"
    for key, value in artifact.model.state_dict().items():
        assert torch.equal(value, loaded.model.state_dict()[key])

    obs = np.random.default_rng(0).normal(size=(3, ACTOR_OBS_DIM))
    a = receding_horizon_act(artifact.controller(3, seed=2), obs)
    b = receding_horizon_act(loaded.controller(3, seed=2), obs)
    assert np.allclose(a, b)
