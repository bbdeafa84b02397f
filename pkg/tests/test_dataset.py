import numpy as np
import pytest

from walker_distill.amp import ScriptedGaitPolicy
from walker_distill.dataset import (
    STD_EPSILON,
    DatasetManifest,
    TransitionBatch,
    build_manifest,
    collect,
    collect_to_file,
    dataset_stats,
    iter_chunks,
    manifest_path,
    read_dataset,
    shard_seeds,
    shard_sizes,
    write_dataset,
)
from walker_distill.dataset.io import HEADER
from walker_distill.errors import (
    BadMagicError,
    ConfigurationError,
    DimensionMismatchError,
    InvalidArgumentError,
    TruncatedPayloadError,
)
from walker_distill.randomization import SetupId, build_setup
from walker_distill.sim import ACTOR_OBS_DIM, NUM_JOINTS

COLLECT_KW = {"num_envs": 4, "episode_steps": 60}


def random_batch(n: int, seed: int = 0, episode_len: int = 7) -> TransitionBatch:
    rng = np.random.default_rng(seed)
    return TransitionBatch(
        rng.normal(size=(n, ACTOR_OBS_DIM)),
        rng.normal(size=(n, NUM_JOINTS)),
        np.arange(n) // episode_len,
        np.arange(n) % episode_len,
    )


def manifest_for(batch: TransitionBatch) -> DatasetManifest:
    return build_manifest(batch, build_setup(SetupId.NONE), "expert-hash", seed=0)


@pytest.fixture
def scripted(library, model):
    return ScriptedGaitPolicy(library, model)


def test_collect_keeps_exact_count(scripted, library):
    batch = collect(scripted, build_setup(SetupId.NONE), 1000, seed=1, library=library,
                    **COLLECT_KW)
    assert len(batch) == 1000
    assert batch.obs_dim == ACTOR_OBS_DIM
    # episodes are contiguous and step indices restart at zero
    for ep in np.unique(batch.episode_ids):
        steps = batch.step_indices[batch.episode_ids == ep]
        assert np.array_equal(steps, np.arange(len(steps)))


def test_collect_rejects_non_positive_size(scripted):
    with pytest.raises(InvalidArgumentError):
        collect(scripted, build_setup(SetupId.NONE), 0, seed=1)


def test_collect_rejects_mismatched_expert(library):
    class Wide:
        obs_dim = ACTOR_OBS_DIM + 3
        act_dim = NUM_JOINTS

        def act(self, obs):
            return np.zeros((len(obs), NUM_JOINTS))

    with pytest.raises(ConfigurationError):
        collect(Wide(), build_setup(SetupId.NONE), 10, seed=1, library=library)


def test_collection_is_byte_identical(scripted, library, tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    setup = build_setup(SetupId.ALL)
    paths = []
    for name in ("a", "b"):
        path, _ = collect_to_file(scripted, setup, 500, 9, tmp_path / name / "data.ldds",
                                  "hash", library=library, **COLLECT_KW)
        paths.append(path)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert manifest_path(paths[0]).read_bytes() == manifest_path(paths[1]).read_bytes()


def test_shards_do_not_depend_on_workers(scripted, library):
    setup = build_setup(SetupId.TERRAIN)
    one = collect(scripted, setup, 300, 2, library=library, shards=3, workers=1, **COLLECT_KW)
    many = collect(scripted, setup, 300, 2, library=library, shards=3, workers=3, **COLLECT_KW)
    assert np.array_equal(one.observations, many.observations)
    assert shard_sizes(10, 3) == [4, 3, 3]
    seeds = shard_seeds(2, 3)
    assert seeds == shard_seeds(2, 3)
    assert len(set(seeds)) == 3
    assert shard_seeds(2, 4)[:3] == seeds


def test_setups_change_observation_statistics(scripted, library):
    stats = {}
    for setup_id in (SetupId.NONE, SetupId.ALL):
        batch = collect(scripted, build_setup(setup_id), 400, 3, library=library, **COLLECT_KW)
        stats[setup_id] = manifest_for(batch).obs_std
    assert not np.allclose(stats[SetupId.NONE], stats[SetupId.ALL])


def test_write_read_preserves_records(tmp_path):
    batch = random_batch(50)
    path = write_dataset(batch, manifest_for(batch), tmp_path / "d.ldds")
    loaded, manifest = read_dataset(path, chunk_rows=16)
    assert manifest.count == 50
    assert np.array_equal(loaded.observations, batch.observations)
    assert np.array_equal(loaded.actions, batch.actions)
    assert np.array_equal(loaded.episode_ids, batch.episode_ids)
    assert [len(obs) for obs, _ in iter_chunks(path, 16)] == [16, 16, 16, 2]


def test_header_layout(tmp_path):
    batch = random_batch(3)
    path = write_dataset(batch, manifest_for(batch), tmp_path / "d.ldds")
    raw = path.read_bytes()
    assert raw[:4] == b"LDDS"
    assert HEADER.unpack(raw[:HEADER.size])[1:] == (1, ACTOR_OBS_DIM, NUM_JOINTS, 3)
    assert len(raw) == HEADER.size + 3 * (ACTOR_OBS_DIM + NUM_JOINTS) * 4


def test_truncated_payload_names_offset(tmp_path):
    batch = random_batch(3)
    path = write_dataset(batch, manifest_for(batch), tmp_path / "d.ldds")
    row = (ACTOR_OBS_DIM + NUM_JOINTS) * 4
    path.write_bytes(path.read_bytes()[: HEADER.size + row + 30])
    with pytest.raises(TruncatedPayloadError) as info:
        read_dataset(path)
    assert info.value.offset == HEADER.size + row
    assert str(HEADER.size + row) in str(info.value)


def test_bad_magic(tmp_path):
    batch = random_batch(3)
    path = write_dataset(batch, manifest_for(batch), tmp_path / "d.ldds")
    path.write_bytes(b"NOPE" + path.read_bytes()[4:])
    with pytest.raises(BadMagicError):
        read_dataset(path)


def test_consumer_dimension_mismatch(tmp_path):
    batch = random_batch(3)
    path = write_dataset(batch, manifest_for(batch), tmp_path / "d.ldds")
    with pytest.raises(DimensionMismatchError):
        read_dataset(path, expect_obs_dim=ACTOR_OBS_DIM + 1)


def test_empty_dataset_is_readable(tmp_path):
    batch = TransitionBatch.empty(ACTOR_OBS_DIM, NUM_JOINTS)
    manifest = DatasetManifest(
        obs_dim=ACTOR_OBS_DIM, act_dim=NUM_JOINTS, count=0, setup_id=SetupId.NONE,
        expert_hash="none", seed=0, created_at="1970-01-01T00:00:00+00:00",
        obs_mean=[0.0] * ACTOR_OBS_DIM, obs_std=[1.0] * ACTOR_OBS_DIM,
        act_mean=[0.0] * NUM_JOINTS, act_std=[1.0] * NUM_JOINTS,
    )
    path = write_dataset(batch, manifest, tmp_path / "empty.ldds")
    loaded, loaded_manifest = read_dataset(path)
    assert len(loaded) == 0 and loaded_manifest.count == 0


def test_constant_column_std_is_clamped():
    batch = random_batch(20)
    batch.observations[:, 3] = 2.5
    stats = dataset_stats(batch)
    assert stats.observations.mean[3] == pytest.approx(2.5)
    assert stats.observations.std[3] == STD_EPSILON


def test_streaming_stats_match_two_pass():
    batch = random_batch(100_000, seed=5)
    stats = dataset_stats(batch, chunk_rows=4096)
    data = batch.observations.astype(np.float64)
    mean = data.mean(axis=0)
    std = np.sqrt(np.mean((data - mean) ** 2, axis=0))
    assert np.allclose(stats.observations.mean, mean, rtol=1e-9, atol=1e-12)
    assert np.allclose(stats.observations.std, std, rtol=1e-9)
    assert np.array_equal(stats.observations.minimum, data.min(axis=0))


def test_stats_need_rows():
    with pytest.raises(InvalidArgumentError):
        dataset_stats(TransitionBatch.empty(ACTOR_OBS_DIM, NUM_JOINTS))
